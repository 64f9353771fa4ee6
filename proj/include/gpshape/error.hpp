#pragma once

#include <stdexcept>
#include <string>

namespace gpshape {

// Error categories map one-to-one onto the CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration, scenario or argument.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// An optimizer did not reach its stopping criterion.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual = 0.0, int iterations = 0)
      : Error(what), residual_(residual), iterations_(iterations) {}

  int exit_code() const noexcept override { return 3; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace gpshape
