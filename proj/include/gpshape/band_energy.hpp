#pragma once

// Hermitian Toeplitz band matrix and in-band pulse energies.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "gpshape/core_model.hpp"
#include "gpshape/detail/fft.hpp"
#include "gpshape/error.hpp"

namespace gpshape {

/// phi(l) = integral over B of e^{+j 2 pi f l} df, so that p^H Phi p equals the
/// energy of P(f) = sum_n p(n) e^{-j 2 pi f n} inside B.
inline cplx phi_entry(const BandSet& band, long long lag) {
  if (band.empty()) throw ConfigError("phi_entry: empty band");
  if (lag == 0) return {band.measure(), 0.0};
  const double l = static_cast<double>(lag);
  cplx acc{0.0, 0.0};
  for (const auto& iv : band.intervals()) {
    // (e^{j2pi f2 l} - e^{j2pi f1 l}) / (j 2 pi l), written without cancellation.
    const double centre = std::numbers::pi * (iv.lo + iv.hi) * l;
    const double mag = std::sin(std::numbers::pi * iv.width() * l) / (std::numbers::pi * l);
    acc += mag * cplx(std::cos(centre), std::sin(centre));
  }
  return acc;
}

/// Phi_B of size L x L, stored by its generator phi(0..L-1).
class BandMatrix {
 public:
  BandMatrix() = default;

  BandMatrix(const BandSet& band, int L) : size_(L) {
    if (L < 1) throw ConfigError("phi_matrix: pulse length must be >= 1");
    if (band.empty()) throw ConfigError("phi_matrix: empty band");
    first_row_.resize(static_cast<std::size_t>(L));
    for (int m = 0; m < L; ++m) first_row_[static_cast<std::size_t>(m)] = phi_entry(band, m);
    build_spectrum();
  }

  int size() const noexcept { return size_; }
  const std::vector<cplx>& first_row() const noexcept { return first_row_; }

  cplx lag(long long l) const {
    if (l >= 0) return first_row_[static_cast<std::size_t>(l)];
    return std::conj(first_row_[static_cast<std::size_t>(-l)]);
  }

  cplx entry(int m, int n) const { return lag(static_cast<long long>(m) - n); }

  CMat dense() const {
    CMat d(size_, size_);
    for (int m = 0; m < size_; ++m)
      for (int n = 0; n < size_; ++n) d(m, n) = entry(m, n);
    return d;
  }

  /// Phi restricted to the given rows and columns.
  CMat submatrix(std::span<const int> rows, std::span<const int> cols) const {
    CMat d(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = entry(rows[i], cols[j]);
    return d;
  }

  /// Phi x through a circulant embedding, O(L log L).
  CVec multiply(const CVec& x) const {
    if (x.size() != size_) throw ConfigError("BandMatrix::multiply: dimension mismatch");
    const int M = static_cast<int>(spectrum_.size());
    std::vector<cplx> buf(static_cast<std::size_t>(M), cplx{});
    for (int n = 0; n < size_; ++n) buf[static_cast<std::size_t>(n)] = x[n];
    detail::fft_inplace(buf);
    for (int i = 0; i < M; ++i) buf[static_cast<std::size_t>(i)] *= spectrum_[static_cast<std::size_t>(i)];
    detail::ifft_inplace(buf);
    CVec y(size_);
    const double scale = 1.0 / M;
    for (int n = 0; n < size_; ++n) y[n] = buf[static_cast<std::size_t>(n)] * scale;
    return y;
  }

  CMat multiply(const CMat& X) const {
    CMat Y(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) Y.col(j) = multiply(CVec(X.col(j)));
    return Y;
  }

 private:
  void build_spectrum() {
    const int M = detail::fast_fft_size(2 * size_ - 1);
    spectrum_.assign(static_cast<std::size_t>(M), cplx{});
    for (int l = 0; l < size_; ++l) spectrum_[static_cast<std::size_t>(l)] = first_row_[static_cast<std::size_t>(l)];
    for (int l = 1; l < size_; ++l) spectrum_[static_cast<std::size_t>(M - l)] = std::conj(first_row_[static_cast<std::size_t>(l)]);
    detail::fft_inplace(spectrum_);
  }

  int size_ = 0;
  std::vector<cplx> first_row_;
  std::vector<cplx> spectrum_;
};

inline BandMatrix phi_matrix(const BandSet& band, int pulse_len) { return BandMatrix(band, pulse_len); }

/// p^H Phi p, clamped at zero.
inline double band_energy(const CVec& pulse, const BandMatrix& phi) {
  if (pulse.size() != phi.size()) throw ConfigError("band_energy: dimension mismatch");
  const double e = pulse.dot(phi.multiply(pulse)).real();
  return e > 0.0 ? e : 0.0;
}

/// (1/N_s) sum_k sigma_k^2 E_{k,B} over the given pulses.
inline double band_power(const OfdmConfig& config, const std::vector<CVec>& pulses,
                         const std::vector<double>& variances, const BandMatrix& phi) {
  if (pulses.size() != variances.size()) throw ConfigError("band_power: pulse/variance count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pulses.size(); ++i) {
    if (variances[i] < 0.0) throw ConfigError("band_power: negative variance");
    if (variances[i] == 0.0) continue;
    acc += variances[i] * band_energy(pulses[i], phi);
  }
  return acc / config.symbol_period();
}

}  // namespace gpshape
