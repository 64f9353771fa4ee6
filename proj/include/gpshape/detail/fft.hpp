#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace gpshape::detail {

using cplx = std::complex<double>;

enum class FftDirection { forward, backward };

// FFTW planning is not thread-safe, execution with the new-array interface is.
// Plans are created once per (size, direction) and shared.
class FftPlan {
 public:
  FftPlan(int n, FftDirection dir) : n_(n) {
    std::vector<cplx> a(static_cast<std::size_t>(n));
    plan_ = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                             reinterpret_cast<fftw_complex*>(a.data()),
                             dir == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() { fftw_destroy_plan(plan_); }

  int size() const noexcept { return n_; }

  // In-place plan, so the new-array call must be in-place too.
  void execute(cplx* data) const {
    fftw_execute_dft(plan_, reinterpret_cast<fftw_complex*>(data), reinterpret_cast<fftw_complex*>(data));
  }

 private:
  int n_;
  fftw_plan plan_;
};

inline const FftPlan& plan_for(int n, FftDirection dir) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<FftPlan>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{n, static_cast<int>(dir)}];
  if (!slot) slot = std::make_unique<FftPlan>(n, dir);
  return *slot;
}

/// X(k) = sum_n x(n) e^{-j 2 pi k n / N}
inline void fft_inplace(std::span<cplx> x) {
  plan_for(static_cast<int>(x.size()), FftDirection::forward).execute(x.data());
}

/// x(n) = sum_k X(k) e^{+j 2 pi k n / N}  (no 1/N factor)
inline void ifft_inplace(std::span<cplx> x) {
  plan_for(static_cast<int>(x.size()), FftDirection::backward).execute(x.data());
}

/// Smallest 2^a 3^b 5^c that is >= n.
inline int fast_fft_size(int n) {
  int best = 1;
  while (best < n) best *= 2;
  for (int p5 = 1; p5 < best; p5 *= 5)
    for (int p35 = p5; p35 < best; p35 *= 3) {
      int v = p35;
      while (v < n) v *= 2;
      if (v < best) best = v;
    }
  return best;
}

}  // namespace gpshape::detail
