#pragma once

// Analytic PSD, Welch estimate, PAPR, mask compliance and carrier-nulling
// baselines.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gpshape/core_model.hpp"
#include "gpshape/detail/fft.hpp"
#include "gpshape/detail/parallel.hpp"
#include "gpshape/error.hpp"
#include "gpshape/pulse_designer.hpp"

namespace gpshape {

/// Design without generalized pulses: every data carrier uses p_k.
inline PulseDesign conventional_design(const OfdmConfig& config, const ShapingWindow& window, const CarrierPlan& plan,
                                       const BandSet& band = {}) {
  PulseDesign d;
  d.config = config;
  d.plan = plan;
  d.plan.reduced_data.clear();
  d.plan.per_carrier_cc.clear();
  d.window = window;
  d.band = band;
  return d;
}

enum class PsdNormalization { absolute, peak_0dB };

/// PSD samples at f = i/K for i = -K/2+1 .. K/2, K = density N.
struct PsdCurve {
  std::vector<double> frequency;  // normalized, ascending in (-1/2, 1/2]
  std::vector<double> values;
  int grid_density = 16;
  double sample_rate_hz = 1.0;
  PsdNormalization normalization = PsdNormalization::absolute;

  std::size_t size() const noexcept { return values.size(); }

  double peak() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

  PsdCurve normalized_to(double reference) const {
    PsdCurve c = *this;
    for (auto& v : c.values) v /= reference;
    c.normalization = PsdNormalization::peak_0dB;
    return c;
  }

  PsdCurve normalized() const { return normalized_to(peak()); }

  std::vector<double> db() const {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      out[i] = 10.0 * std::log10(std::max(values[i], std::numeric_limits<double>::min()));
    return out;
  }

  /// Largest value over frequencies in [lo, hi] (wrapped interval allowed when lo > hi).
  double max_over(double lo, double hi) const {
    double m = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double f = frequency[i];
      const bool inside = lo <= hi ? (f >= lo && f <= hi) : (f >= lo || f <= hi);
      if (inside) {
        m = any ? std::max(m, values[i]) : values[i];
        any = true;
      }
    }
    if (!any) throw ConfigError("max_over: no grid point in interval");
    return m;
  }

  /// Trapezoid-free rectangle rule over the uniform grid (exact for the DFT grid).
  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return values.empty() ? 0.0 : s / static_cast<double>(values.size());
  }
};

namespace detail {

/// |DTFT(x)|^2 at f = i/K, i = 0..K-1 (time-aliased when K < length).
inline std::vector<double> power_spectrum(const CVec& x, int K) {
  std::vector<cplx> buf(static_cast<std::size_t>(K), cplx{});
  for (Eigen::Index n = 0; n < x.size(); ++n) buf[static_cast<std::size_t>(n % K)] += x[n];
  fft_inplace(buf);
  std::vector<double> p(static_cast<std::size_t>(K));
  for (int i = 0; i < K; ++i) p[static_cast<std::size_t>(i)] = std::norm(buf[static_cast<std::size_t>(i)]);
  return p;
}

}  // namespace detail

/// Accumulated sum_k sigma_k^2 |H_k(f)|^2 on the natural grid f = i/K,
/// with carriers removable one at a time.
class PsdAccumulator {
 public:
  PsdAccumulator(const PulseDesign& design, std::vector<double> variances, int grid_density)
      : design_(design), density_(grid_density) {
    const int N = design.config.n_carriers;
    if (grid_density < 4) throw ConfigError("grid_density must be >= 4");
    if (variances.empty()) variances.assign(design.plan.data.size(), 1.0);
    if (variances.size() != design.plan.data.size()) throw ConfigError("variance count must equal |D|");
    for (double v : variances)
      if (v < 0.0) throw ConfigError("variances must be non-negative");
    variances_ = std::move(variances);
    K_ = grid_density * N;
    // |G(f)|^2 of the window; p_k is g shifted by k/N up to a phase.
    CVec g(design.window.size());
    for (int n = 0; n < design.window.size(); ++n) g[n] = design.window.samples[static_cast<std::size_t>(n)];
    window_power_ = detail::power_spectrum(g, K_);

    // Conventional carriers: circular convolution of |G|^2 with a comb.
    std::vector<cplx> comb(static_cast<std::size_t>(K_), cplx{});
    for (std::size_t j = 0; j < design.plan.data.size(); ++j) {
      const int k = design.plan.data[j];
      if (design.find(k)) continue;
      comb[static_cast<std::size_t>(k * density_)] += variances_[j];
    }
    std::vector<cplx> gw(window_power_.begin(), window_power_.end());
    detail::fft_inplace(comb);
    detail::fft_inplace(gw);
    for (int i = 0; i < K_; ++i) comb[static_cast<std::size_t>(i)] *= gw[static_cast<std::size_t>(i)];
    detail::ifft_inplace(comb);
    values_.resize(static_cast<std::size_t>(K_));
    for (int i = 0; i < K_; ++i) values_[static_cast<std::size_t>(i)] = std::max(0.0, comb[static_cast<std::size_t>(i)].real() / K_);

    // Generalized carriers: exact zero-padded transforms.
    std::vector<std::vector<double>> spectra(design.carriers.size());
    detail::parallel_for(design.carriers.size(), [&](std::size_t i) {
      spectra[i] = detail::power_spectrum(design.pulse(design.carriers[i].carrier), K_);
    });
    for (std::size_t i = 0; i < design.carriers.size(); ++i) {
      const double var = variance_of(design.carriers[i].carrier);
      for (int n = 0; n < K_; ++n) values_[static_cast<std::size_t>(n)] += var * spectra[i][static_cast<std::size_t>(n)];
    }
    active_.insert(design.plan.data.begin(), design.plan.data.end());
  }

  int grid_size() const noexcept { return K_; }
  const std::vector<double>& raw() const noexcept { return values_; }

  bool is_active(int k) const { return active_.count(k) > 0; }

  /// Removes carrier k (a data carrier) from the sum.
  void remove_carrier(int k) {
    if (!active_.erase(k)) return;
    const double var = variance_of(k);
    if (var == 0.0) return;
    if (design_.find(k)) {
      const auto spec = detail::power_spectrum(design_.pulse(k), K_);
      for (int i = 0; i < K_; ++i) values_[static_cast<std::size_t>(i)] -= var * spec[static_cast<std::size_t>(i)];
    } else {
      const int shift = k * density_;
      for (int i = 0; i < K_; ++i)
        values_[static_cast<std::size_t>((i + shift) % K_)] -= var * window_power_[static_cast<std::size_t>(i)];
    }
    for (auto& v : values_) v = std::max(v, 0.0);
  }

  /// (1/N_s) sum, reordered to ascending frequency in (-1/2, 1/2].
  PsdCurve curve() const {
    PsdCurve c;
    c.grid_density = density_;
    c.sample_rate_hz = design_.config.sample_rate_hz;
    c.frequency.resize(static_cast<std::size_t>(K_));
    c.values.resize(static_cast<std::size_t>(K_));
    const double scale = 1.0 / design_.config.symbol_period();
    for (int j = 0; j < K_; ++j) {
      const int i = j - K_ / 2 + 1;  // -K/2+1 .. K/2
      const int idx = ((i % K_) + K_) % K_;
      c.frequency[static_cast<std::size_t>(j)] = static_cast<double>(i) / K_;
      c.values[static_cast<std::size_t>(j)] = values_[static_cast<std::size_t>(idx)] * scale;
    }
    return c;
  }

 private:
  double variance_of(int k) const {
    const auto& data = design_.plan.data;
    const auto it = std::lower_bound(data.begin(), data.end(), k);
    if (it == data.end() || *it != k) throw ConfigError("carrier " + std::to_string(k) + " is not a data carrier");
    return variances_[static_cast<std::size_t>(it - data.begin())];
  }

  const PulseDesign& design_;
  int density_;
  int K_ = 0;
  std::vector<double> variances_;
  std::vector<double> window_power_;
  std::vector<double> values_;
  std::set<int> active_;
};

/// S(f) = (1/N_s) sum_{k in D} sigma_k^2 |H_k(f)|^2. Empty variances mean 1.
inline PsdCurve analytic_psd(const PulseDesign& design, const std::vector<double>& variances = {},
                             int grid_density = 16) {
  return PsdAccumulator(design, variances, grid_density).curve();
}

// ---------------------------------------------------------------------------
// Welch

/// Averaged periodogram with a Hann window, |FFT(w x)|^2 / sum(w^2) per
/// segment, so unit-variance white noise gives 1. Output ascending in (-1/2, 1/2].
inline PsdCurve welch_psd(const CVec& samples, int window_len = 16384, int overlap_len = 4096,
                          double sample_rate_hz = 1.0) {
  if (window_len < 2) throw ConfigError("welch: window length must be >= 2");
  if (overlap_len < 0 || overlap_len >= window_len) throw ConfigError("welch: overlap must be in [0, window)");
  if (samples.size() < window_len) throw ConfigError("welch: input shorter than the window");
  const int W = window_len;
  std::vector<double> w(static_cast<std::size_t>(W));
  double wpow = 0.0;
  for (int n = 0; n < W; ++n) {
    w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(kTwoPi * n / (W - 1.0));
    wpow += w[static_cast<std::size_t>(n)] * w[static_cast<std::size_t>(n)];
  }
  const Eigen::Index step = W - overlap_len;
  const Eigen::Index segments = (samples.size() - W) / step + 1;
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(segments));
  detail::parallel_for(static_cast<std::size_t>(segments), [&](std::size_t s) {
    std::vector<cplx> buf(static_cast<std::size_t>(W));
    const Eigen::Index off = static_cast<Eigen::Index>(s) * step;
    for (int n = 0; n < W; ++n) buf[static_cast<std::size_t>(n)] = w[static_cast<std::size_t>(n)] * samples[off + n];
    detail::fft_inplace(buf);
    partial[s].resize(static_cast<std::size_t>(W));
    for (int i = 0; i < W; ++i) partial[s][static_cast<std::size_t>(i)] = std::norm(buf[static_cast<std::size_t>(i)]);
  });
  std::vector<double> acc(static_cast<std::size_t>(W), 0.0);
  for (const auto& p : partial)
    for (int i = 0; i < W; ++i) acc[static_cast<std::size_t>(i)] += p[static_cast<std::size_t>(i)];
  PsdCurve c;
  c.sample_rate_hz = sample_rate_hz;
  c.grid_density = 0;
  c.frequency.resize(static_cast<std::size_t>(W));
  c.values.resize(static_cast<std::size_t>(W));
  const double scale = 1.0 / (wpow * static_cast<double>(segments));
  for (int j = 0; j < W; ++j) {
    const int i = j - W / 2 + 1;
    const int idx = ((i % W) + W) % W;
    c.frequency[static_cast<std::size_t>(j)] = static_cast<double>(i) / W;
    c.values[static_cast<std::size_t>(j)] = acc[static_cast<std::size_t>(idx)] * scale;
  }
  return c;
}

/// Linear interpolation of a curve at normalized frequency f (periodic).
inline double interpolate(const PsdCurve& c, double f) {
  const std::size_t K = c.size();
  if (K == 0) throw ConfigError("interpolate: empty curve");
  const double pos = (wrap_frequency(f) - c.frequency.front()) * static_cast<double>(K);
  double base = std::floor(pos);
  const double t = pos - base;
  auto at = [&](long long i) { return c.values[static_cast<std::size_t>(((i % static_cast<long long>(K)) + K) % K)]; };
  const auto i0 = static_cast<long long>(base);
  return (1.0 - t) * at(i0) + t * at(i0 + 1);
}

// ---------------------------------------------------------------------------
// PAPR

/// Instantaneous-to-mean power ratio (dB) exceeded with the given probability.
inline double papr_ccdf(const CVec& stream, double clip_probability = 1e-3) {
  if (!(clip_probability > 0.0 && clip_probability < 1.0)) throw ConfigError("clip probability must be in (0, 1)");
  const auto n = static_cast<std::size_t>(stream.size());
  if (clip_probability * static_cast<double>(n) < 100.0)
    throw ConfigError("papr: need at least 100 samples above the clipping level");
  std::vector<double> p(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::norm(stream[static_cast<Eigen::Index>(i)]);
    mean += p[i];
  }
  mean /= static_cast<double>(n);
  if (!(mean > 0.0)) throw ConfigError("papr: zero-power stream");
  const auto rank = static_cast<std::size_t>(std::floor((1.0 - clip_probability) * static_cast<double>(n)));
  std::nth_element(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(std::min(rank, n - 1)), p.end());
  return 10.0 * std::log10(p[std::min(rank, n - 1)] / mean);
}

/// Fraction of samples whose power ratio exceeds each threshold (dB).
inline std::vector<double> papr_ccdf_curve(const CVec& stream, const std::vector<double>& thresholds_db) {
  const auto n = static_cast<double>(stream.size());
  if (n == 0) throw ConfigError("papr: empty stream");
  const double mean = stream.squaredNorm() / n;
  std::vector<double> out;
  for (double t : thresholds_db) {
    const double lvl = mean * std::pow(10.0, t / 10.0);
    double count = 0.0;
    for (Eigen::Index i = 0; i < stream.size(); ++i)
      if (std::norm(stream[i]) > lvl) count += 1.0;
    out.push_back(count / n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Masks

struct MaskSegment {
  int carrier_lo = 0;
  int carrier_hi = 0;   // may be < carrier_lo or >= N to wrap
  double depth_db = 0.0;
};

/// Piecewise dB limits relative to the passband peak.
struct SpectralMask {
  std::vector<MaskSegment> segments;

  void validate(int N) const {
    for (const auto& s : segments) {
      if (s.depth_db > 0.0) throw ConfigError("mask depth must be <= 0 dB");
      if (s.carrier_lo < 0 || s.carrier_lo >= N || s.carrier_hi < 0 || s.carrier_hi >= 2 * N)
        throw ConfigError("mask carrier index out of range");
    }
  }
};

/// Normalized frequency interval of a segment; wrapped when lo > hi.
inline std::pair<double, double> segment_interval(const MaskSegment& s, int N) {
  const auto c = to_circular({s.carrier_lo, s.carrier_hi}, N);
  const double lo = wrap_frequency(static_cast<double>(c.start) / N);
  const double hi = wrap_frequency(static_cast<double>(c.start + c.count - 1) / N);
  return {lo, hi};
}

inline bool in_interval(double f, std::pair<double, double> iv) {
  return iv.first <= iv.second ? (f >= iv.first && f <= iv.second) : (f >= iv.first || f <= iv.second);
}

struct SegmentReport {
  MaskSegment segment;
  double level_db = 0.0;   // worst normalized PSD inside the segment
  double margin_db = 0.0;  // depth - level; negative means violation
};

struct ComplianceReport {
  bool compliant = true;
  double reference = 0.0;  // passband peak used for normalization
  std::vector<SegmentReport> segments;
  std::vector<double> violating_frequencies;
};

/// Reference peak: largest PSD value outside every mask segment.
inline double passband_peak(const PsdCurve& psd, const SpectralMask& mask, int N) {
  std::vector<std::pair<double, double>> ivs;
  for (const auto& s : mask.segments) ivs.push_back(segment_interval(s, N));
  double peak = 0.0;
  for (std::size_t i = 0; i < psd.size(); ++i) {
    bool masked = false;
    for (const auto& iv : ivs) masked = masked || in_interval(psd.frequency[i], iv);
    if (!masked) peak = std::max(peak, psd.values[i]);
  }
  return peak > 0.0 ? peak : psd.peak();
}

inline ComplianceReport check_mask(const PsdCurve& psd, const SpectralMask& mask, int N,
                                   std::optional<double> reference = std::nullopt) {
  ComplianceReport r;
  r.reference = reference ? *reference : passband_peak(psd, mask, N);
  for (const auto& s : mask.segments) {
    const auto iv = segment_interval(s, N);
    double worst = 0.0;
    for (std::size_t i = 0; i < psd.size(); ++i) {
      if (!in_interval(psd.frequency[i], iv)) continue;
      const double v = psd.values[i] / r.reference;
      worst = std::max(worst, v);
      if (10.0 * std::log10(std::max(v, 1e-300)) > s.depth_db) r.violating_frequencies.push_back(psd.frequency[i]);
    }
    SegmentReport sr;
    sr.segment = s;
    sr.level_db = 10.0 * std::log10(std::max(worst, 1e-300));
    sr.margin_db = s.depth_db - sr.level_db;
    if (sr.margin_db < 0.0) r.compliant = false;
    r.segments.push_back(sr);
  }
  std::sort(r.violating_frequencies.begin(), r.violating_frequencies.end());
  r.violating_frequencies.erase(std::unique(r.violating_frequencies.begin(), r.violating_frequencies.end()),
                                r.violating_frequencies.end());
  return r;
}

// ---------------------------------------------------------------------------
// Nulling baseline

struct NullingResult {
  int n_off = 0;                 // carriers nulled per notch edge
  std::vector<int> nulled;       // sorted
  double level_db = 0.0;         // achieved in-notch level, normalized
  double loss_fraction = 0.0;    // nulled / |D|
};

/// Nulls data carriers symmetrically outward from both edges of the notch
/// [notch.first, notch.last] until the worst in-notch PSD, normalized to the
/// passband peak of the un-nulled baseline, is at or below target_db.
inline NullingResult nulling_baseline(const PulseDesign& baseline, const CarrierRange& notch, double target_db,
                                      int grid_density = 16) {
  const int N = baseline.config.n_carriers;
  PsdAccumulator acc(baseline, {}, grid_density);
  const auto notch_c = to_circular(notch, N);
  const double flo = wrap_frequency(static_cast<double>(notch_c.start) / N);
  const double fhi = wrap_frequency(static_cast<double>(notch_c.start + notch_c.count - 1) / N);
  const double ref = acc.curve().peak();
  auto level = [&] { return 10.0 * std::log10(std::max(acc.curve().max_over(flo, fhi) / ref, 1e-300)); };
  NullingResult r;
  r.level_db = level();
  const auto& data = baseline.plan.data;
  auto is_data = [&](int k) { return std::binary_search(data.begin(), data.end(), k); };
  int lower = notch_c.start, upper = notch_c.start + notch_c.count - 1;
  while (r.level_db > target_db) {
    // next data carrier on each side
    bool progressed = false;
    for (int side : {-1, +1}) {
      int& cursor = side < 0 ? lower : upper;
      for (int step = 0; step < N; ++step) {
        cursor += side;
        const int k = ((cursor % N) + N) % N;
        if (notch_c.contains(k, N)) break;
        if (is_data(k) && acc.is_active(k)) {
          acc.remove_carrier(k);
          r.nulled.push_back(k);
          progressed = true;
          break;
        }
      }
    }
    if (!progressed) throw ConfigError("nulling target unreachable even with all carriers nulled");
    ++r.n_off;
    r.level_db = level();
  }
  std::sort(r.nulled.begin(), r.nulled.end());
  r.loss_fraction = data.empty() ? 0.0 : static_cast<double>(r.nulled.size()) / static_cast<double>(data.size());
  return r;
}

struct LossReport {
  std::vector<int> nulled;
  int inband_cc = 0;
  int original_data = 0;    // |D| + inband CC
  double loss_percent = 0.0;
  ComplianceReport final_report;
};

/// Nulls data carriers nearest to each violating segment (both sides, nearest
/// first) until the mask is met; loss counts nulled carriers plus inband CC.
/// The reference defaults to the design's own passband peak before nulling.
inline LossReport loss_report(const PulseDesign& design, const SpectralMask& mask, int grid_density = 16,
                              std::optional<double> reference = std::nullopt) {
  const int N = design.config.n_carriers;
  mask.validate(N);
  PsdAccumulator acc(design, {}, grid_density);
  const double ref = reference ? *reference : passband_peak(acc.curve(), mask, N);
  LossReport r;
  r.inband_cc = static_cast<int>(design.plan.cc_inband.size());
  r.original_data = static_cast<int>(design.plan.data.size()) + r.inband_cc;
  const auto& data = design.plan.data;
  auto is_data = [&](int k) { return std::binary_search(data.begin(), data.end(), k); };
  std::vector<std::pair<int, int>> cursors;
  for (const auto& s : mask.segments) {
    const auto c = to_circular({s.carrier_lo, s.carrier_hi}, N);
    cursors.emplace_back(c.start, c.start + c.count - 1);
  }
  for (int guard = 0; guard < N; ++guard) {
    const auto rep = check_mask(acc.curve(), mask, N, ref);
    r.final_report = rep;
    if (rep.compliant) break;
    bool progressed = false;
    for (std::size_t si = 0; si < mask.segments.size(); ++si) {
      if (rep.segments[si].margin_db >= 0.0) continue;
      const auto c = to_circular({mask.segments[si].carrier_lo, mask.segments[si].carrier_hi}, N);
      for (int side : {-1, +1}) {
        int& cursor = side < 0 ? cursors[si].first : cursors[si].second;
        for (int step = 0; step < N; ++step) {
          cursor += side;
          const int k = ((cursor % N) + N) % N;
          if (c.contains(k, N)) break;
          if (!is_data(k)) continue;
          if (!acc.is_active(k)) continue;
          acc.remove_carrier(k);
          r.nulled.push_back(k);
          progressed = true;
          break;
        }
      }
    }
    if (!progressed) throw ConfigError("mask cannot be met even with all carriers nulled");
  }
  std::sort(r.nulled.begin(), r.nulled.end());
  r.loss_percent = r.original_data > 0
                       ? 100.0 * static_cast<double>(r.nulled.size() + static_cast<std::size_t>(r.inband_cc)) /
                             static_cast<double>(r.original_data)
                       : 0.0;
  return r;
}

}  // namespace gpshape
