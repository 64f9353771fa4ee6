#pragma once

// OFDM parameters, carrier bookkeeping, shaping windows, basic pulses and the
// cyclic extension shared by the designer, the transmitters and the analyzers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gpshape/error.hpp"

namespace gpshape {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// e^{j 2 pi k n / N}
inline cplx unit_phasor(long long k, long long n, long long N) {
  long long r = (k * n) % N;
  if (r < 0) r += N;
  const double a = kTwoPi * static_cast<double>(r) / static_cast<double>(N);
  return {std::cos(a), std::sin(a)};
}

/// Maps x into (-1/2, 1/2].
inline double wrap_frequency(double x) {
  double r = x - std::floor(x);  // [0, 1)
  return r > 0.5 ? r - 1.0 : r;
}

// ---------------------------------------------------------------------------
// OfdmConfig

struct OfdmConfig {
  int n_carriers = 0;
  int guard_len = 0;
  int rolloff_len = 0;
  double sample_rate_hz = 1.0;

  int symbol_period() const noexcept { return n_carriers + guard_len; }
  int pulse_len() const noexcept { return symbol_period() + rolloff_len; }
  double carrier_spacing_hz() const noexcept { return sample_rate_hz / n_carriers; }

  void validate() const {
    if (n_carriers <= 0) throw ConfigError("n_carriers must be positive");
    if (guard_len < 0) throw ConfigError("guard_len must be non-negative");
    if (rolloff_len < 0) throw ConfigError("rolloff_len must be non-negative");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("sample_rate_hz must be positive");
    if (rolloff_len > 0 && rolloff_len >= guard_len)
      throw ConfigError("rolloff_len must be smaller than guard_len (receiver window would see smoothed samples)");
    if (guard_len > n_carriers) throw ConfigError("guard_len larger than n_carriers is not supported");
  }
};

/// True iff a channel of length channel_len keeps the effective cyclic prefix
/// (N_GI - beta) intact.
inline bool validate_guard(const OfdmConfig& config, int channel_len) {
  return channel_len < config.guard_len - config.rolloff_len;
}

// ---------------------------------------------------------------------------
// ShapingWindow

enum class WindowKind { rectangular, raised_cosine };

inline std::string to_string(WindowKind k) {
  return k == WindowKind::rectangular ? "rectangular" : "raised_cosine";
}

inline WindowKind window_kind_from_string(const std::string& s) {
  if (s == "rectangular") return WindowKind::rectangular;
  if (s == "raised_cosine" || s == "rc") return WindowKind::raised_cosine;
  throw ConfigError("unknown window kind '" + s + "'");
}

struct ShapingWindow {
  WindowKind kind = WindowKind::rectangular;
  std::vector<double> samples;  // g(n), n = 0..L-1

  int size() const noexcept { return static_cast<int>(samples.size()); }
};

/// Rising RC ramp of length beta, ramp(n) = (1 - cos(pi (n+1)/(beta+1))) / 2.
/// No sample is exactly 0 or 1 and ramp(n) + ramp(beta-1-n) = 1.
inline std::vector<double> raised_cosine_ramp(int beta) {
  std::vector<double> r(static_cast<std::size_t>(beta));
  for (int n = 0; n < beta; ++n)
    r[static_cast<std::size_t>(n)] = 0.5 * (1.0 - std::cos(std::numbers::pi * (n + 1) / (beta + 1.0)));
  return r;
}

inline ShapingWindow build_shaping_window(const OfdmConfig& config, WindowKind kind) {
  config.validate();
  const int beta = config.rolloff_len;
  if (kind == WindowKind::rectangular && beta > 0)
    throw ConfigError("rectangular window requires rolloff_len = 0");
  ShapingWindow w;
  w.kind = kind;
  const int L = config.pulse_len();
  w.samples.assign(static_cast<std::size_t>(L), 1.0);
  if (kind == WindowKind::raised_cosine && beta > 0) {
    const auto ramp = raised_cosine_ramp(beta);
    for (int n = 0; n < beta; ++n) {
      w.samples[static_cast<std::size_t>(n)] = ramp[static_cast<std::size_t>(n)];
      w.samples[static_cast<std::size_t>(L - 1 - n)] = ramp[static_cast<std::size_t>(n)];
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Pulses and cyclic extension

/// p_k(n) = g(n) e^{j 2 pi k (n - N_GI) / N}
inline CVec basic_pulse(const OfdmConfig& config, const ShapingWindow& window, int k) {
  const int N = config.n_carriers;
  if (k < 0 || k >= N) throw ConfigError("carrier index " + std::to_string(k) + " out of range");
  const int L = window.size();
  CVec p(L);
  for (int n = 0; n < L; ++n)
    p[n] = window.samples[static_cast<std::size_t>(n)] * unit_phasor(k, n - config.guard_len, N);
  return p;
}

/// output(n) = g(n) core((n - N_GI) mod N), i.e. G * Delta_{N_GI,beta} * core.
inline CVec cyclic_extend_and_window(const OfdmConfig& config, const ShapingWindow& window,
                                     std::span<const cplx> core) {
  const int N = config.n_carriers;
  if (static_cast<int>(core.size()) != N)
    throw ConfigError("core length " + std::to_string(core.size()) + " does not match N=" + std::to_string(N));
  const int L = window.size();
  CVec out(L);
  for (int n = 0; n < L; ++n) {
    int idx = (n - config.guard_len) % N;
    if (idx < 0) idx += N;
    out[n] = window.samples[static_cast<std::size_t>(n)] * core[static_cast<std::size_t>(idx)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Carrier ranges and band sets

/// Inclusive carrier-index range. last may exceed N-1 (or be smaller than
/// first) to express a range wrapping past carrier N-1.
struct CarrierRange {
  int first = 0;
  int last = 0;
};

/// Canonical form of a range on the carrier circle: start in [0,N), count in [1,N].
struct CircularRange {
  int start = 0;
  int count = 0;

  int first() const noexcept { return start; }
  int last(int N) const noexcept { return (start + count - 1) % N; }
  bool contains(int k, int N) const noexcept {
    int off = (k - start) % N;
    if (off < 0) off += N;
    return off < count;
  }
};

inline CircularRange to_circular(const CarrierRange& r, int N) {
  auto mod = [N](int v) { return ((v % N) + N) % N; };
  int span = r.last - r.first;
  if (span < 0) span = mod(r.last) - mod(r.first) + (mod(r.last) < mod(r.first) ? N : 0);
  if (span >= N) return {0, N};
  return {mod(r.first), span + 1};
}

/// Merges overlapping or index-adjacent ranges on the carrier circle.
inline std::vector<CircularRange> merge_circular(std::vector<CircularRange> ranges, int N) {
  if (ranges.empty()) return ranges;
  for (const auto& r : ranges)
    if (r.count >= N) return {CircularRange{0, N}};
  std::sort(ranges.begin(), ranges.end(), [](auto& a, auto& b) { return a.start < b.start; });
  std::vector<CircularRange> out;
  for (const auto& r : ranges) {
    if (!out.empty() && r.start <= out.back().start + out.back().count) {
      int end = std::max(out.back().start + out.back().count, r.start + r.count);
      out.back().count = end - out.back().start;
    } else {
      out.push_back(r);
    }
  }
  // The last range may wrap into the first ones.
  while (out.size() > 1) {
    auto& tail = out.back();
    auto& head = out.front();
    int tail_end = tail.start + tail.count;  // may exceed N
    if (tail_end - N < head.start) break;
    int end = std::max(tail_end, head.start + head.count + N);
    tail.count = end - tail.start;
    out.erase(out.begin());
  }
  for (auto& r : out)
    if (r.count >= N) return {CircularRange{0, N}};
  return out;
}

struct FrequencyInterval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const noexcept { return hi - lo; }
};

/// Union of disjoint normalized-frequency intervals inside [-1/2, 1/2].
class BandSet {
 public:
  BandSet() = default;

  /// Intervals are clipped, split at +-1/2, sorted and merged.
  static BandSet from_intervals(std::vector<FrequencyInterval> raw) {
    std::vector<FrequencyInterval> pieces;
    for (auto iv : raw) {
      if (!(iv.hi > iv.lo)) throw ConfigError("band interval must satisfy lo < hi");
      if (iv.hi - iv.lo >= 1.0) {
        pieces.push_back({-0.5, 0.5});
        continue;
      }
      double lo = wrap_frequency(iv.lo);
      if (lo == 0.5) lo = -0.5;
      double hi = lo + (iv.hi - iv.lo);
      if (hi > 0.5) {
        pieces.push_back({lo, 0.5});
        pieces.push_back({-0.5, hi - 1.0});
      } else {
        pieces.push_back({lo, hi});
      }
    }
    std::sort(pieces.begin(), pieces.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
    BandSet b;
    for (const auto& p : pieces) {
      if (!b.intervals_.empty() && p.lo <= b.intervals_.back().hi)
        b.intervals_.back().hi = std::max(b.intervals_.back().hi, p.hi);
      else
        b.intervals_.push_back(p);
    }
    if (b.measure() <= 0.0) throw ConfigError("band set has zero measure");
    return b;
  }

  const std::vector<FrequencyInterval>& intervals() const noexcept { return intervals_; }
  bool empty() const noexcept { return intervals_.empty(); }

  double measure() const noexcept {
    double m = 0.0;
    for (const auto& iv : intervals_) m += iv.width();
    return std::min(m, 1.0);
  }

  bool contains(double f) const noexcept {
    f = wrap_frequency(f);
    for (const auto& iv : intervals_)
      if (f >= iv.lo && f <= iv.hi) return true;
    // -1/2 and 1/2 are the same point.
    if (f == 0.5 && !intervals_.empty() && intervals_.front().lo == -0.5) return true;
    return false;
  }

  bool operator==(const BandSet& o) const noexcept {
    if (intervals_.size() != o.intervals_.size()) return false;
    for (std::size_t i = 0; i < intervals_.size(); ++i)
      if (intervals_[i].lo != o.intervals_[i].lo || intervals_[i].hi != o.intervals_[i].hi) return false;
    return true;
  }

 private:
  std::vector<FrequencyInterval> intervals_;
};

/// Frequency interval covered by a carrier range: [(a - guard)/N, (b + guard)/N].
inline FrequencyInterval carrier_range_interval(const CircularRange& r, int N, double guard_fraction) {
  const double lo = (r.start - guard_fraction) / N;
  const double hi = (r.start + r.count - 1 + guard_fraction) / N;
  return {lo, hi};
}

/// Band edges sit guard_fraction carrier spacings beyond the edge carriers.
/// A single-carrier range needs guard_fraction > 0.
inline BandSet band_from_carriers(const OfdmConfig& config, const std::vector<CarrierRange>& ranges,
                                  double guard_fraction = 0.5) {
  if (ranges.empty()) throw ConfigError("band_from_carriers: empty range list");
  if (guard_fraction < 0.0) throw ConfigError("guard_fraction must be non-negative");
  const int N = config.n_carriers;
  std::vector<CircularRange> circ;
  for (const auto& r : ranges) circ.push_back(to_circular(r, N));
  circ = merge_circular(circ, N);
  std::vector<FrequencyInterval> raw;
  for (const auto& c : circ) {
    if (c.count >= N) {
      raw.push_back({-0.5, 0.5});
      continue;
    }
    auto iv = carrier_range_interval(c, N, guard_fraction);
    if (!(iv.hi > iv.lo))
      throw ConfigError("carrier range [" + std::to_string(c.start) + "] has zero width; use guard_fraction > 0");
    raw.push_back(iv);
  }
  return BandSet::from_intervals(std::move(raw));
}

// ---------------------------------------------------------------------------
// Carrier plan

enum class CcPolicy { all, nearest_edge, nearest_band, owning_edges };

inline std::string to_string(CcPolicy p) {
  switch (p) {
    case CcPolicy::all: return "all";
    case CcPolicy::nearest_edge: return "nearest_edge";
    case CcPolicy::nearest_band: return "nearest_band";
    case CcPolicy::owning_edges: return "owning_edges";
  }
  return "all";
}

inline CcPolicy cc_policy_from_string(const std::string& s) {
  if (s == "all") return CcPolicy::all;
  if (s == "nearest_edge") return CcPolicy::nearest_edge;
  if (s == "nearest_band") return CcPolicy::nearest_band;
  if (s == "owning_edges") return CcPolicy::owning_edges;
  throw ConfigError("unknown cc policy '" + s + "'");
}

/// One side of a band: the boundary carrier inside the band and the outward
/// direction (+1 above the band, -1 below).
struct BandEdge {
  int band = 0;          // index into CarrierPlan::bands
  int boundary = 0;      // band carrier adjacent to the data region
  int direction = 1;     // +1: data lies at boundary+1.., -1: at boundary-1..
  std::vector<int> cc;   // inband + outband CC of this edge
};

struct CarrierPlan {
  int n_carriers = 0;
  std::vector<CircularRange> bands;  // merged carrier ranges of the notched bands
  std::vector<int> data;             // D, sorted
  std::vector<int> cc_inband;        // sorted
  std::vector<int> cc_outband;       // sorted
  std::vector<int> reduced_data;     // D^h, sorted, subset of data
  std::map<int, std::vector<int>> per_carrier_cc;  // k in D^h -> C(k), sorted
  std::vector<BandEdge> edges;

  std::vector<int> cc() const {
    std::vector<int> c;
    std::merge(cc_inband.begin(), cc_inband.end(), cc_outband.begin(), cc_outband.end(), std::back_inserter(c));
    return c;
  }

  std::vector<int> null_carriers() const {
    std::vector<char> used(static_cast<std::size_t>(n_carriers), 0);
    for (int k : data) used[static_cast<std::size_t>(k)] = 1;
    for (int k : cc_inband) used[static_cast<std::size_t>(k)] = 1;
    for (int k : cc_outband) used[static_cast<std::size_t>(k)] = 1;
    std::vector<int> out;
    for (int k = 0; k < n_carriers; ++k)
      if (!used[static_cast<std::size_t>(k)]) out.push_back(k);
    return out;
  }

  bool is_reduced(int k) const { return std::binary_search(reduced_data.begin(), reduced_data.end(), k); }

  const std::vector<int>& cc_of(int k) const {
    static const std::vector<int> empty;
    auto it = per_carrier_cc.find(k);
    return it == per_carrier_cc.end() ? empty : it->second;
  }

  void validate() const {
    const int N = n_carriers;
    if (N <= 0) throw ConfigError("carrier plan: n_carriers must be positive");
    auto check_sorted = [&](const std::vector<int>& v, const char* name) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0 || v[i] >= N) throw ConfigError(std::string("carrier plan: ") + name + " index out of range");
        if (i > 0 && v[i] <= v[i - 1]) throw ConfigError(std::string("carrier plan: ") + name + " not sorted/unique");
      }
    };
    check_sorted(data, "data");
    check_sorted(cc_inband, "cc_inband");
    check_sorted(cc_outband, "cc_outband");
    check_sorted(reduced_data, "reduced_data");
    std::vector<int> seen(static_cast<std::size_t>(N), 0);
    for (int k : data) ++seen[static_cast<std::size_t>(k)];
    for (int k : cc_inband) ++seen[static_cast<std::size_t>(k)];
    for (int k : cc_outband) ++seen[static_cast<std::size_t>(k)];
    for (int k = 0; k < N; ++k)
      if (seen[static_cast<std::size_t>(k)] > 1)
        throw ConfigError("carrier plan: carrier " + std::to_string(k) + " is both data and cancellation");
    for (int k : reduced_data)
      if (!std::binary_search(data.begin(), data.end(), k))
        throw ConfigError("carrier plan: reduced carrier " + std::to_string(k) + " is not a data carrier");
    const auto c = cc();
    for (const auto& [k, set] : per_carrier_cc) {
      if (!is_reduced(k)) throw ConfigError("carrier plan: C(k) given for non-reduced carrier " + std::to_string(k));
      for (int x : set)
        if (!std::binary_search(c.begin(), c.end(), x))
          throw ConfigError("carrier plan: C(" + std::to_string(k) + ") contains non-cancellation carrier");
    }
  }
};

/// Wrapped carrier distance on the circle.
inline int circular_distance(int a, int b, int N) {
  int d = std::abs(a - b) % N;
  return std::min(d, N - d);
}

enum class ReducedSetMode { none, nearest, all };

struct PlanRules {
  int cc_inband_per_edge = 2;   // N_CC^D
  int cc_outband_per_edge = 1;  // N_CC^B
  ReducedSetMode reduced_mode = ReducedSetMode::nearest;
  int reduced_per_edge = 9;     // N_D
  CcPolicy cc_policy = CcPolicy::all;
};

/// Builds D, C, D^h and C(k) from the notched carrier ranges. Data carriers are
/// all carriers outside the bands. At each band edge the N_CC^B band carriers
/// next to the edge become outband CC and the N_CC^D data carriers next to the
/// edge become inband CC; D^h collects the N_D remaining data carriers nearest
/// to each edge.
inline CarrierPlan plan_carriers(const OfdmConfig& config, const std::vector<CarrierRange>& band_ranges,
                                 const PlanRules& rules) {
  const int N = config.n_carriers;
  if (rules.cc_inband_per_edge < 0 || rules.cc_outband_per_edge < 0 || rules.reduced_per_edge < 0)
    throw ConfigError("plan rules must be non-negative");
  CarrierPlan plan;
  plan.n_carriers = N;
  std::vector<CircularRange> circ;
  for (const auto& r : band_ranges) {
    for (int v : {r.first, r.last})
      if (v < 0 || v >= 2 * N) throw ConfigError("band carrier index " + std::to_string(v) + " out of range");
    circ.push_back(to_circular(r, N));
  }
  plan.bands = merge_circular(circ, N);

  enum Role : char { data = 0, band = 1, cc_in = 2, cc_out = 3 };
  std::vector<char> role(static_cast<std::size_t>(N), data);
  auto at = [&](int k) -> char& { return role[static_cast<std::size_t>(((k % N) + N) % N)]; };
  for (const auto& b : plan.bands)
    for (int i = 0; i < b.count; ++i) at(b.start + i) = band;

  for (int bi = 0; bi < static_cast<int>(plan.bands.size()); ++bi) {
    const auto& b = plan.bands[static_cast<std::size_t>(bi)];
    if (b.count >= N) continue;
    // lower edge: data below b.start, upper edge: data above the last carrier.
    for (int dir : {-1, +1}) {
      BandEdge e;
      e.band = bi;
      e.direction = dir;
      e.boundary = dir < 0 ? b.start : (b.start + b.count - 1) % N;
      // outband CC: walk inward from the boundary, at most half the band so the
      // two edges of a narrow notch do not collide.
      const int max_out = dir < 0 ? (b.count + 1) / 2 : b.count / 2;
      for (int i = 0; i < std::min(rules.cc_outband_per_edge, max_out); ++i) {
        int k = ((e.boundary - dir * i) % N + N) % N;
        if (at(k) == band) {
          at(k) = cc_out;
          e.cc.push_back(k);
        }
      }
      // inband CC: walk outward over data carriers.
      int placed = 0;
      for (int i = 1; i < N && placed < rules.cc_inband_per_edge; ++i) {
        int k = ((e.boundary + dir * i) % N + N) % N;
        if (at(k) == band) break;
        if (at(k) == data) {
          at(k) = cc_in;
          e.cc.push_back(k);
          ++placed;
        }
      }
      std::sort(e.cc.begin(), e.cc.end());
      plan.edges.push_back(std::move(e));
    }
  }

  for (int k = 0; k < N; ++k) {
    switch (role[static_cast<std::size_t>(k)]) {
      case data: plan.data.push_back(k); break;
      case cc_in: plan.cc_inband.push_back(k); break;
      case cc_out: plan.cc_outband.push_back(k); break;
      default: break;
    }
  }

  // nearest edge of every data carrier, measured from the band boundary carrier
  auto nearest_edge = [&](int k) {
    int best = -1, best_d = N + 1;
    for (int i = 0; i < static_cast<int>(plan.edges.size()); ++i) {
      int d = circular_distance(k, plan.edges[static_cast<std::size_t>(i)].boundary, N);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };

  std::set<int> reduced;
  std::map<int, std::vector<int>> owners;
  if (rules.reduced_mode == ReducedSetMode::all) {
    reduced.insert(plan.data.begin(), plan.data.end());
  } else if (rules.reduced_mode == ReducedSetMode::nearest) {
    for (int ei = 0; ei < static_cast<int>(plan.edges.size()); ++ei) {
      const auto& e = plan.edges[static_cast<std::size_t>(ei)];
      int taken = 0;
      for (int i = 1; i < N && taken < rules.reduced_per_edge; ++i) {
        int k = ((e.boundary + e.direction * i) % N + N) % N;
        char r = role[static_cast<std::size_t>(k)];
        if (r == band || r == cc_out) break;
        if (r == data) {
          reduced.insert(k);
          owners[k].push_back(ei);
          ++taken;
        }
      }
    }
  }
  plan.reduced_data.assign(reduced.begin(), reduced.end());

  const auto all_cc = plan.cc();
  for (int k : plan.reduced_data) {
    std::vector<int> set;
    switch (rules.cc_policy) {
      case CcPolicy::all: set = all_cc; break;
      case CcPolicy::nearest_edge: {
        int e = nearest_edge(k);
        if (e >= 0) set = plan.edges[static_cast<std::size_t>(e)].cc;
        break;
      }
      case CcPolicy::nearest_band: {
        int e = nearest_edge(k);
        if (e >= 0) {
          const int band_idx = plan.edges[static_cast<std::size_t>(e)].band;
          for (const auto& edge : plan.edges)
            if (edge.band == band_idx) set.insert(set.end(), edge.cc.begin(), edge.cc.end());
        }
        break;
      }
      case CcPolicy::owning_edges: {
        auto it = owners.find(k);
        std::vector<int> edges = it != owners.end() ? it->second : std::vector<int>{};
        if (edges.empty() && nearest_edge(k) >= 0) edges.push_back(nearest_edge(k));
        for (int e : edges) {
          const auto& cc = plan.edges[static_cast<std::size_t>(e)].cc;
          set.insert(set.end(), cc.begin(), cc.end());
        }
        break;
      }
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    plan.per_carrier_cc[k] = std::move(set);
  }
  plan.validate();
  return plan;
}

/// Plan without cancellation carriers or generalized pulses: D = complement of the bands.
inline CarrierPlan conventional_plan(const OfdmConfig& config, const std::vector<CarrierRange>& band_ranges) {
  PlanRules rules;
  rules.cc_inband_per_edge = 0;
  rules.cc_outband_per_edge = 0;
  rules.reduced_mode = ReducedSetMode::none;
  return plan_carriers(config, band_ranges, rules);
}

}  // namespace gpshape
