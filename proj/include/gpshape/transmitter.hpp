#pragma once

// Conventional and generalized OFDM sample-stream synthesis.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gpshape/core_model.hpp"
#include "gpshape/detail/fft.hpp"
#include "gpshape/error.hpp"
#include "gpshape/pulse_designer.hpp"

namespace gpshape {

/// Modulating values of one symbol, aligned with the data carrier list.
struct SymbolFrame {
  CVec data;
};

namespace detail {

inline void check_frames(std::span<const SymbolFrame> frames, std::size_t n_data) {
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (static_cast<std::size_t>(frames[i].data.size()) != n_data)
      throw ConfigError("frame " + std::to_string(i) + " has " + std::to_string(frames[i].data.size()) +
                        " values, expected " + std::to_string(n_data));
}

inline CVec empty_stream(const OfdmConfig& config, std::size_t count) {
  return CVec::Zero(static_cast<Eigen::Index>(count) * config.symbol_period() + config.rolloff_len);
}

/// e^{j 2 pi m / N} for m = 0..N-1.
inline std::vector<cplx> phasor_table(int N) {
  std::vector<cplx> t(static_cast<std::size_t>(N));
  for (int m = 0; m < N; ++m) t[static_cast<std::size_t>(m)] = unit_phasor(1, m, N);
  return t;
}

/// Adds g(n) core((n - N_GI) mod N) at offset.
inline void add_extended(const OfdmConfig& config, const ShapingWindow& window, std::span<const cplx> core,
                         CVec& stream, Eigen::Index offset) {
  const int N = config.n_carriers, L = window.size();
  for (int n = 0; n < L; ++n) {
    int idx = (n - config.guard_len) % N;
    if (idx < 0) idx += N;
    stream[offset + n] += window.samples[static_cast<std::size_t>(n)] * core[static_cast<std::size_t>(idx)];
  }
}

}  // namespace detail

/// One N-point IDFT per symbol, cyclic extension, windowing and overlap-add.
inline CVec modulate_conventional(const OfdmConfig& config, const ShapingWindow& window,
                                  const std::vector<int>& data_carriers, std::span<const SymbolFrame> frames) {
  config.validate();
  detail::check_frames(frames, data_carriers.size());
  const int N = config.n_carriers;
  CVec stream = detail::empty_stream(config, frames.size());
  std::vector<cplx> core(static_cast<std::size_t>(N));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::fill(core.begin(), core.end(), cplx{});
    for (std::size_t j = 0; j < data_carriers.size(); ++j)
      core[static_cast<std::size_t>(data_carriers[j])] = frames[i].data[static_cast<Eigen::Index>(j)];
    detail::ifft_inplace(core);
    detail::add_extended(config, window, core, stream, static_cast<Eigen::Index>(i) * config.symbol_period());
  }
  return stream;
}

/// Reference path: every data carrier's pulse h_k (p_k outside D^h) times its
/// symbol, summed and overlap-added.
inline CVec modulate_generalized_direct(const PulseDesign& design, std::span<const SymbolFrame> frames) {
  const auto& config = design.config;
  const auto& data = design.plan.data;
  detail::check_frames(frames, data.size());
  const int N = config.n_carriers, L = config.pulse_len(), Ns = config.symbol_period();
  const auto table = detail::phasor_table(N);
  std::vector<CVec> generalized(data.size());
  for (std::size_t j = 0; j < data.size(); ++j)
    if (design.find(data[j])) generalized[j] = design.pulse(data[j]);
  CVec stream = detail::empty_stream(config, frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * Ns;
    for (std::size_t j = 0; j < data.size(); ++j) {
      const cplx s = frames[i].data[static_cast<Eigen::Index>(j)];
      if (s == cplx{}) continue;
      if (generalized[j].size() > 0) {
        stream.segment(off, L) += s * generalized[j];
        continue;
      }
      const long long k = data[j];
      for (int n = 0; n < L; ++n) {
        long long m = (k * (n - config.guard_len)) % N;
        if (m < 0) m += N;
        stream[off + n] += s * design.window.samples[static_cast<std::size_t>(n)] * table[static_cast<std::size_t>(m)];
      }
    }
  }
  return stream;
}

/// Efficient path: CC folded into the symbol IDFT, then the transition term of
/// the design kind.
inline CVec modulate_generalized_fast(const PulseDesign& design, std::span<const SymbolFrame> frames) {
  const auto& config = design.config;
  const auto& plan = design.plan;
  detail::check_frames(frames, plan.data.size());
  const int N = config.n_carriers, Ns = config.symbol_period();
  const int beta = config.rolloff_len;
  const auto cc = plan.cc();
  const CMat A = design.cc_matrix();
  const CMat Z = design.kind == TransitionKind::general || design.kind == TransitionKind::windowed
                     ? design.tail_matrix()
                     : CMat(0, 0);
  const auto [Xs, Xe] = design.harmonic_matrices();

  // position of each D^h carrier inside the data list
  std::vector<Eigen::Index> pos;
  for (const auto& s : design.carriers)
    pos.push_back(std::lower_bound(plan.data.begin(), plan.data.end(), s.carrier) - plan.data.begin());
  auto reduced_symbols = [&](std::size_t i) {
    CVec v(static_cast<Eigen::Index>(pos.size()));
    for (std::size_t j = 0; j < pos.size(); ++j) v[static_cast<Eigen::Index>(j)] = frames[i].data[pos[j]];
    return v;
  };

  CVec stream = detail::empty_stream(config, frames.size());
  std::vector<cplx> core(static_cast<std::size_t>(N));
  const auto rows = edge_rows(config);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * Ns;
    std::fill(core.begin(), core.end(), cplx{});
    for (std::size_t j = 0; j < plan.data.size(); ++j)
      core[static_cast<std::size_t>(plan.data[j])] = frames[i].data[static_cast<Eigen::Index>(j)];
    const CVec sh = reduced_symbols(i);
    if (!design.carriers.empty() && A.rows() > 0) {
      const CVec a = A * sh;
      for (std::size_t r = 0; r < cc.size(); ++r) core[static_cast<std::size_t>(cc[r])] += a[static_cast<Eigen::Index>(r)];
    }
    detail::ifft_inplace(core);
    detail::add_extended(config, design.window, core, stream, off);

    if (design.carriers.empty()) continue;
    if (design.kind == TransitionKind::general) {
      const CVec z = Z * sh;
      for (std::size_t r = 0; r < rows.size(); ++r) stream[off + rows[r]] += z[static_cast<Eigen::Index>(r)];
    } else if (design.kind == TransitionKind::windowed) {
      const CVec lam = Z * sh;
      std::vector<cplx> core2(static_cast<std::size_t>(N), cplx{});
      for (std::size_t q = 0; q < design.q_set.size(); ++q)
        core2[static_cast<std::size_t>(design.q_set[q])] += lam[static_cast<Eigen::Index>(q)];
      detail::ifft_inplace(core2);
      for (int n : rows) {
        int idx = (n - config.guard_len) % N;
        if (idx < 0) idx += N;
        stream[off + n] += design.edge_window[static_cast<std::size_t>(n)] * core2[static_cast<std::size_t>(idx)];
      }
    }
  }

  if (design.kind == TransitionKind::harmonic && !design.carriers.empty()) {
    // Boundary j joins the end edge of symbol j-1 and the start edge of symbol j.
    std::vector<cplx> edge(static_cast<std::size_t>(beta));
    for (std::size_t j = 0; j <= frames.size(); ++j) {
      CVec v = CVec::Zero(beta);
      if (j > 0) v += Xe * reduced_symbols(j - 1);
      if (j < frames.size()) v += Xs * reduced_symbols(j);
      for (int m = 0; m < beta; ++m) edge[static_cast<std::size_t>(m)] = v[m];
      detail::ifft_inplace(edge);
      const Eigen::Index off = static_cast<Eigen::Index>(j) * Ns;
      for (int m = 0; m < beta; ++m) stream[off + m] += edge[static_cast<std::size_t>(m)];
    }
  }
  return stream;
}

// ---------------------------------------------------------------------------
// Random symbols

enum class Constellation { qpsk };

inline Constellation constellation_from_string(const std::string& s) {
  if (s == "qpsk" || s == "QPSK") return Constellation::qpsk;
  throw ConfigError("unknown constellation '" + s + "'");
}

/// Unit-power QPSK frames, (+-1 +-j)/sqrt(2), reproducible from the seed.
inline std::vector<SymbolFrame> random_frames(std::size_t n_data, std::size_t n_symbols, std::uint64_t seed,
                                              Constellation constellation = Constellation::qpsk) {
  (void)constellation;
  std::mt19937_64 rng(seed);
  const double a = 1.0 / std::sqrt(2.0);
  std::vector<SymbolFrame> frames(n_symbols);
  for (auto& f : frames) {
    f.data.resize(static_cast<Eigen::Index>(n_data));
    std::uint64_t bits = 0;
    int left = 0;
    for (Eigen::Index j = 0; j < f.data.size(); ++j) {
      if (left < 2) {
        bits = rng();
        left = 64;
      }
      const double re = (bits & 1u) ? -a : a;
      const double im = (bits & 2u) ? -a : a;
      bits >>= 2;
      left -= 2;
      f.data[j] = cplx(re, im);
    }
  }
  return frames;
}

struct GeneratedStream {
  CVec samples;
  std::vector<SymbolFrame> frames;
};

inline GeneratedStream generate_stream(const PulseDesign& design, std::size_t n_symbols, std::uint64_t seed,
                                       Constellation constellation = Constellation::qpsk) {
  if (n_symbols < 1) throw ConfigError("generate_stream: n_symbols must be >= 1");
  GeneratedStream g;
  g.frames = random_frames(design.plan.data.size(), n_symbols, seed, constellation);
  g.samples = modulate_generalized_fast(design, g.frames);
  return g;
}

// ---------------------------------------------------------------------------
// Receiver used for loop-back checks

/// DFT over samples [i N_s + N_GI, i N_s + N_GI + N) divided by N, read at the
/// given carriers.
inline std::vector<CVec> demodulate(const OfdmConfig& config, const CVec& stream, const std::vector<int>& carriers,
                                    std::size_t n_symbols) {
  const int N = config.n_carriers;
  std::vector<CVec> out(n_symbols);
  std::vector<cplx> buf(static_cast<std::size_t>(N));
  for (std::size_t i = 0; i < n_symbols; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * config.symbol_period() + config.guard_len;
    if (off + N > stream.size()) throw ConfigError("demodulate: stream too short");
    for (int n = 0; n < N; ++n) buf[static_cast<std::size_t>(n)] = stream[off + n];
    detail::fft_inplace(buf);
    out[i].resize(static_cast<Eigen::Index>(carriers.size()));
    for (std::size_t j = 0; j < carriers.size(); ++j)
      out[i][static_cast<Eigen::Index>(j)] = buf[static_cast<std::size_t>(carriers[j])] / static_cast<double>(N);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Complexity

struct ComplexityReport {
  double baseline = 0.0;    // N-point IDFT + window
  double cc_term = 0.0;
  double transition_term = 0.0;

  double increment_percent() const { return baseline > 0.0 ? 100.0 * (cc_term + transition_term) / baseline : 0.0; }
};

inline double fft_products(int n) { return n > 1 ? 0.5 * n * std::log2(static_cast<double>(n)) : 0.0; }

/// Complex products per symbol. An n-point IDFT counts (n/2) log2 n; sparse
/// products count their nonzero entries.
inline ComplexityReport complexity_report(const PulseDesign& design) {
  ComplexityReport r;
  const int N = design.config.n_carriers, beta = design.config.rolloff_len;
  r.baseline = fft_products(N) + 2.0 * beta;
  const auto nh = static_cast<double>(design.carriers.size());
  for (const auto& s : design.carriers) r.cc_term += static_cast<double>(s.alpha.size());
  if (design.carriers.empty()) return r;
  switch (design.kind) {
    case TransitionKind::none: break;
    case TransitionKind::general: r.transition_term = 2.0 * beta * nh; break;
    case TransitionKind::windowed:
      r.transition_term = static_cast<double>(design.q_set.size()) * nh + fft_products(N) + 2.0 * beta;
      break;
    case TransitionKind::harmonic: {
      double nnz = 0.0;
      for (const auto& s : design.carriers) nnz += static_cast<double>(s.tail.size());
      r.transition_term = nnz + fft_products(beta);
      break;
    }
  }
  return r;
}

}  // namespace gpshape
