#pragma once

// Cancellation and transition bases, per-carrier optimization and the
// assembled pulse design used by the transmitters.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gpshape/band_energy.hpp"
#include "gpshape/core_model.hpp"
#include "gpshape/detail/parallel.hpp"
#include "gpshape/error.hpp"
#include "gpshape/solvers.hpp"

namespace gpshape {

enum class TransitionKind { none, general, windowed, harmonic };

inline std::string to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::none: return "none";
    case TransitionKind::general: return "general";
    case TransitionKind::windowed: return "windowed";
    case TransitionKind::harmonic: return "harmonic";
  }
  return "none";
}

inline TransitionKind transition_kind_from_string(const std::string& s) {
  if (s == "none") return TransitionKind::none;
  if (s == "general") return TransitionKind::general;
  if (s == "windowed") return TransitionKind::windowed;
  if (s == "harmonic") return TransitionKind::harmonic;
  throw ConfigError("unknown transition kind '" + s + "'");
}

/// Rows {0..beta-1} followed by {L-beta..L-1}.
inline std::vector<int> edge_rows(const OfdmConfig& config) {
  const int beta = config.rolloff_len, L = config.pulse_len();
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(2 * beta));
  for (int n = 0; n < beta; ++n) rows.push_back(n);
  for (int n = L - beta; n < L; ++n) rows.push_back(n);
  return rows;
}

/// Hamming window of length beta placed on both edges, zero elsewhere.
inline std::vector<double> hamming_edge_window(const OfdmConfig& config) {
  const int beta = config.rolloff_len, L = config.pulse_len();
  std::vector<double> u(static_cast<std::size_t>(L), 0.0);
  for (int m = 0; m < beta; ++m) {
    const double v = beta == 1 ? 1.0 : 0.54 - 0.46 * std::cos(kTwoPi * m / (beta - 1.0));
    u[static_cast<std::size_t>(m)] = v;
    u[static_cast<std::size_t>(L - beta + m)] = v;
  }
  return u;
}

struct TransitionBasis {
  TransitionKind kind = TransitionKind::none;
  CMat matrix;                     // L x M
  std::vector<double> edge_window; // windowed: u(n)
  std::vector<int> q_set;          // windowed: Q
  std::vector<int> harmonics;      // harmonic: beta-point indices, same on both edges

  Eigen::Index size() const noexcept { return matrix.cols(); }

  /// The nonzero rows (the 2 beta edge samples) as a 2beta x M block.
  CMat edge_block(const OfdmConfig& config) const {
    const auto rows = edge_rows(config);
    CMat e(static_cast<Eigen::Index>(rows.size()), matrix.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) e.row(static_cast<Eigen::Index>(i)) = matrix.row(rows[i]);
    return e;
  }
};

/// Columns are basic pulses of the given carriers.
inline CMat build_cancellation_basis(const OfdmConfig& config, const ShapingWindow& window,
                                     const std::vector<int>& cc_set, const CarrierPlan* plan = nullptr) {
  if (plan) {
    for (int c : cc_set)
      if (std::binary_search(plan->data.begin(), plan->data.end(), c))
        throw ConfigError("cancellation set contains data carrier " + std::to_string(c));
  }
  CMat P(window.size(), static_cast<Eigen::Index>(cc_set.size()));
  for (std::size_t j = 0; j < cc_set.size(); ++j)
    P.col(static_cast<Eigen::Index>(j)) = basic_pulse(config, window, cc_set[j]);
  return P;
}

struct TransitionRequest {
  TransitionKind kind = TransitionKind::none;
  std::vector<int> q_set;                  // windowed
  std::vector<double> edge_window;         // windowed; empty -> Hamming edges
  std::vector<int> harmonics;              // harmonic
};

inline TransitionBasis build_transition_basis(const OfdmConfig& config, const TransitionRequest& req) {
  TransitionBasis t;
  t.kind = req.kind;
  const int beta = config.rolloff_len, L = config.pulse_len(), N = config.n_carriers;
  if (req.kind == TransitionKind::none) {
    t.matrix.resize(L, 0);
    return t;
  }
  if (beta <= 0) throw ConfigError("transition pulses require rolloff_len > 0");
  switch (req.kind) {
    case TransitionKind::general: {
      t.matrix = CMat::Zero(L, 2 * beta);
      const auto rows = edge_rows(config);
      for (std::size_t j = 0; j < rows.size(); ++j) t.matrix(rows[j], static_cast<Eigen::Index>(j)) = 1.0;
      break;
    }
    case TransitionKind::windowed: {
      t.edge_window = req.edge_window.empty() ? hamming_edge_window(config) : req.edge_window;
      if (static_cast<int>(t.edge_window.size()) != L) throw ConfigError("edge window length must equal L");
      for (int n = beta; n < L - beta; ++n)
        if (t.edge_window[static_cast<std::size_t>(n)] != 0.0)
          throw ConfigError("edge window must be zero outside the two edges");
      t.q_set = req.q_set;
      for (int q : t.q_set)
        if (q < 0 || q >= N) throw ConfigError("windowed Q index out of range");
      t.matrix = CMat::Zero(L, static_cast<Eigen::Index>(t.q_set.size()));
      for (std::size_t j = 0; j < t.q_set.size(); ++j)
        for (int n : edge_rows(config))
          t.matrix(n, static_cast<Eigen::Index>(j)) =
              t.edge_window[static_cast<std::size_t>(n)] * unit_phasor(t.q_set[j], n - config.guard_len, N);
      break;
    }
    case TransitionKind::harmonic: {
      t.harmonics = req.harmonics;
      for (int q : t.harmonics)
        if (q < 0 || q >= beta) throw ConfigError("harmonic index out of range");
      const auto K = static_cast<Eigen::Index>(t.harmonics.size());
      t.matrix = CMat::Zero(L, 2 * K);
      for (Eigen::Index j = 0; j < K; ++j)
        for (int m = 0; m < beta; ++m) {
          const cplx w = unit_phasor(t.harmonics[static_cast<std::size_t>(j)], m, beta);
          t.matrix(m, j) = w;
          t.matrix(L - beta + m, K + j) = w;
        }
      break;
    }
    case TransitionKind::none: break;
  }
  return t;
}

/// The count harmonics q/beta closest (wrapped) to the band edge nearest to
/// carrier k, sorted ascending.
inline std::vector<int> select_harmonics(const OfdmConfig& config, const BandSet& band, int k, int count) {
  const int beta = config.rolloff_len;
  if (count < 1 || count > beta) throw ConfigError("harmonic count must be in [1, beta]");
  const double fk = wrap_frequency(static_cast<double>(k) / config.n_carriers);
  auto dist = [](double a, double b) {
    double d = std::abs(wrap_frequency(a - b));
    return d;
  };
  std::vector<double> edges;
  const auto& iv = band.intervals();
  for (std::size_t i = 0; i < iv.size(); ++i) {
    // split points at +-1/2 of a wrapped interval are not edges
    const bool lo_split = iv[i].lo == -0.5 && !iv.empty() && iv.back().hi == 0.5;
    const bool hi_split = iv[i].hi == 0.5 && !iv.empty() && iv.front().lo == -0.5;
    if (!lo_split) edges.push_back(iv[i].lo);
    if (!hi_split) edges.push_back(iv[i].hi);
  }
  if (edges.empty()) throw ConfigError("band has no edges to select harmonics for");
  double edge = edges.front();
  for (double e : edges)
    if (dist(e, fk) < dist(edge, fk)) edge = e;
  std::vector<int> q(static_cast<std::size_t>(beta));
  for (int i = 0; i < beta; ++i) q[static_cast<std::size_t>(i)] = i;
  std::stable_sort(q.begin(), q.end(), [&](int a, int b) {
    return dist(static_cast<double>(a) / beta, edge) < dist(static_cast<double>(b) / beta, edge);
  });
  q.resize(static_cast<std::size_t>(count));
  std::sort(q.begin(), q.end());
  return q;
}

// ---------------------------------------------------------------------------
// Design

struct TransitionSettings {
  TransitionKind kind = TransitionKind::none;
  std::vector<int> q_set;       // windowed; empty -> all CC of the plan
  int harmonics_per_edge = 3;   // harmonic
  bool fixed_smooth_ramp = false;  // no optimization, preset tail waveform
};

struct CarrierSolution {
  int carrier = 0;
  CVec alpha;   // aligned with plan.cc_of(carrier)
  CVec tail;    // transition coefficients
  std::vector<int> harmonics;  // harmonic kind only
  double energy_before = 0.0;
  double energy_after = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

struct PulseDesign {
  OfdmConfig config;
  CarrierPlan plan;
  ShapingWindow window;
  BandSet band;
  TransitionKind kind = TransitionKind::none;
  ConstraintSpec constraints;
  std::vector<int> q_set;              // windowed
  std::vector<double> edge_window;     // windowed
  std::vector<CarrierSolution> carriers;  // ordered as plan.reduced_data

  const CarrierSolution* find(int k) const {
    auto it = std::lower_bound(carriers.begin(), carriers.end(), k,
                               [](const CarrierSolution& s, int v) { return s.carrier < v; });
    return it != carriers.end() && it->carrier == k ? &*it : nullptr;
  }

  int beta() const noexcept { return config.rolloff_len; }

  /// Transition waveform of carrier k (length L), zero when kind is none.
  CVec transition_pulse(const CarrierSolution& s) const {
    const int L = config.pulse_len(), beta = config.rolloff_len, N = config.n_carriers;
    CVec t = CVec::Zero(L);
    switch (kind) {
      case TransitionKind::none: break;
      case TransitionKind::general:
        for (int m = 0; m < beta; ++m) {
          t[m] = s.tail[m];
          t[L - beta + m] = s.tail[beta + m];
        }
        break;
      case TransitionKind::windowed:
        for (int n : edge_rows(config)) {
          cplx acc{};
          for (std::size_t j = 0; j < q_set.size(); ++j)
            acc += s.tail[static_cast<Eigen::Index>(j)] * unit_phasor(q_set[j], n - config.guard_len, N);
          t[n] = edge_window[static_cast<std::size_t>(n)] * acc;
        }
        break;
      case TransitionKind::harmonic: {
        const auto K = static_cast<Eigen::Index>(s.harmonics.size());
        for (int m = 0; m < beta; ++m) {
          cplx a{}, b{};
          for (Eigen::Index j = 0; j < K; ++j) {
            const cplx w = unit_phasor(s.harmonics[static_cast<std::size_t>(j)], m, beta);
            a += s.tail[j] * w;
            b += s.tail[K + j] * w;
          }
          t[m] += a;
          t[L - beta + m] += b;
        }
        break;
      }
    }
    return t;
  }

  /// h_k = p_k + P_C(k) alpha_k + t_k; p_k for carriers outside D^h.
  CVec pulse(int k) const {
    CVec h = basic_pulse(config, window, k);
    const CarrierSolution* s = find(k);
    if (!s) return h;
    const auto& cc = plan.cc_of(k);
    for (std::size_t j = 0; j < cc.size(); ++j) {
      const cplx a = s->alpha[static_cast<Eigen::Index>(j)];
      if (a != cplx{}) h += a * basic_pulse(config, window, cc[j]);
    }
    h += transition_pulse(*s);
    return h;
  }

  /// |C| x |D^h|, rows ordered as plan.cc().
  CMat cc_matrix() const {
    const auto cc = plan.cc();
    CMat A = CMat::Zero(static_cast<Eigen::Index>(cc.size()), static_cast<Eigen::Index>(carriers.size()));
    for (std::size_t col = 0; col < carriers.size(); ++col) {
      const auto& set = plan.cc_of(carriers[col].carrier);
      for (std::size_t j = 0; j < set.size(); ++j) {
        const auto row = std::lower_bound(cc.begin(), cc.end(), set[j]) - cc.begin();
        A(row, static_cast<Eigen::Index>(col)) = carriers[col].alpha[static_cast<Eigen::Index>(j)];
      }
    }
    return A;
  }

  /// general: 2beta x |D^h| (Z); windowed: |Q| x |D^h| (Lambda).
  CMat tail_matrix() const {
    if (carriers.empty()) return CMat(0, 0);
    const Eigen::Index rows = carriers.front().tail.size();
    CMat Z(rows, static_cast<Eigen::Index>(carriers.size()));
    for (std::size_t col = 0; col < carriers.size(); ++col) Z.col(static_cast<Eigen::Index>(col)) = carriers[col].tail;
    return Z;
  }

  /// Harmonic kind: beta x |D^h| spectra of the start (Xi^s) and end (Xi^e) edges.
  std::pair<CMat, CMat> harmonic_matrices() const {
    const int beta = config.rolloff_len;
    CMat Xs = CMat::Zero(beta, static_cast<Eigen::Index>(carriers.size()));
    CMat Xe = Xs;
    if (kind != TransitionKind::harmonic) return {Xs, Xe};
    for (std::size_t col = 0; col < carriers.size(); ++col) {
      const auto& s = carriers[col];
      const auto K = static_cast<Eigen::Index>(s.harmonics.size());
      for (Eigen::Index j = 0; j < K; ++j) {
        Xs(s.harmonics[static_cast<std::size_t>(j)], static_cast<Eigen::Index>(col)) += s.tail[j];
        Xe(s.harmonics[static_cast<std::size_t>(j)], static_cast<Eigen::Index>(col)) += s.tail[K + j];
      }
    }
    return {Xs, Xe};
  }
};

/// Tail of the smooth-ramp preset: replaces g on both edges by
/// r(x) = x - sin(2 pi x)/(2 pi), x = (m+1)/(beta+1), mirrored at the end.
inline CVec smooth_ramp_tail(const OfdmConfig& config, const ShapingWindow& window, int k) {
  const int beta = config.rolloff_len, L = config.pulse_len(), N = config.n_carriers;
  CVec z(2 * beta);
  for (int m = 0; m < beta; ++m) {
    const double x = (m + 1.0) / (beta + 1.0);
    const double r = x - std::sin(kTwoPi * x) / kTwoPi;
    const int ns = m, ne = L - 1 - m;
    z[m] = (r - window.samples[static_cast<std::size_t>(ns)]) * unit_phasor(k, ns - config.guard_len, N);
    z[beta + (beta - 1 - m)] = (r - window.samples[static_cast<std::size_t>(ne)]) * unit_phasor(k, ne - config.guard_len, N);
  }
  return z;
}

struct DesignRequest {
  OfdmConfig config;
  CarrierPlan plan;
  ShapingWindow window;
  BandSet band;
  TransitionSettings transition;
  ConstraintSpec constraints;
  BoxOptions box_options;
};

namespace detail {

struct BasisGroup {
  std::vector<int> cc;
  std::vector<int> harmonics;
  CMat P;          // L x |cc|
  CMat T;          // L x M_T
  CMat T_edge;     // 2beta x M_T
  QuadraticModel model;
  std::vector<std::size_t> members;  // indices into reduced_data
};

}  // namespace detail

inline PulseDesign design_pulse_set(const DesignRequest& req) {
  req.config.validate();
  req.plan.validate();
  req.constraints.validate();
  if (req.band.empty()) throw ConfigError("design_pulse_set: empty band");
  if (req.window.size() != req.config.pulse_len()) throw ConfigError("design_pulse_set: window length mismatch");
  const auto& config = req.config;
  const int L = config.pulse_len();

  PulseDesign d;
  d.config = config;
  d.plan = req.plan;
  d.window = req.window;
  d.band = req.band;
  d.kind = req.transition.kind;
  d.constraints = req.constraints;
  if (d.kind != TransitionKind::none && config.rolloff_len <= 0)
    throw ConfigError("transition pulses require rolloff_len > 0");
  if (d.kind == TransitionKind::windowed) {
    d.q_set = req.transition.q_set.empty() ? req.plan.cc() : req.transition.q_set;
    d.edge_window = hamming_edge_window(config);
  }
  const auto& reduced = req.plan.reduced_data;
  if (reduced.empty()) return d;

  const BandMatrix phi(req.band, L);

  if (req.transition.fixed_smooth_ramp) {
    if (d.kind != TransitionKind::general) throw ConfigError("fixed smooth ramp requires general transition kind");
    for (int k : reduced) {
      CarrierSolution s;
      s.carrier = k;
      s.alpha = CVec::Zero(static_cast<Eigen::Index>(req.plan.cc_of(k).size()));
      s.tail = smooth_ramp_tail(config, req.window, k);
      d.carriers.push_back(std::move(s));
    }
    detail::parallel_for(d.carriers.size(), [&](std::size_t i) {
      auto& s = d.carriers[i];
      s.energy_before = band_energy(basic_pulse(config, req.window, s.carrier), phi);
      s.energy_after = band_energy(d.pulse(s.carrier), phi);
    });
    return d;
  }

  // Group carriers sharing C(k) and transition basis.
  std::map<std::pair<std::vector<int>, std::vector<int>>, std::size_t> index;
  std::vector<detail::BasisGroup> groups;
  std::vector<std::size_t> group_of(reduced.size());
  for (std::size_t i = 0; i < reduced.size(); ++i) {
    const int k = reduced[i];
    std::vector<int> harm;
    if (d.kind == TransitionKind::harmonic)
      harm = select_harmonics(config, req.band, k, req.transition.harmonics_per_edge);
    auto key = std::make_pair(req.plan.cc_of(k), harm);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      detail::BasisGroup g;
      g.cc = key.first;
      g.harmonics = key.second;
      groups.push_back(std::move(g));
    }
    group_of[i] = it->second;
    groups[it->second].members.push_back(i);
  }

  const auto rows = edge_rows(config);
  const CMat phi_edge = phi.submatrix(rows, rows);
  detail::parallel_for(groups.size(), [&](std::size_t gi) {
    auto& g = groups[gi];
    g.P = build_cancellation_basis(config, req.window, g.cc, &req.plan);
    TransitionRequest tr;
    tr.kind = d.kind;
    tr.q_set = d.q_set;
    tr.edge_window = d.edge_window;
    tr.harmonics = g.harmonics;
    const TransitionBasis tb = build_transition_basis(config, tr);
    g.T = tb.matrix;
    g.T_edge = tb.edge_block(config);
    const Eigen::Index nc = g.P.cols(), nt = g.T.cols();
    CMat G(nc + nt, nc + nt);
    const CMat phiP = phi.multiply(g.P);
    G.topLeftCorner(nc, nc) = g.P.adjoint() * phiP;
    if (nt > 0) {
      CMat phiP_edge(static_cast<Eigen::Index>(rows.size()), nc);
      for (std::size_t r = 0; r < rows.size(); ++r) phiP_edge.row(static_cast<Eigen::Index>(r)) = phiP.row(rows[r]);
      G.bottomLeftCorner(nt, nc) = g.T_edge.adjoint() * phiP_edge;
      G.topRightCorner(nc, nt) = G.bottomLeftCorner(nt, nc).adjoint();
      G.bottomRightCorner(nt, nt) = g.T_edge.adjoint() * phi_edge * g.T_edge;
    }
    g.model = QuadraticModel(std::move(G));
    g.model.prepare(req.constraints.kind);
  });

  d.carriers.resize(reduced.size());
  detail::parallel_for(reduced.size(), [&](std::size_t i) {
    const int k = reduced[i];
    const auto& g = groups[group_of[i]];
    const CVec p = basic_pulse(config, req.window, k);
    const CVec phip = phi.multiply(p);
    const Eigen::Index nc = g.P.cols(), nt = g.T.cols();
    CVec b(nc + nt);
    b.head(nc) = g.P.adjoint() * phip;
    if (nt > 0) {
      CVec phip_edge(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) phip_edge[static_cast<Eigen::Index>(r)] = phip[rows[r]];
      b.tail(nt) = g.T_edge.adjoint() * phip_edge;
    }
    SolveResult res;
    try {
      switch (req.constraints.kind) {
        case ConstraintKind::unconstrained: res.gamma = g.model.solve_unconstrained(b); break;
        case ConstraintKind::box: {
          RVec bounds(nc + nt);
          bounds.head(nc).setConstant(req.constraints.eps_cc);
          bounds.tail(nt).setConstant(req.constraints.eps_t);
          res = g.model.solve_box(b, bounds, req.box_options);
          break;
        }
        case ConstraintKind::l2_ball: res = g.model.solve_ball(b, req.constraints.eps_norm); break;
      }
    } catch (const SolverError& e) {
      throw SolverError("carrier " + std::to_string(k) + ": " + e.what(), e.residual(), e.iterations());
    }
    CarrierSolution s;
    s.carrier = k;
    s.alpha = res.gamma.head(nc);
    s.tail = res.gamma.tail(nt);
    s.harmonics = g.harmonics;
    s.iterations = res.iterations;
    s.residual = res.residual;
    s.energy_before = std::max(0.0, p.dot(phip).real());
    d.carriers[i] = std::move(s);
  });
  detail::parallel_for(d.carriers.size(), [&](std::size_t i) {
    auto& s = d.carriers[i];
    s.energy_after = band_energy(d.pulse(s.carrier), phi);
  });
  return d;
}

// ---------------------------------------------------------------------------
// Presets of earlier schemes expressed in this framework.

enum class PresetName { yamaguchi, brandes, sahin_fixed_windows, mahmoud_ast };

inline PresetName preset_from_string(const std::string& s) {
  if (s == "yamaguchi") return PresetName::yamaguchi;
  if (s == "brandes") return PresetName::brandes;
  if (s == "sahin_fixed_windows" || s == "sahin") return PresetName::sahin_fixed_windows;
  if (s == "mahmoud_ast" || s == "mahmoud") return PresetName::mahmoud_ast;
  throw ConfigError("unknown preset '" + s + "'");
}

inline std::string to_string(PresetName p) {
  switch (p) {
    case PresetName::yamaguchi: return "yamaguchi";
    case PresetName::brandes: return "brandes";
    case PresetName::sahin_fixed_windows: return "sahin_fixed_windows";
    case PresetName::mahmoud_ast: return "mahmoud_ast";
  }
  return "yamaguchi";
}

struct PresetFragment {
  PlanRules rules;
  TransitionSettings transition;
  ConstraintSpec constraints;
};

inline PresetFragment preset(PresetName name) {
  PresetFragment f;
  f.rules.cc_policy = CcPolicy::all;
  switch (name) {
    case PresetName::yamaguchi:
      f.rules.cc_inband_per_edge = 0;
      f.rules.cc_outband_per_edge = 1;
      f.transition.kind = TransitionKind::none;
      f.constraints.kind = ConstraintKind::unconstrained;
      break;
    case PresetName::brandes:
      f.rules.cc_inband_per_edge = 2;
      f.rules.cc_outband_per_edge = 0;
      f.transition.kind = TransitionKind::none;
      f.constraints.kind = ConstraintKind::l2_ball;
      break;
    case PresetName::sahin_fixed_windows:
      f.rules.cc_inband_per_edge = 0;
      f.rules.cc_outband_per_edge = 0;
      f.transition.kind = TransitionKind::general;
      f.transition.fixed_smooth_ramp = true;
      f.constraints.kind = ConstraintKind::unconstrained;
      break;
    case PresetName::mahmoud_ast:
      f.rules.cc_inband_per_edge = 0;
      f.rules.cc_outband_per_edge = 0;
      f.transition.kind = TransitionKind::general;
      f.constraints.kind = ConstraintKind::l2_ball;
      break;
  }
  return f;
}

}  // namespace gpshape
