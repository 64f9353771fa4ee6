#pragma once

// Scenario files: everything needed to build a plan, a design and the
// analyses, loaded from JSON with defaults filled in.

#include "json.hpp"

#include <cstdint>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gpshape/core_model.hpp"
#include "gpshape/error.hpp"
#include "gpshape/pulse_designer.hpp"
#include "gpshape/solvers.hpp"
#include "gpshape/spectrum_analysis.hpp"

namespace gpshape {

enum class ReducedSetSource { nearest, mask, none, all };

inline std::string to_string(ReducedSetSource s) {
  switch (s) {
    case ReducedSetSource::nearest: return "nearest";
    case ReducedSetSource::mask: return "mask";
    case ReducedSetSource::none: return "none";
    case ReducedSetSource::all: return "all";
  }
  return "nearest";
}

inline ReducedSetSource reduced_set_from_string(const std::string& s) {
  if (s == "nearest") return ReducedSetSource::nearest;
  if (s == "mask") return ReducedSetSource::mask;
  if (s == "none") return ReducedSetSource::none;
  if (s == "all") return ReducedSetSource::all;
  throw ConfigError("unknown reduced_set '" + s + "'");
}

struct Scenario {
  std::string name = "scenario";
  OfdmConfig config;
  WindowKind window = WindowKind::raised_cosine;
  std::vector<CarrierRange> notches;
  double band_guard_fraction = 0.0;

  std::optional<std::string> preset;
  int cc_inband_per_edge = 2;
  int cc_outband_per_edge = 1;
  ReducedSetSource reduced_set = ReducedSetSource::nearest;
  int reduced_per_edge = 9;
  CcPolicy cc_policy = CcPolicy::all;

  TransitionSettings transition;
  ConstraintSpec constraints;

  SpectralMask mask;

  int grid_density = 16;
  std::optional<CarrierRange> probe_notch;  // notch used by nulloff
  int welch_window = 16384;
  int welch_overlap = 4096;
  double clip_probability = 1e-3;

  std::size_t symbols = 2000;
  std::uint64_t seed = 1;
  Constellation constellation = Constellation::qpsk;

  void validate() const {
    config.validate();
    if (notches.empty()) throw ConfigError("scenario '" + name + "': at least one notch is required");
    const int N = config.n_carriers;
    for (const auto& r : notches)
      for (int v : {r.first, r.last})
        if (v < 0 || v >= 2 * N) throw ConfigError("scenario '" + name + "': notch carrier " + std::to_string(v) + " out of range");
    if (band_guard_fraction < 0.0) throw ConfigError("band_guard_fraction must be non-negative");
    if (cc_inband_per_edge < 0 || cc_outband_per_edge < 0 || reduced_per_edge < 0)
      throw ConfigError("plan counts must be non-negative");
    if (transition.kind == TransitionKind::harmonic &&
        (transition.harmonics_per_edge < 1 || transition.harmonics_per_edge > config.rolloff_len))
      throw ConfigError("harmonics_per_edge must be in [1, rolloff_len]");
    if (transition.kind != TransitionKind::none && config.rolloff_len <= 0)
      throw ConfigError("transition pulses require rolloff_len > 0");
    for (int q : transition.q_set)
      if (q < 0 || q >= N) throw ConfigError("q_set index out of range");
    constraints.validate();
    mask.validate(N);
    if (reduced_set == ReducedSetSource::mask && mask.segments.empty())
      throw ConfigError("reduced_set 'mask' needs a mask");
    if (grid_density < 4) throw ConfigError("grid_density must be >= 4");
    if (welch_window < 2 || welch_overlap < 0 || welch_overlap >= welch_window)
      throw ConfigError("invalid Welch parameters");
    if (!(clip_probability > 0.0 && clip_probability < 1.0)) throw ConfigError("clip_probability must be in (0, 1)");
    if (symbols < 1) throw ConfigError("symbols must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

inline CarrierRange range_from_json(const nlohmann::json& j) {
  if (j.is_array() && j.size() == 2) return {j[0].get<int>(), j[1].get<int>()};
  if (j.is_object()) return {j.at("first").get<int>(), j.at("last").get<int>()};
  if (j.is_number_integer()) return {j.get<int>(), j.get<int>()};
  throw ConfigError("carrier range must be [first, last]");
}

}  // namespace detail

inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["ofdm"] = {{"n_carriers", s.config.n_carriers},
               {"guard_len", s.config.guard_len},
               {"rolloff_len", s.config.rolloff_len},
               {"sample_rate_hz", s.config.sample_rate_hz}};
  j["window"] = to_string(s.window);
  j["notches"] = nlohmann::json::array();
  for (const auto& r : s.notches) j["notches"].push_back({r.first, r.last});
  j["band_guard_fraction"] = s.band_guard_fraction;
  j["preset"] = s.preset ? nlohmann::json(*s.preset) : nlohmann::json(nullptr);
  j["plan"] = {{"cc_inband_per_edge", s.cc_inband_per_edge},
               {"cc_outband_per_edge", s.cc_outband_per_edge},
               {"reduced_set", to_string(s.reduced_set)},
               {"reduced_per_edge", s.reduced_per_edge},
               {"cc_policy", to_string(s.cc_policy)}};
  j["transition"] = {{"kind", to_string(s.transition.kind)},
                     {"harmonics_per_edge", s.transition.harmonics_per_edge},
                     {"q_set", s.transition.q_set},
                     {"fixed_smooth_ramp", s.transition.fixed_smooth_ramp}};
  j["constraints"] = {{"kind", to_string(s.constraints.kind)},
                      {"eps_cc", s.constraints.eps_cc},
                      {"eps_t", s.constraints.eps_t},
                      {"eps_norm", s.constraints.eps_norm}};
  j["mask"] = nlohmann::json::array();
  for (const auto& m : s.mask.segments)
    j["mask"].push_back({{"carrier_lo", m.carrier_lo}, {"carrier_hi", m.carrier_hi}, {"depth_db", m.depth_db}});
  j["analysis"] = {{"grid_density", s.grid_density},
                   {"welch_window", s.welch_window},
                   {"welch_overlap", s.welch_overlap},
                   {"clip_probability", s.clip_probability}};
  j["analysis"]["probe_notch"] =
      s.probe_notch ? nlohmann::json({s.probe_notch->first, s.probe_notch->last}) : nlohmann::json(nullptr);
  j["simulation"] = {{"symbols", s.symbols}, {"seed", s.seed}, {"constellation", "qpsk"}};
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::get_or;
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  Scenario s;
  s.name = get_or<std::string>(j, "name", s.name);
  if (!j.contains("ofdm")) throw ConfigError("scenario: missing 'ofdm'");
  const auto& o = j.at("ofdm");
  for (const char* key : {"n_carriers", "guard_len", "rolloff_len"})
    if (!o.contains(key)) throw ConfigError(std::string("scenario: missing ofdm.") + key);
  s.config.n_carriers = o.at("n_carriers").get<int>();
  s.config.guard_len = o.at("guard_len").get<int>();
  s.config.rolloff_len = o.at("rolloff_len").get<int>();
  s.config.sample_rate_hz = get_or<double>(o, "sample_rate_hz", 1.0);
  s.window = window_kind_from_string(get_or<std::string>(j, "window", s.config.rolloff_len > 0 ? "raised_cosine" : "rectangular"));
  if (!j.contains("notches") || !j.at("notches").is_array()) throw ConfigError("scenario: missing 'notches' list");
  for (const auto& r : j.at("notches")) s.notches.push_back(detail::range_from_json(r));
  s.band_guard_fraction = get_or<double>(j, "band_guard_fraction", s.band_guard_fraction);

  // A preset fills plan, transition and constraint fields; explicit fields win.
  if (j.contains("preset") && !j.at("preset").is_null()) {
    s.preset = j.at("preset").get<std::string>();
    const auto f = preset(preset_from_string(*s.preset));
    s.cc_inband_per_edge = f.rules.cc_inband_per_edge;
    s.cc_outband_per_edge = f.rules.cc_outband_per_edge;
    s.cc_policy = f.rules.cc_policy;
    s.transition = f.transition;
    s.constraints = f.constraints;
  }
  if (j.contains("plan")) {
    const auto& p = j.at("plan");
    s.cc_inband_per_edge = get_or<int>(p, "cc_inband_per_edge", s.cc_inband_per_edge);
    s.cc_outband_per_edge = get_or<int>(p, "cc_outband_per_edge", s.cc_outband_per_edge);
    s.reduced_per_edge = get_or<int>(p, "reduced_per_edge", s.reduced_per_edge);
    s.cc_policy = cc_policy_from_string(get_or<std::string>(p, "cc_policy", to_string(s.cc_policy)));
    if (p.contains("reduced_set")) s.reduced_set = reduced_set_from_string(p.at("reduced_set").get<std::string>());
  }
  if (j.contains("mask")) {
    for (const auto& m : j.at("mask")) {
      MaskSegment seg;
      seg.carrier_lo = m.at("carrier_lo").get<int>();
      seg.carrier_hi = m.at("carrier_hi").get<int>();
      seg.depth_db = m.at("depth_db").get<double>();
      s.mask.segments.push_back(seg);
    }
    if (!(j.contains("plan") && j.at("plan").contains("reduced_set")) && !s.mask.segments.empty())
      s.reduced_set = ReducedSetSource::mask;
  }
  if (j.contains("transition")) {
    const auto& t = j.at("transition");
    s.transition.kind = transition_kind_from_string(get_or<std::string>(t, "kind", to_string(s.transition.kind)));
    s.transition.harmonics_per_edge = get_or<int>(t, "harmonics_per_edge", s.transition.harmonics_per_edge);
    s.transition.q_set = get_or<std::vector<int>>(t, "q_set", s.transition.q_set);
    s.transition.fixed_smooth_ramp = get_or<bool>(t, "fixed_smooth_ramp", s.transition.fixed_smooth_ramp);
  }
  if (j.contains("constraints")) {
    const auto& c = j.at("constraints");
    s.constraints.kind = constraint_kind_from_string(get_or<std::string>(c, "kind", to_string(s.constraints.kind)));
    s.constraints.eps_cc = get_or<double>(c, "eps_cc", s.constraints.eps_cc);
    s.constraints.eps_t = get_or<double>(c, "eps_t", s.constraints.eps_t);
    s.constraints.eps_norm = get_or<double>(c, "eps_norm", s.constraints.eps_norm);
  }
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    s.grid_density = get_or<int>(a, "grid_density", s.grid_density);
    s.welch_window = get_or<int>(a, "welch_window", s.welch_window);
    s.welch_overlap = get_or<int>(a, "welch_overlap", s.welch_overlap);
    s.clip_probability = get_or<double>(a, "clip_probability", s.clip_probability);
    if (a.contains("probe_notch") && !a.at("probe_notch").is_null())
      s.probe_notch = detail::range_from_json(a.at("probe_notch"));
  }
  if (j.contains("simulation")) {
    const auto& m = j.at("simulation");
    s.symbols = get_or<std::size_t>(m, "symbols", s.symbols);
    s.seed = get_or<std::uint64_t>(m, "seed", s.seed);
    s.constellation = constellation_from_string(get_or<std::string>(m, "constellation", "qpsk"));
  }
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario '" + path + "': " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Building blocks from a scenario

inline ShapingWindow scenario_window(const Scenario& s) { return build_shaping_window(s.config, s.window); }

inline BandSet scenario_band(const Scenario& s) {
  return band_from_carriers(s.config, s.notches, s.band_guard_fraction);
}

/// Plan of the RC (or rectangular) baseline: no CC, no generalized pulses.
inline CarrierPlan scenario_baseline_plan(const Scenario& s) { return conventional_plan(s.config, s.notches); }

/// Data carriers whose conventional pulse alone violates the mask in some segment.
inline std::vector<int> mask_exceeding_carriers(const Scenario& s, const CarrierPlan& plan, const ShapingWindow& window) {
  const int N = s.config.n_carriers;
  // Reference: passband peak of the conventional PSD with this plan's data set.
  const auto conv = conventional_design(s.config, window, plan);
  PsdAccumulator acc(conv, {}, s.grid_density);
  const double ref = passband_peak(acc.curve(), s.mask, N);
  const int K = s.grid_density * N;
  CVec g(window.size());
  for (int n = 0; n < window.size(); ++n) g[n] = window.samples[static_cast<std::size_t>(n)];
  const auto gp = detail::power_spectrum(g, K);
  std::vector<int> out;
  for (int k : plan.data) {
    bool exceeds = false;
    for (const auto& seg : s.mask.segments) {
      const double limit = ref * std::pow(10.0, seg.depth_db / 10.0) * s.config.symbol_period();
      const auto c = to_circular({seg.carrier_lo, seg.carrier_hi}, N);
      for (int i = 0; i < (c.count - 1) * s.grid_density + 1 && !exceeds; ++i) {
        const int bin = ((c.start * s.grid_density + i - k * s.grid_density) % K + K) % K;
        exceeds = gp[static_cast<std::size_t>(bin)] > limit;
      }
      if (exceeds) break;
    }
    if (exceeds) out.push_back(k);
  }
  return out;
}

inline CarrierPlan scenario_plan(const Scenario& s, const ShapingWindow& window) {
  PlanRules rules;
  rules.cc_inband_per_edge = s.cc_inband_per_edge;
  rules.cc_outband_per_edge = s.cc_outband_per_edge;
  rules.reduced_per_edge = s.reduced_per_edge;
  rules.cc_policy = s.cc_policy;
  switch (s.reduced_set) {
    case ReducedSetSource::nearest: rules.reduced_mode = ReducedSetMode::nearest; break;
    case ReducedSetSource::none: rules.reduced_mode = ReducedSetMode::none; break;
    case ReducedSetSource::all: rules.reduced_mode = ReducedSetMode::all; break;
    case ReducedSetSource::mask: rules.reduced_mode = ReducedSetMode::all; break;
  }
  CarrierPlan plan = plan_carriers(s.config, s.notches, rules);
  if (s.reduced_set == ReducedSetSource::mask) {
    const auto keep = mask_exceeding_carriers(s, plan, window);
    std::map<int, std::vector<int>> cc;
    for (int k : keep) cc[k] = plan.per_carrier_cc.at(k);
    plan.reduced_data = keep;
    plan.per_carrier_cc = std::move(cc);
  }
  plan.validate();
  return plan;
}

inline DesignRequest scenario_design_request(const Scenario& s) {
  DesignRequest r;
  r.config = s.config;
  r.window = scenario_window(s);
  r.plan = scenario_plan(s, r.window);
  r.band = scenario_band(s);
  r.transition = s.transition;
  r.constraints = s.constraints;
  return r;
}

inline PulseDesign design_scenario(const Scenario& s) { return design_pulse_set(scenario_design_request(s)); }

inline PulseDesign scenario_baseline(const Scenario& s) {
  const auto w = scenario_window(s);
  return conventional_design(s.config, w, scenario_baseline_plan(s), scenario_band(s));
}

/// Zero-depth mask covering every notch; its passband peak is the PSD reference.
inline SpectralMask notch_mask(const Scenario& s) {
  SpectralMask m;
  for (const auto& r : s.notches) {
    const auto c = to_circular(r, s.config.n_carriers);
    m.segments.push_back({c.start, c.start + c.count - 1, 0.0});
  }
  return m;
}

inline double passband_reference(const PsdCurve& psd, const Scenario& s) {
  return passband_peak(psd, notch_mask(s), s.config.n_carriers);
}

/// Passband peak of the conventional baseline; the common 0 dB level of all
/// designs of a scenario.
inline double baseline_reference(const Scenario& s) {
  return passband_reference(analytic_psd(scenario_baseline(s), {}, s.grid_density), s);
}

/// Worst PSD inside a notch relative to reference, in dB.
inline double notch_level_db(const PsdCurve& psd, const Scenario& s, const CarrierRange& notch, double reference) {
  const int N = s.config.n_carriers;
  const auto c = to_circular(notch, N);
  const double lo = wrap_frequency(static_cast<double>(c.start) / N);
  const double hi = wrap_frequency(static_cast<double>(c.start + c.count - 1) / N);
  return 10.0 * std::log10(std::max(psd.max_over(lo, hi) / reference, 1e-300));
}

/// The notch used for nulling comparisons: probe_notch, else the narrowest notch.
inline CarrierRange scenario_probe_notch(const Scenario& s) {
  if (s.probe_notch) return *s.probe_notch;
  const int N = s.config.n_carriers;
  CarrierRange best = s.notches.front();
  int best_count = N + 1;
  for (const auto& r : s.notches) {
    const auto c = to_circular(r, N);
    if (c.count < best_count) {
      best_count = c.count;
      best = r;
    }
  }
  return best;
}

}  // namespace gpshape
