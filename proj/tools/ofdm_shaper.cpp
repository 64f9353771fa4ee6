// ofdm-shaper: scenario-driven front end for the gpshape library.

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "gpshape/gpshape.hpp"

namespace fs = std::filesystem;
using namespace gpshape;

namespace {

struct Options {
  std::vector<std::string> scenarios;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> grid_density;
  bool plot = false;
};

// Files written by the running command; removed if the command fails.
class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

  fs::path path(const std::string& name) {
    if (!dir_ready_) {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
      dir_ready_ = true;
    }
    auto p = dir_ / name;
    written_.push_back(p);
    return p;
  }

  void text(const std::string& name, const std::string& content) { write_text(path(name), content); }
  void json(const std::string& name, const nlohmann::json& j) { text(name, j.dump(2) + "\n"); }

  void discard() {
    for (const auto& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    written_.clear();
  }

 private:
  fs::path dir_;
  bool dir_ready_ = false;
  std::vector<fs::path> written_;
};

Scenario load(const std::string& path, const Options& opt) {
  Scenario s = load_scenario(path);
  if (opt.seed) s.seed = *opt.seed;
  if (opt.grid_density) s.grid_density = *opt.grid_density;
  s.validate();
  return s;
}

PsdCurve normalized_psd(const PulseDesign& d, const Scenario& s, double reference) {
  return analytic_psd(d, {}, s.grid_density).normalized_to(reference);
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void plot_psd(Artifacts& out, const std::string& name, const std::vector<std::pair<std::string, PsdCurve>>& curves) {
  std::vector<PlotSeries> series;
  for (const auto& [label, c] : curves) {
    PlotSeries ps;
    ps.label = label;
    const auto db = c.db();
    for (std::size_t i = 0; i < c.size(); ++i) {
      ps.x.push_back(c.frequency[i] * c.sample_rate_hz / 1e6);
      ps.y.push_back(db[i]);
    }
    series.push_back(std::move(ps));
  }
  out.text(name, svg_plot(series, "frequency [MHz]", -120.0, 5.0));
}

int cmd_design(const Scenario& s, Artifacts& out) {
  const auto d = design_scenario(s);
  out.json("resolved_scenario.json", to_json(s));
  out.json("design.json", to_json(d));
  std::string table = "carrier,energy_before,energy_after,reduction_db,iterations,residual\n";
  for (const auto& c : d.carriers) {
    const double red = 10.0 * std::log10(std::max(c.energy_before, 1e-300) / std::max(c.energy_after, 1e-300));
    table += std::to_string(c.carrier) + "," + detail::format_double(c.energy_before, 10) + "," +
             detail::format_double(c.energy_after, 10) + "," + fixed(red, 3) + "," + std::to_string(c.iterations) +
             "," + detail::format_double(c.residual, 4) + "\n";
  }
  out.text("energy.csv", table);
  std::cout << "designed " << d.carriers.size() << " generalized pulses (" << to_string(d.kind) << ", "
            << d.plan.cc().size() << " cancellation carriers)\n";
  return 0;
}

int cmd_psd(const Scenario& s, Artifacts& out, bool plot) {
  const auto d = design_scenario(s);
  const auto base = scenario_baseline(s);
  const double r0 = baseline_reference(s);
  const auto psd = normalized_psd(d, s, r0);
  const auto ref = normalized_psd(base, s, r0);
  out.json("resolved_scenario.json", to_json(s));
  out.text("psd.csv", psd_csv(psd));
  out.text("psd_baseline.csv", psd_csv(ref));
  out.json("psd.json", to_json(psd));
  if (plot) plot_psd(out, "psd.svg", {{"baseline", ref}, {s.name, psd}});
  for (const auto& n : s.notches)
    std::cout << "notch [" << n.first << ", " << n.last << "]: " << fixed(notch_level_db(psd, s, n, 1.0), 2)
              << " dB (baseline " << fixed(notch_level_db(ref, s, n, 1.0), 2) << " dB)\n";
  return 0;
}

int cmd_simulate(const Scenario& s, Artifacts& out, bool plot) {
  const auto d = design_scenario(s);
  const auto g = generate_stream(d, s.symbols, s.seed, s.constellation);
  const double r0 = baseline_reference(s);
  const auto welch = welch_psd(g.samples, s.welch_window, s.welch_overlap, s.config.sample_rate_hz).normalized_to(r0);
  out.json("resolved_scenario.json", to_json(s));
  write_stream(out.path("stream.bin"), g.samples);
  out.json("stream.json", stream_sidecar(s.config, s.seed, s.symbols, g.samples.size()));
  out.text("welch.csv", psd_csv(welch));
  if (plot) plot_psd(out, "welch.svg", {{"welch", welch}, {"analytic", normalized_psd(d, s, r0)}});
  std::cout << "wrote " << g.samples.size() << " samples (" << s.symbols << " symbols)\n";
  return 0;
}

int cmd_papr(const Scenario& s, Artifacts& out, bool plot) {
  const auto d = design_scenario(s);
  const auto g = generate_stream(d, s.symbols, s.seed, s.constellation);
  const double papr = papr_ccdf(g.samples, s.clip_probability);
  std::vector<double> thr;
  for (int i = 0; i <= 130; ++i) thr.push_back(i * 0.1);
  const auto ccdf = papr_ccdf_curve(g.samples, thr);
  std::string csv = "threshold_db,probability\n";
  for (std::size_t i = 0; i < thr.size(); ++i)
    csv += fixed(thr[i], 1) + "," + detail::format_double(ccdf[i], 10) + "\n";
  out.json("resolved_scenario.json", to_json(s));
  out.text("ccdf.csv", csv);
  out.json("papr.json", {{"clip_probability", s.clip_probability}, {"papr_db", papr}, {"samples", g.samples.size()}});
  if (plot) {
    PlotSeries ps{"ccdf", {}, {}};
    for (std::size_t i = 0; i < thr.size(); ++i) {
      ps.x.push_back(thr[i]);
      ps.y.push_back(10.0 * std::log10(std::max(ccdf[i], 1e-12)));
    }
    out.text("ccdf.svg", svg_plot({ps}, "PAPR threshold [dB]", -60.0, 0.0));
  }
  std::cout << "PAPR at " << s.clip_probability << ": " << fixed(papr, 3) << " dB\n";
  return 0;
}

nlohmann::json compliance_json(const ComplianceReport& r) {
  auto segs = nlohmann::json::array();
  for (const auto& sr : r.segments)
    segs.push_back({{"carrier_lo", sr.segment.carrier_lo},
                    {"carrier_hi", sr.segment.carrier_hi},
                    {"depth_db", sr.segment.depth_db},
                    {"level_db", sr.level_db},
                    {"margin_db", sr.margin_db}});
  return {{"compliant", r.compliant}, {"reference", r.reference}, {"segments", segs}};
}

int cmd_comply(const Scenario& s, Artifacts& out) {
  if (s.mask.segments.empty()) throw ConfigError("comply: scenario has no mask");
  const auto d = design_scenario(s);
  const double r0 = baseline_reference(s);
  const auto psd = analytic_psd(d, {}, s.grid_density);
  const auto report = check_mask(psd, s.mask, s.config.n_carriers, r0);
  const auto loss = loss_report(d, s.mask, s.grid_density, r0);
  out.json("resolved_scenario.json", to_json(s));
  out.json("compliance.json", {{"initial", compliance_json(report)},
                               {"after_nulling", compliance_json(loss.final_report)},
                               {"nulled", loss.nulled},
                               {"inband_cc", loss.inband_cc},
                               {"original_data", loss.original_data},
                               {"loss_percent", loss.loss_percent}});
  std::cout << "segment        depth    level   margin\n";
  for (const auto& sr : report.segments) {
    char line[128];
    std::snprintf(line, sizeof line, "%5d-%-5d %7.2f %8.2f %8.2f\n", sr.segment.carrier_lo, sr.segment.carrier_hi,
                  sr.segment.depth_db, sr.level_db, sr.margin_db);
    std::cout << line;
  }
  std::cout << (report.compliant ? "compliant" : "not compliant") << "; nulled " << loss.nulled.size()
            << " carriers, loss " << fixed(loss.loss_percent, 2) << " %\n";
  return 0;
}

struct CompareRow {
  std::string name;
  double loss = 0.0;
  double complexity = 0.0;
  double papr_inc = 0.0;
};

int cmd_compare(const std::vector<Scenario>& list, Artifacts& out) {
  std::vector<CompareRow> rows;
  for (const auto& s : list) {
    if (s.mask.segments.empty()) throw ConfigError("compare: scenario '" + s.name + "' has no mask");
    const auto d = design_scenario(s);
    const auto base = scenario_baseline(s);
    CompareRow r;
    r.name = s.name;
    r.loss = loss_report(d, s.mask, s.grid_density, baseline_reference(s)).loss_percent;
    r.complexity = complexity_report(d).increment_percent();
    const auto gs = generate_stream(d, s.symbols, s.seed, s.constellation);
    const auto gb = generate_stream(base, s.symbols, s.seed, s.constellation);
    r.papr_inc = papr_ccdf(gs.samples, s.clip_probability) - papr_ccdf(gb.samples, s.clip_probability);
    rows.push_back(r);
  }
  std::string csv = "scenario,loss_percent,products_increment_percent,papr_increment_db\n";
  for (const auto& r : rows)
    csv += r.name + "," + fixed(r.loss, 4) + "," + fixed(r.complexity, 4) + "," + fixed(r.papr_inc, 4) + "\n";
  out.text("compare.csv", csv);
  char line[256];
  std::snprintf(line, sizeof line, "%-34s", "");
  std::cout << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%16s", r.name.c_str());
    std::cout << line;
  }
  std::cout << "\n";
  auto row = [&](const char* label, auto get) {
    std::snprintf(line, sizeof line, "%-34s", label);
    std::cout << line;
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "%16.2f", get(r));
      std::cout << line;
    }
    std::cout << "\n";
  };
  row("data-carrier loss [%]", [](const CompareRow& r) { return r.loss; });
  row("products/symbol increment [%]", [](const CompareRow& r) { return r.complexity; });
  row("PAPR increment [dB]", [](const CompareRow& r) { return r.papr_inc; });
  return 0;
}

int cmd_nulloff(const Scenario& s, Artifacts& out) {
  const auto d = design_scenario(s);
  const auto base = scenario_baseline(s);
  const auto notch = scenario_probe_notch(s);
  const double level = notch_level_db(analytic_psd(d, {}, s.grid_density), s, notch, baseline_reference(s));
  const auto r = nulling_baseline(base, notch, level, s.grid_density);
  out.json("resolved_scenario.json", to_json(s));
  out.json("nulloff.json", {{"notch", {notch.first, notch.last}},
                            {"design_level_db", level},
                            {"n_off", r.n_off},
                            {"nulled", r.nulled},
                            {"baseline_level_db", r.level_db},
                            {"loss_fraction", r.loss_fraction}});
  std::cout << "design level " << fixed(level, 2) << " dB in [" << notch.first << ", " << notch.last
            << "]; nulling needs N_off = " << r.n_off << " per edge\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized-pulse OFDM shaping: design, synthesis and spectral analysis"};
  app.require_subcommand(1, 1);
  Options opt;
  auto common = [&](CLI::App* sub, bool many) {
    if (many)
      sub->add_option("--scenario", opt.scenarios, "scenario JSON file (repeatable)")->required();
    else
      sub->add_option("--scenario", opt.scenarios, "scenario JSON file")->required()->expected(1);
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "override the simulation seed");
    sub->add_option("--grid-density", opt.grid_density, "PSD grid points per carrier spacing");
    sub->add_flag("--plot", opt.plot, "also write SVG plots");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"design", "optimize generalized pulses; write design.json and energy.csv"},
      {"psd", "analytic PSD of the design and of the conventional baseline"},
      {"simulate", "synthesize a sample stream and its Welch PSD"},
      {"papr", "PAPR CCDF of a synthesized stream"},
      {"comply", "mask compliance and carrier-loss report"},
      {"compare", "loss, complexity and PAPR table over several scenarios"},
      {"nulloff", "carriers to null for the baseline to match the design"}};
  for (const auto& [name, help] : commands) common(app.add_subcommand(name, help), name == "compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  Artifacts out(opt.out);
  try {
    std::vector<Scenario> list;
    for (const auto& p : opt.scenarios) list.push_back(load(p, opt));
    if (cmd != "compare" && list.size() != 1) throw ConfigError(cmd + " takes exactly one --scenario");
    if (cmd == "design") return cmd_design(list.front(), out);
    if (cmd == "psd") return cmd_psd(list.front(), out, opt.plot);
    if (cmd == "simulate") return cmd_simulate(list.front(), out, opt.plot);
    if (cmd == "papr") return cmd_papr(list.front(), out, opt.plot);
    if (cmd == "comply") return cmd_comply(list.front(), out);
    if (cmd == "compare") return cmd_compare(list, out);
    if (cmd == "nulloff") return cmd_nulloff(list.front(), out);
    return 2;
  } catch (const gpshape::Error& e) {
    out.discard();
    std::cerr << "ofdm-shaper " << cmd << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    out.discard();
    std::cerr << "ofdm-shaper " << cmd << ": " << e.what() << "\n";
    return 1;
  }
}
