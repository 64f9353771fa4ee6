#pragma once

// File formats: design JSON, PSD CSV/JSON, binary sample streams with a JSON
// sidecar, and a small SVG plotter.

#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gpshape/core_model.hpp"
#include "gpshape/error.hpp"
#include "gpshape/pulse_designer.hpp"
#include "gpshape/spectrum_analysis.hpp"

namespace gpshape {

namespace detail {

inline nlohmann::json complex_array(const CVec& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v[i].real(), v[i].imag()});
  return a;
}

inline CVec complex_from(const nlohmann::json& a) {
  CVec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = {a[i][0].get<double>(), a[i][1].get<double>()};
  return v;
}

inline std::string format_double(double v, int digits = 17) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace detail

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json config_json(const OfdmConfig& c) {
  return {{"n_carriers", c.n_carriers},
          {"guard_len", c.guard_len},
          {"rolloff_len", c.rolloff_len},
          {"sample_rate_hz", c.sample_rate_hz}};
}

inline std::string config_hash(const OfdmConfig& c) { return hex64(fnv1a(config_json(c).dump())); }

// ---------------------------------------------------------------------------
// Designs

inline nlohmann::json to_json(const PulseDesign& d) {
  nlohmann::json j;
  j["config"] = config_json(d.config);
  j["window"] = to_string(d.window.kind);
  auto bands = nlohmann::json::array();
  for (const auto& iv : d.band.intervals()) bands.push_back({iv.lo, iv.hi});
  j["band"] = bands;
  auto ranges = nlohmann::json::array();
  for (const auto& r : d.plan.bands) ranges.push_back({r.start, r.count});
  j["plan"] = {{"n_carriers", d.plan.n_carriers},
               {"bands", ranges},
               {"data", d.plan.data},
               {"cc_inband", d.plan.cc_inband},
               {"cc_outband", d.plan.cc_outband},
               {"reduced_data", d.plan.reduced_data}};
  j["kind"] = to_string(d.kind);
  j["constraints"] = {{"kind", to_string(d.constraints.kind)},
                      {"eps_cc", d.constraints.eps_cc},
                      {"eps_t", d.constraints.eps_t},
                      {"eps_norm", d.constraints.eps_norm}};
  j["q_set"] = d.q_set;
  j["edge_window"] = d.edge_window;
  auto carriers = nlohmann::json::array();
  for (const auto& s : d.carriers) {
    carriers.push_back({{"carrier", s.carrier},
                        {"cc", d.plan.cc_of(s.carrier)},
                        {"alpha", detail::complex_array(s.alpha)},
                        {"tail", detail::complex_array(s.tail)},
                        {"harmonics", s.harmonics},
                        {"energy_before", s.energy_before},
                        {"energy_after", s.energy_after},
                        {"iterations", s.iterations},
                        {"residual", s.residual}});
  }
  j["carriers"] = carriers;
  return j;
}

inline PulseDesign design_from_json(const nlohmann::json& j) {
  try {
    PulseDesign d;
    const auto& c = j.at("config");
    d.config.n_carriers = c.at("n_carriers").get<int>();
    d.config.guard_len = c.at("guard_len").get<int>();
    d.config.rolloff_len = c.at("rolloff_len").get<int>();
    d.config.sample_rate_hz = c.at("sample_rate_hz").get<double>();
    d.window = build_shaping_window(d.config, window_kind_from_string(j.at("window").get<std::string>()));
    std::vector<FrequencyInterval> ivs;
    for (const auto& b : j.at("band")) ivs.push_back({b[0].get<double>(), b[1].get<double>()});
    d.band = BandSet::from_intervals(ivs);
    const auto& p = j.at("plan");
    d.plan.n_carriers = p.at("n_carriers").get<int>();
    for (const auto& r : p.at("bands")) d.plan.bands.push_back({r[0].get<int>(), r[1].get<int>()});
    d.plan.data = p.at("data").get<std::vector<int>>();
    d.plan.cc_inband = p.at("cc_inband").get<std::vector<int>>();
    d.plan.cc_outband = p.at("cc_outband").get<std::vector<int>>();
    d.plan.reduced_data = p.at("reduced_data").get<std::vector<int>>();
    d.kind = transition_kind_from_string(j.at("kind").get<std::string>());
    const auto& k = j.at("constraints");
    d.constraints.kind = constraint_kind_from_string(k.at("kind").get<std::string>());
    d.constraints.eps_cc = k.at("eps_cc").get<double>();
    d.constraints.eps_t = k.at("eps_t").get<double>();
    d.constraints.eps_norm = k.at("eps_norm").get<double>();
    d.q_set = j.at("q_set").get<std::vector<int>>();
    d.edge_window = j.at("edge_window").get<std::vector<double>>();
    for (const auto& s : j.at("carriers")) {
      CarrierSolution cs;
      cs.carrier = s.at("carrier").get<int>();
      d.plan.per_carrier_cc[cs.carrier] = s.at("cc").get<std::vector<int>>();
      cs.alpha = detail::complex_from(s.at("alpha"));
      cs.tail = detail::complex_from(s.at("tail"));
      cs.harmonics = s.at("harmonics").get<std::vector<int>>();
      cs.energy_before = s.at("energy_before").get<double>();
      cs.energy_after = s.at("energy_after").get<double>();
      cs.iterations = s.at("iterations").get<int>();
      cs.residual = s.at("residual").get<double>();
      d.carriers.push_back(std::move(cs));
    }
    d.plan.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("design JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Text and binary writers

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// frequency_hz,psd_db
inline std::string psd_csv(const PsdCurve& c) {
  std::string s = "frequency_hz,psd_db\n";
  const auto db = c.db();
  for (std::size_t i = 0; i < c.size(); ++i)
    s += detail::format_double(c.frequency[i] * c.sample_rate_hz, 12) + "," + detail::format_double(db[i], 10) + "\n";
  return s;
}

inline nlohmann::json to_json(const PsdCurve& c) {
  return {{"grid_density", c.grid_density},
          {"sample_rate_hz", c.sample_rate_hz},
          {"normalization", c.normalization == PsdNormalization::absolute ? "absolute" : "peak_0dB"},
          {"frequency", c.frequency},
          {"values", c.values}};
}

/// Interleaved little-endian f64 Re/Im.
inline void write_stream(const std::filesystem::path& path, const CVec& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  std::vector<unsigned char> buf(static_cast<std::size_t>(x.size()) * 16);
  auto put = [&](std::size_t off, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int b = 0; b < 8; ++b) buf[off + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    put(static_cast<std::size_t>(i) * 16, x[i].real());
    put(static_cast<std::size_t>(i) * 16 + 8, x[i].imag());
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline CVec read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() % 16 != 0) throw IoError("stream file size is not a multiple of 16 bytes");
  CVec x(static_cast<Eigen::Index>(buf.size() / 16));
  auto get = [&](std::size_t off) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[off + static_cast<std::size_t>(b)]) << (8 * b);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  };
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] = {get(static_cast<std::size_t>(i) * 16), get(static_cast<std::size_t>(i) * 16 + 8)};
  return x;
}

inline nlohmann::json stream_sidecar(const OfdmConfig& c, std::uint64_t seed, std::size_t symbols, Eigen::Index samples) {
  return {{"config", config_json(c)},
          {"config_hash", config_hash(c)},
          {"seed", seed},
          {"symbols", symbols},
          {"samples", samples},
          {"format", "interleaved little-endian float64 re/im"}};
}

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line plot with fixed axes, x in the given units and y in dB.
inline std::string svg_plot(const std::vector<PlotSeries>& series, const std::string& xlabel, double ymin, double ymax) {
  const double W = 900, H = 500, ml = 70, mr = 20, mt = 20, mb = 50;
  double xmin = 0, xmax = 1;
  bool first = true;
  for (const auto& s : series)
    for (double v : s.x) {
      if (first) xmin = xmax = v, first = false;
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return mt + (ymax - std::clamp(y, ymin, ymax)) / (ymax - ymin) * (H - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"500\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"900\" height=\"500\" fill=\"white\"/>\n";
  for (double y = std::ceil(ymin / 10) * 10; y <= ymax; y += 10) {
    s += "<line x1=\"" + detail::format_double(ml, 6) + "\" x2=\"" + detail::format_double(W - mr, 6) + "\" y1=\"" +
         detail::format_double(py(y), 6) + "\" y2=\"" + detail::format_double(py(y), 6) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + detail::format_double(ml - 8, 6) + "\" y=\"" + detail::format_double(py(y) + 4, 6) +
         "\" text-anchor=\"end\">" + detail::format_double(y, 4) + "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double x = xmin + (xmax - xmin) * i / 5.0;
    s += "<text x=\"" + detail::format_double(px(x), 6) + "\" y=\"" + detail::format_double(H - mb + 18, 6) +
         "\" text-anchor=\"middle\">" + detail::format_double(x, 5) + "</text>\n";
  }
  s += "<text x=\"" + detail::format_double((W + ml) / 2, 6) + "\" y=\"" + detail::format_double(H - 10, 6) +
       "\" text-anchor=\"middle\">" + xlabel + "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& ser = series[k];
    const char* col = colors[k % 6];
    s += "<polyline fill=\"none\" stroke-width=\"1\" stroke=\"" + std::string(col) + "\" points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i)
      s += detail::format_double(px(ser.x[i]), 6) + "," + detail::format_double(py(ser.y[i]), 6) + " ";
    s += "\"/>\n";
    s += "<text x=\"" + detail::format_double(ml + 10, 6) + "\" y=\"" + detail::format_double(mt + 16 + 16 * k, 6) +
         "\" fill=\"" + col + "\">" + ser.label + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace gpshape
