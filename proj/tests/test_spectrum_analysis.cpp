#include <catch_amalgamated.hpp>

#include <random>

#include "gpshape/spectrum_analysis.hpp"
#include "gpshape/transmitter.hpp"
#include "oracle.hpp"

using namespace gpshape;

namespace {

const OfdmConfig kConfig{64, 16, 8, 1.0};

DesignRequest request(TransitionKind kind) {
  PlanRules rules;
  rules.reduced_per_edge = 4;
  DesignRequest req;
  req.config = kConfig;
  req.window = build_shaping_window(kConfig, WindowKind::raised_cosine);
  req.plan = plan_carriers(kConfig, {{20, 27}}, rules);
  req.band = band_from_carriers(kConfig, {{20, 27}}, 0.5);
  req.transition.kind = kind;
  return req;
}

double notch_max(const PsdCurve& c) { return c.max_over(21.0 / 64, 26.0 / 64); }

}  // namespace

TEST_CASE("zero coefficients reproduce the conventional spectrum", "[psd][property]") {
  auto d = design_pulse_set(request(TransitionKind::harmonic));
  for (auto& s : d.carriers) {
    s.alpha.setZero();
    s.tail.setZero();
  }
  const auto conv = conventional_design(kConfig, d.window, d.plan, d.band);
  const auto a = analytic_psd(d);
  const auto b = analytic_psd(conv);
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  CHECK(worst <= 1e-12 * b.peak());
}

TEST_CASE("analytic psd against direct transforms", "[psd]") {
  const auto d = design_pulse_set(request(TransitionKind::general));
  const auto psd = analytic_psd(d, {}, 8);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, psd.size() - 1);
  for (int t = 0; t < 20; ++t) {
    const std::size_t i = pick(rng);
    double want = 0.0;
    for (int k : d.plan.data) want += std::norm(oracle::dtft(d.pulse(k), psd.frequency[i]));
    want /= kConfig.symbol_period();
    CHECK(std::abs(psd.values[i] - want) <= 1e-10 * psd.peak());
  }
}

TEST_CASE("parseval", "[psd][property]") {
  for (auto kind : {TransitionKind::none, TransitionKind::general, TransitionKind::windowed, TransitionKind::harmonic}) {
    const auto d = design_pulse_set(request(kind));
    std::vector<double> var(d.plan.data.size());
    for (std::size_t j = 0; j < var.size(); ++j) var[j] = 0.5 + 0.01 * static_cast<double>(j);
    const auto psd = analytic_psd(d, var);
    double energy = 0.0;
    for (std::size_t j = 0; j < var.size(); ++j) energy += var[j] * d.pulse(d.plan.data[j]).squaredNorm();
    energy /= kConfig.symbol_period();
    CHECK(std::abs(psd.integral() - energy) <= 1e-8 * energy);
  }
}

TEST_CASE("in-notch level never rises when the basis grows", "[psd][property]") {
  auto req = request(TransitionKind::none);
  req.constraints.kind = ConstraintKind::unconstrained;
  const double none = notch_max(analytic_psd(design_pulse_set(req)));
  req.transition.kind = TransitionKind::general;
  const double general = notch_max(analytic_psd(design_pulse_set(req)));
  const auto conv = analytic_psd(conventional_design(kConfig, req.window, conventional_plan(kConfig, {{20, 27}})));
  CHECK(general <= none * (1 + 1e-9));
  CHECK(none < notch_max(conv));
}

TEST_CASE("welch calibration on white noise", "[welch]") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  CVec x(1 << 20);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = cplx(n(rng), n(rng));
  const auto w = welch_psd(x, 1024, 256);
  double mean = 0.0;
  for (double v : w.values) mean += v;
  mean /= static_cast<double>(w.size());
  CHECK(std::abs(10.0 * std::log10(mean)) < 0.02);
  // per-bin relative deviation ~ 1/sqrt(segments); allow 5 sigma
  const double segments = static_cast<double>(x.size() - 1024) / (1024 - 256) + 1;
  const double bound = 10.0 * std::log10(1.0 + 5.0 / std::sqrt(segments));
  for (double v : w.values) CHECK(std::abs(10.0 * std::log10(v)) < bound);
}

TEST_CASE("welch locates a tone", "[welch]") {
  const int W = 4096;
  CVec x(8 * W);
  const double f0 = 300.0 / W;
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::polar(1.0, kTwoPi * f0 * static_cast<double>(i));
  const auto w = welch_psd(x, W, W / 4);
  const auto it = std::max_element(w.values.begin(), w.values.end());
  CHECK(w.frequency[static_cast<std::size_t>(it - w.values.begin())] == Catch::Approx(f0));
  CHECK_THROWS_AS(welch_psd(CVec::Zero(10), 16, 4), ConfigError);
  CHECK_THROWS_AS(welch_psd(x, W, W), ConfigError);
}

TEST_CASE("papr", "[papr]") {
  CVec tone(100000);
  for (Eigen::Index i = 0; i < tone.size(); ++i) tone[i] = std::polar(2.0, 0.01 * static_cast<double>(i));
  CHECK(std::abs(papr_ccdf(tone, 1e-3)) < 1e-12);
  CHECK(std::abs(papr_ccdf(tone, 0.1)) < 1e-12);
  CHECK_THROWS_AS(papr_ccdf(CVec::Ones(1000), 1e-3), ConfigError);
  CHECK_THROWS_AS(papr_ccdf(tone, 0.0), ConfigError);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  CVec g(1000000);
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = cplx(n(rng), n(rng));
  // complex gaussian: P(|x|^2 > t) = e^{-t}
  CHECK(papr_ccdf(g, 1e-3) == Catch::Approx(10.0 * std::log10(std::log(1e3))).margin(0.05));
  const auto curve = papr_ccdf_curve(g, {0.0, 3.0, 6.0});
  CHECK(curve[0] == Catch::Approx(std::exp(-1.0)).margin(0.002));
  CHECK(curve[0] > curve[1]);
  CHECK(curve[1] > curve[2]);
}

TEST_CASE("mask checks", "[mask]") {
  const auto d = design_pulse_set(request(TransitionKind::none));
  const auto psd = analytic_psd(d);
  SpectralMask deep{{{21, 26, 0.0}}};
  CHECK(check_mask(psd, deep, 64).compliant);
  SpectralMask all_pass{{{21, 26, 0.0}, {40, 50, 0.0}}};
  const auto ap = check_mask(psd, all_pass, 64);
  CHECK(ap.compliant);
  for (const auto& s : ap.segments) CHECK(s.margin_db >= 0.0);
  SpectralMask strict{{{21, 26, -200.0}}};
  const auto st = check_mask(psd, strict, 64);
  CHECK_FALSE(st.compliant);
  CHECK_FALSE(st.violating_frequencies.empty());
  CHECK(st.segments[0].margin_db == Catch::Approx(-200.0 - st.segments[0].level_db));
  SpectralMask bad{{{21, 26, 3.0}}};
  CHECK_THROWS_AS(bad.validate(64), ConfigError);
}

TEST_CASE("rc baseline cannot reach a deep notch", "[mask]") {
  const auto w = build_shaping_window(kConfig, WindowKind::raised_cosine);
  const auto base = conventional_design(kConfig, w, conventional_plan(kConfig, {{20, 27}}));
  SpectralMask m{{{20, 27, -25.0}}};
  CHECK_FALSE(check_mask(analytic_psd(base), m, 64).compliant);
}

TEST_CASE("nulling baseline", "[nulling][property]") {
  const OfdmConfig c{256, 64, 16, 1.0};
  const auto w = build_shaping_window(c, WindowKind::raised_cosine);
  const auto base = conventional_design(c, w, conventional_plan(c, {{100, 104}}));
  const auto start = nulling_baseline(base, {100, 104}, 0.0);
  CHECK(start.n_off == 0);
  const auto same = nulling_baseline(base, {100, 104}, start.level_db);
  CHECK(same.n_off == 0);
  int previous = 0;
  for (double target = start.level_db - 2.0; target > start.level_db - 30.0; target -= 2.0) {
    const auto r = nulling_baseline(base, {100, 104}, target);
    CHECK(r.n_off >= previous);
    CHECK(r.level_db <= target);
    CHECK(r.nulled.size() == static_cast<std::size_t>(2 * r.n_off));
    previous = r.n_off;
  }
  CHECK(previous > 0);
  CHECK_THROWS_AS(nulling_baseline(base, {100, 104}, -400.0), ConfigError);
}

TEST_CASE("loss report", "[loss]") {
  const auto w = build_shaping_window(kConfig, WindowKind::raised_cosine);
  const auto base = conventional_design(kConfig, w, conventional_plan(kConfig, {{20, 27}}));
  SpectralMask easy{{{20, 27, 0.0}}};
  const auto e = loss_report(base, easy);
  CHECK(e.loss_percent == 0.0);
  CHECK(e.nulled.empty());
  SpectralMask hard{{{20, 27, -30.0}}};
  const auto h = loss_report(base, hard);
  CHECK(h.final_report.compliant);
  CHECK(h.loss_percent == Catch::Approx(100.0 * static_cast<double>(h.nulled.size()) / 56.0));

  const auto d = design_pulse_set(request(TransitionKind::none));
  const auto cc = loss_report(d, easy);
  CHECK(cc.inband_cc == 4);
  CHECK(cc.loss_percent == Catch::Approx(100.0 * 4.0 / 56.0));
}

TEST_CASE("psd curve helpers", "[psd]") {
  const auto d = design_pulse_set(request(TransitionKind::none));
  const auto psd = analytic_psd(d);
  CHECK(psd.size() == 16u * 64u);
  CHECK(psd.frequency.front() == Catch::Approx(-0.5 + 1.0 / 1024));
  CHECK(psd.frequency.back() == 0.5);
  const auto n = psd.normalized();
  CHECK(n.peak() == 1.0);
  CHECK(interpolate(psd, psd.frequency[10]) == Catch::Approx(psd.values[10]));
  CHECK_THROWS_AS(psd.max_over(0.1, 0.1 + 1e-6), ConfigError);
  CHECK_THROWS_AS(analytic_psd(d, {}, 2), ConfigError);
}
