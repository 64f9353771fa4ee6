#include <catch_amalgamated.hpp>

#include <random>

#include "gpshape/spectrum_analysis.hpp"
#include "gpshape/transmitter.hpp"

using namespace gpshape;

namespace {

PulseDesign make_design(const OfdmConfig& c, const std::vector<CarrierRange>& notches, TransitionKind kind,
                        ConstraintKind cons = ConstraintKind::box) {
  PlanRules rules;
  rules.reduced_per_edge = std::min(4, c.n_carriers / 8);
  DesignRequest req;
  req.config = c;
  req.window = build_shaping_window(c, WindowKind::raised_cosine);
  req.plan = plan_carriers(c, notches, rules);
  req.band = band_from_carriers(c, notches, 0.5);
  req.transition.kind = kind;
  req.transition.harmonics_per_edge = std::min(3, c.rolloff_len);
  req.constraints.kind = cons;
  return design_pulse_set(req);
}

const TransitionKind kKinds[] = {TransitionKind::none, TransitionKind::general, TransitionKind::windowed,
                                 TransitionKind::harmonic};

double max_relative_error(const std::vector<SymbolFrame>& sent, const std::vector<CVec>& got) {
  double worst = 0.0;
  for (std::size_t i = 0; i < sent.size(); ++i)
    worst = std::max(worst, (got[i] - sent[i].data).cwiseAbs().maxCoeff() / sent[i].data.cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace

TEST_CASE("receiver sees the transmitted symbols", "[transmitter][property]") {
  for (const auto& [c, notch] : {std::pair{OfdmConfig{16, 4, 2, 1.0}, CarrierRange{6, 7}},
                                 std::pair{OfdmConfig{64, 16, 8, 1.0}, CarrierRange{20, 27}}}) {
    for (auto kind : kKinds) {
      const auto d = make_design(c, {notch}, kind);
      const auto g = generate_stream(d, 12, 99);
      const auto rx = demodulate(c, g.samples, d.plan.data, 12);
      INFO("N " << c.n_carriers << " kind " << to_string(kind));
      CHECK(max_relative_error(g.frames, rx) < 1e-9);
    }
  }
}

TEST_CASE("fast and direct transmitters agree", "[transmitter][property]") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    const int N = 16 << (trial % 5);  // 16 .. 256
    const int beta = std::max(2, N / 16);
    const OfdmConfig c{N, N / 4, beta, 1.0};
    std::uniform_int_distribution<int> start(1, N - N / 4);
    const int a = start(rng);
    const CarrierRange notch{a, a + std::max(2, N / 16)};
    for (auto kind : kKinds) {
      const auto d = make_design(c, {notch}, kind, trial % 2 ? ConstraintKind::box : ConstraintKind::l2_ball);
      const auto frames = random_frames(d.plan.data.size(), 5, 1000 + trial);
      const CVec fast = modulate_generalized_fast(d, frames);
      const CVec direct = modulate_generalized_direct(d, frames);
      INFO("N " << N << " kind " << to_string(kind));
      CHECK((fast - direct).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("conventional modulator matches the design path without generalized pulses", "[transmitter]") {
  const OfdmConfig c{64, 16, 8, 1.0};
  const auto w = build_shaping_window(c, WindowKind::raised_cosine);
  const auto plan = conventional_plan(c, {{20, 27}});
  const auto d = conventional_design(c, w, plan);
  const auto frames = random_frames(plan.data.size(), 4, 5);
  const CVec a = modulate_conventional(c, w, plan.data, frames);
  const CVec b = modulate_generalized_fast(d, frames);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("modulation is linear in the symbols", "[transmitter]") {
  const OfdmConfig c{64, 16, 8, 1.0};
  const auto d = make_design(c, {{20, 27}}, TransitionKind::harmonic);
  auto f1 = random_frames(d.plan.data.size(), 3, 1);
  auto f2 = random_frames(d.plan.data.size(), 3, 2);
  std::vector<SymbolFrame> mix(3);
  const cplx a(0.3, -1.2), b(2.0, 0.5);
  for (int i = 0; i < 3; ++i) mix[i].data = a * f1[i].data + b * f2[i].data;
  const CVec lhs = modulate_generalized_fast(d, mix);
  const CVec rhs = a * modulate_generalized_fast(d, f1) + b * modulate_generalized_fast(d, f2);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random frames are unit-power qpsk and reproducible", "[transmitter]") {
  const auto f = random_frames(100, 50, 3);
  const auto g = random_frames(100, 50, 3);
  const auto h = random_frames(100, 50, 4);
  double power = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f[i].data == g[i].data);
    for (Eigen::Index j = 0; j < f[i].data.size(); ++j) {
      CHECK(std::abs(std::abs(f[i].data[j].real()) - std::sqrt(0.5)) < 1e-15);
      power += std::norm(f[i].data[j]);
    }
  }
  CHECK(power / 5000.0 == Catch::Approx(1.0));
  CHECK(f[0].data != h[0].data);
  CHECK(constellation_from_string("QPSK") == Constellation::qpsk);
  CHECK_THROWS_AS(constellation_from_string("16qam"), ConfigError);
}

TEST_CASE("frame size is checked", "[transmitter]") {
  const OfdmConfig c{16, 4, 2, 1.0};
  const auto d = make_design(c, {{6, 7}}, TransitionKind::none);
  auto frames = random_frames(d.plan.data.size() + 1, 2, 1);
  CHECK_THROWS_AS(modulate_generalized_fast(d, frames), ConfigError);
  CHECK_THROWS_AS(demodulate(c, CVec::Zero(10), d.plan.data, 1), ConfigError);
}

TEST_CASE("complexity counts", "[transmitter]") {
  const OfdmConfig c{4096, 1024, 512, 100e6};
  const auto w = build_shaping_window(c, WindowKind::raised_cosine);
  PulseDesign d = conventional_design(c, w, conventional_plan(c, {{3022, 3026}}));
  auto r = complexity_report(d);
  CHECK(r.baseline == 25600.0);
  CHECK(r.increment_percent() == 0.0);

  // two carriers with three CC each
  CarrierSolution s;
  s.alpha = CVec::Zero(3);
  s.carrier = 3000;
  d.carriers.push_back(s);
  s.carrier = 3001;
  d.carriers.push_back(s);
  d.kind = TransitionKind::none;
  CHECK(complexity_report(d).cc_term == 6.0);
  d.kind = TransitionKind::general;
  CHECK(complexity_report(d).transition_term == 2048.0);
  d.kind = TransitionKind::windowed;
  d.q_set = {1, 2, 3, 4, 5};
  CHECK(complexity_report(d).transition_term == 10.0 + 24576.0 + 1024.0);
  d.kind = TransitionKind::harmonic;
  for (auto& x : d.carriers) x.tail = CVec::Zero(6);
  CHECK(complexity_report(d).transition_term == 12.0 + 2304.0);
  CHECK(fft_products(1) == 0.0);
}
