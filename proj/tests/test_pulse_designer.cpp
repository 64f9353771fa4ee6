#include <catch_amalgamated.hpp>

#include "gpshape/pulse_designer.hpp"

using namespace gpshape;

namespace {

const OfdmConfig kConfig{64, 16, 8, 1.0};
const std::vector<CarrierRange> kNotch{{20, 27}};

DesignRequest request(TransitionKind kind, ConstraintKind cons, CcPolicy policy = CcPolicy::nearest_edge,
                      int harmonics = 3) {
  PlanRules rules;
  rules.cc_policy = policy;
  rules.reduced_per_edge = 4;
  DesignRequest req;
  req.config = kConfig;
  req.window = build_shaping_window(kConfig, WindowKind::raised_cosine);
  req.plan = plan_carriers(kConfig, kNotch, rules);
  req.band = band_from_carriers(kConfig, kNotch, 0.5);
  req.transition.kind = kind;
  req.transition.harmonics_per_edge = harmonics;
  req.constraints.kind = cons;
  req.constraints.eps_cc = 0.5;
  req.constraints.eps_t = 0.05;
  req.constraints.eps_norm = 0.2;
  return req;
}

const TransitionKind kAllKinds[] = {TransitionKind::none, TransitionKind::general, TransitionKind::windowed,
                                    TransitionKind::harmonic};
const ConstraintKind kAllConstraints[] = {ConstraintKind::unconstrained, ConstraintKind::box,
                                          ConstraintKind::l2_ball};

}  // namespace

TEST_CASE("design never raises the in-band energy", "[designer][property]") {
  for (auto kind : kAllKinds)
    for (auto cons : kAllConstraints) {
      const auto d = design_pulse_set(request(kind, cons));
      REQUIRE(d.carriers.size() == 8u);
      const BandMatrix phi(d.band, kConfig.pulse_len());
      for (const auto& s : d.carriers) {
        INFO(to_string(kind) << " " << to_string(cons) << " carrier " << s.carrier);
        CHECK(s.energy_after <= s.energy_before * (1 + 1e-12));
        CHECK(s.energy_after == Catch::Approx(band_energy(d.pulse(s.carrier), phi)).epsilon(1e-12));
      }
    }
}

TEST_CASE("constraints hold on every carrier", "[designer]") {
  for (auto kind : kAllKinds) {
    const auto box = design_pulse_set(request(kind, ConstraintKind::box));
    for (const auto& s : box.carriers) {
      CHECK(s.alpha.real().cwiseAbs().maxCoeff() <= 0.5 * (1 + 1e-9));
      CHECK(s.alpha.imag().cwiseAbs().maxCoeff() <= 0.5 * (1 + 1e-9));
      if (s.tail.size() > 0) {
        CHECK(s.tail.real().cwiseAbs().maxCoeff() <= 0.05 * (1 + 1e-9));
        CHECK(s.tail.imag().cwiseAbs().maxCoeff() <= 0.05 * (1 + 1e-9));
      }
    }
    const auto ball = design_pulse_set(request(kind, ConstraintKind::l2_ball));
    for (const auto& s : ball.carriers) CHECK(s.alpha.squaredNorm() + s.tail.squaredNorm() <= 0.2 * (1 + 1e-9));
  }
}

TEST_CASE("energy is monotone under basis enlargement", "[designer][property]") {
  auto energies = [](const DesignRequest& r) {
    std::map<int, double> e;
    for (const auto& s : design_pulse_set(r).carriers) e[s.carrier] = s.energy_after;
    return e;
  };
  auto not_worse = [](const std::map<int, double>& big, const std::map<int, double>& small) {
    for (const auto& [k, e] : small) {
      INFO("carrier " << k << " small " << e << " big " << big.at(k));
      CHECK(big.at(k) <= e * (1 + 1e-6) + 1e-14);
    }
  };
  const auto cu = ConstraintKind::unconstrained;
  const auto cc_edge = energies(request(TransitionKind::none, cu, CcPolicy::nearest_edge));
  const auto cc_all = energies(request(TransitionKind::none, cu, CcPolicy::all));
  not_worse(cc_all, cc_edge);
  const auto general = energies(request(TransitionKind::general, cu));
  not_worse(general, cc_edge);
  not_worse(general, energies(request(TransitionKind::windowed, cu)));
  const auto h1 = energies(request(TransitionKind::harmonic, cu, CcPolicy::nearest_edge, 1));
  const auto h3 = energies(request(TransitionKind::harmonic, cu, CcPolicy::nearest_edge, 3));
  not_worse(h1, cc_edge);
  not_worse(h3, h1);
  not_worse(general, h3);
}

TEST_CASE("in-band energy gradient against finite differences", "[designer][property]") {
  const auto d = design_pulse_set(request(TransitionKind::harmonic, ConstraintKind::box));
  const BandMatrix phi(d.band, kConfig.pulse_len());
  for (const auto& base : d.carriers) {
    const auto& cc = d.plan.cc_of(base.carrier);
    CarrierSolution s = base;
    // move off the optimum so the gradient is not zero
    s.alpha = s.alpha.array() + cplx(0.1, -0.05);
    s.tail = s.tail.array() + cplx(-0.02, 0.03);
    PulseDesign work = d;
    auto energy_at = [&](const CarrierSolution& x) {
      work.carriers = {x};
      return band_energy(work.pulse(x.carrier), phi);
    };
    work.carriers = {s};
    const CVec h = work.pulse(s.carrier);
    const CVec phih = phi.multiply(h);
    const Eigen::Index nc = s.alpha.size(), nt = s.tail.size();
    for (Eigen::Index j = 0; j < nc + nt; ++j) {
      CVec col;
      if (j < nc) {
        col = basic_pulse(kConfig, d.window, cc[j]);
      } else {
        CarrierSolution unit = s;
        unit.tail = CVec::Zero(nt);
        unit.tail[j - nc] = 1.0;
        col = work.transition_pulse(unit);
      }
      const cplx analytic = 2.0 * col.dot(phih);  // d/dRe + j d/dIm
      for (int part = 0; part < 2; ++part) {
        const cplx step = part == 0 ? cplx(1e-6, 0) : cplx(0, 1e-6);
        CarrierSolution plus = s, minus = s;
        (j < nc ? plus.alpha[j] : plus.tail[j - nc]) += step;
        (j < nc ? minus.alpha[j] : minus.tail[j - nc]) -= step;
        const double fd = (energy_at(plus) - energy_at(minus)) / 2e-6;
        const double want = part == 0 ? analytic.real() : analytic.imag();
        INFO("carrier " << s.carrier << " coefficient " << j << " part " << part);
        CHECK(std::abs(fd - want) <= 1e-4 * std::max(std::abs(want), 1e-3 * std::abs(analytic)));
      }
    }
  }
}

TEST_CASE("transition pulses live on the edges only", "[designer]") {
  for (auto kind : {TransitionKind::general, TransitionKind::windowed, TransitionKind::harmonic}) {
    const auto d = design_pulse_set(request(kind, ConstraintKind::box));
    const int beta = kConfig.rolloff_len, L = kConfig.pulse_len();
    for (const auto& s : d.carriers) {
      const CVec t = d.transition_pulse(s);
      CHECK(t.segment(beta, L - 2 * beta).cwiseAbs().maxCoeff() == 0.0);
      CHECK(t.cwiseAbs().maxCoeff() > 0.0);
    }
  }
}

TEST_CASE("transition bases", "[designer]") {
  const auto rows = edge_rows(kConfig);
  REQUIRE(rows.size() == 16u);
  CHECK(rows.front() == 0);
  CHECK(rows.back() == kConfig.pulse_len() - 1);

  TransitionRequest tr;
  tr.kind = TransitionKind::general;
  CHECK(build_transition_basis(kConfig, tr).size() == 16);
  tr.kind = TransitionKind::harmonic;
  tr.harmonics = {1, 2};
  const auto h = build_transition_basis(kConfig, tr);
  CHECK(h.size() == 4);
  tr.harmonics = {8};
  CHECK_THROWS_AS(build_transition_basis(kConfig, tr), ConfigError);
  tr.kind = TransitionKind::windowed;
  tr.q_set = {18, 19};
  const auto w = build_transition_basis(kConfig, tr);
  CHECK(w.size() == 2);
  CHECK(w.edge_window.size() == static_cast<std::size_t>(kConfig.pulse_len()));

  const auto u = hamming_edge_window(kConfig);
  CHECK(u[0] == Catch::Approx(0.08));
  CHECK(u[7] == Catch::Approx(0.08));
  CHECK(u[30] == 0.0);
}

TEST_CASE("harmonic selection", "[designer]") {
  const auto band = band_from_carriers(kConfig, kNotch, 0.5);
  // lower edge at 19.5/64, i.e. 2.4375/8
  CHECK(select_harmonics(kConfig, band, 15, 1) == std::vector<int>{2});
  CHECK(select_harmonics(kConfig, band, 15, 3) == std::vector<int>{1, 2, 3});
  // upper edge at 27.5/64 = 3.4375/8
  CHECK(select_harmonics(kConfig, band, 31, 2) == std::vector<int>{3, 4});
  CHECK_THROWS_AS(select_harmonics(kConfig, band, 15, 9), ConfigError);
}

TEST_CASE("gamma zero keeps the basic pulse", "[designer]") {
  auto d = design_pulse_set(request(TransitionKind::general, ConstraintKind::box));
  for (auto& s : d.carriers) {
    s.alpha.setZero();
    s.tail.setZero();
    CHECK((d.pulse(s.carrier) - basic_pulse(kConfig, d.window, s.carrier)).norm() == 0.0);
  }
  CHECK((d.pulse(40) - basic_pulse(kConfig, d.window, 40)).norm() == 0.0);
}

TEST_CASE("coefficient matrices", "[designer]") {
  const auto d = design_pulse_set(request(TransitionKind::harmonic, ConstraintKind::box));
  const CMat A = d.cc_matrix();
  CHECK(A.rows() == static_cast<Eigen::Index>(d.plan.cc().size()));
  CHECK(A.cols() == static_cast<Eigen::Index>(d.carriers.size()));
  const auto [Xs, Xe] = d.harmonic_matrices();
  CHECK(Xs.rows() == kConfig.rolloff_len);
  for (std::size_t c = 0; c < d.carriers.size(); ++c) {
    int nz = 0;
    for (int r = 0; r < Xs.rows(); ++r) nz += Xs(r, static_cast<Eigen::Index>(c)) != cplx{};
    CHECK(nz <= 3);
  }
}

TEST_CASE("smooth ramp preset replaces the window edges", "[designer]") {
  auto req = request(TransitionKind::general, ConstraintKind::unconstrained);
  req.transition.fixed_smooth_ramp = true;
  const auto d = design_pulse_set(req);
  const int beta = kConfig.rolloff_len, L = kConfig.pulse_len();
  for (const auto& s : d.carriers) {
    const CVec h = d.pulse(s.carrier);
    for (int m = 0; m < beta; ++m) {
      const double x = (m + 1.0) / (beta + 1.0);
      const double r = x - std::sin(kTwoPi * x) / kTwoPi;
      CHECK(std::abs(h[m]) == Catch::Approx(r));
      CHECK(std::abs(h[L - 1 - m]) == Catch::Approx(r));
    }
  }
}

TEST_CASE("presets", "[designer]") {
  for (auto name : {"yamaguchi", "brandes", "sahin_fixed_windows", "mahmoud_ast"}) {
    const auto p = preset_from_string(name);
    CHECK(to_string(p) == name);
  }
  CHECK(preset(PresetName::yamaguchi).rules.cc_inband_per_edge == 0);
  CHECK(preset(PresetName::brandes).constraints.kind == ConstraintKind::l2_ball);
  CHECK(preset(PresetName::sahin_fixed_windows).transition.fixed_smooth_ramp);
  CHECK_THROWS_AS(preset_from_string("unknown"), ConfigError);
}

TEST_CASE("design request validation", "[designer]") {
  auto req = request(TransitionKind::none, ConstraintKind::box);
  req.band = BandSet{};
  CHECK_THROWS_AS(design_pulse_set(req), ConfigError);
  auto flat = request(TransitionKind::general, ConstraintKind::box);
  flat.config = OfdmConfig{64, 16, 0, 1.0};
  flat.window = build_shaping_window(flat.config, WindowKind::rectangular);
  CHECK_THROWS_AS(design_pulse_set(flat), ConfigError);
}
