#include <catch_amalgamated.hpp>

#include <random>

#include "gpshape/pulse_designer.hpp"
#include "oracle.hpp"

using namespace gpshape;

namespace {

struct Toy {
  PulseDesign design;
  std::vector<oracle::Interval> band;
};

Toy toy(int cc_in, int cc_out, TransitionKind kind, ConstraintSpec cons, int harmonics = 1) {
  const OfdmConfig c{16, 4, 2, 1.0};
  PlanRules rules;
  rules.cc_inband_per_edge = cc_in;
  rules.cc_outband_per_edge = cc_out;
  rules.reduced_per_edge = 1;
  rules.cc_policy = CcPolicy::nearest_edge;
  DesignRequest req;
  req.config = c;
  req.window = build_shaping_window(c, WindowKind::raised_cosine);
  req.plan = plan_carriers(c, {{6, 8}}, rules);
  req.band = band_from_carriers(c, {{6, 8}}, 0.5);
  req.transition.kind = kind;
  req.transition.harmonics_per_edge = harmonics;
  req.constraints = cons;
  Toy t{design_pulse_set(req), {}};
  for (const auto& iv : req.band.intervals()) t.band.push_back({iv.lo, iv.hi});
  return t;
}

/// Columns [P | T] of the carrier's basis; T is read off transition_pulse.
CMat basis_of(const PulseDesign& d, const CarrierSolution& s) {
  const auto& cc = d.plan.cc_of(s.carrier);
  const Eigen::Index nc = static_cast<Eigen::Index>(cc.size()), nt = s.tail.size();
  CMat B(d.config.pulse_len(), nc + nt);
  for (Eigen::Index j = 0; j < nc; ++j) B.col(j) = basic_pulse(d.config, d.window, cc[j]);
  for (Eigen::Index j = 0; j < nt; ++j) {
    CarrierSolution unit = s;
    unit.tail = CVec::Zero(nt);
    unit.tail[j] = 1.0;
    B.col(nc + j) = d.transition_pulse(unit);
  }
  return B;
}

CVec gamma_of(const CarrierSolution& s) {
  CVec g(s.alpha.size() + s.tail.size());
  g << s.alpha, s.tail;
  return g;
}

int grid_points(Eigen::Index M) { return M <= 2 ? 9 : 7; }

}  // namespace

TEST_CASE("closed form against grid search", "[solver][oracle]") {
  ConstraintSpec cons;
  cons.kind = ConstraintKind::unconstrained;
  for (auto [ci, co, kind] : {std::tuple{0, 1, TransitionKind::none}, std::tuple{1, 1, TransitionKind::none},
                              std::tuple{2, 1, TransitionKind::none}, std::tuple{0, 1, TransitionKind::harmonic}}) {
    const auto t = toy(ci, co, kind, cons);
    for (const auto& s : t.design.carriers) {
      const CMat B = basis_of(t.design, s);
      REQUIRE(B.cols() <= 3);
      const auto q = oracle::quadratic_by_quadrature(basic_pulse(t.design.config, t.design.window, s.carrier), B, t.band);
      const CVec g = oracle::grid_search(q, [](const Eigen::VectorXd&) { return true; }, 4.0, grid_points(B.cols()));
      const double e_grid = q.energy(g);
      const double e_lib = q.energy(gamma_of(s));
      INFO("carrier " << s.carrier << " M " << B.cols() << " grid " << e_grid << " closed " << e_lib);
      CHECK(std::abs(e_lib - e_grid) <= 5e-4 * e_grid);
      CHECK(std::abs(s.energy_after - e_lib) <= 1e-8 * q.e0);
      CHECK(s.energy_after <= s.energy_before);
    }
  }
}

TEST_CASE("box solution against restricted grid search", "[solver][oracle]") {
  ConstraintSpec cons;
  cons.kind = ConstraintKind::box;
  cons.eps_cc = 0.05;
  cons.eps_t = 0.02;
  for (auto [ci, co, kind] : {std::tuple{1, 1, TransitionKind::none}, std::tuple{2, 1, TransitionKind::none},
                              std::tuple{0, 1, TransitionKind::harmonic}}) {
    const auto t = toy(ci, co, kind, cons);
    for (const auto& s : t.design.carriers) {
      const CMat B = basis_of(t.design, s);
      const Eigen::Index M = B.cols(), nc = s.alpha.size();
      const auto q = oracle::quadratic_by_quadrature(basic_pulse(t.design.config, t.design.window, s.carrier), B, t.band);
      auto feasible = [&](const Eigen::VectorXd& x) {
        for (Eigen::Index j = 0; j < M; ++j) {
          const double eps = j < nc ? cons.eps_cc : cons.eps_t;
          if (std::abs(x[j]) > eps || std::abs(x[M + j]) > eps) return false;
        }
        return true;
      };
      const CVec g = oracle::grid_search(q, feasible, 0.05, grid_points(M));
      const CVec lib = gamma_of(s);
      bool active = false;
      for (Eigen::Index j = 0; j < M; ++j) {
        const double eps = j < nc ? cons.eps_cc : cons.eps_t;
        CHECK(std::abs(lib[j].real()) <= eps * (1 + 1e-9));
        CHECK(std::abs(lib[j].imag()) <= eps * (1 + 1e-9));
        active = active || std::abs(lib[j].real()) > eps * (1 - 1e-6) || std::abs(lib[j].imag()) > eps * (1 - 1e-6);
      }
      CHECK(active);
      INFO("carrier " << s.carrier << " grid " << q.energy(g) << " box " << q.energy(lib));
      CHECK(std::abs(q.energy(lib) - q.energy(g)) <= 5e-4 * q.energy(g));
    }
  }
}

TEST_CASE("ball solution against restricted grid search", "[solver][oracle]") {
  ConstraintSpec cons;
  cons.kind = ConstraintKind::l2_ball;
  cons.eps_norm = 0.01;
  for (int ci : {0, 1}) {
    const auto t = toy(ci, 1, TransitionKind::none, cons);
    for (const auto& s : t.design.carriers) {
      const CMat B = basis_of(t.design, s);
      REQUIRE(B.cols() <= 2);
      const auto q = oracle::quadratic_by_quadrature(basic_pulse(t.design.config, t.design.window, s.carrier), B, t.band);
      auto feasible = [&](const Eigen::VectorXd& x) { return x.squaredNorm() <= cons.eps_norm; };
      const CVec g = oracle::grid_search(q, feasible, 0.1, 9, 1e-12);
      const CVec lib = gamma_of(s);
      CHECK(lib.squaredNorm() <= cons.eps_norm * (1 + 1e-9));
      // the bound binds only when the free minimizer lies outside the ball
      const CVec free = -q.G.ldlt().solve(q.b);
      if (free.squaredNorm() > cons.eps_norm)
        CHECK(lib.squaredNorm() >= cons.eps_norm * (1 - 1e-6));
      else
        CHECK((lib - free).norm() <= 1e-6 * free.norm());
      INFO("carrier " << s.carrier << " grid " << q.energy(g) << " ball " << q.energy(lib));
      CHECK(std::abs(q.energy(lib) - q.energy(g)) <= 5e-4 * q.energy(g));
    }
  }
}

namespace {

struct RandomProblem {
  CMat G;
  CVec b;
};

RandomProblem random_problem(std::mt19937_64& rng, int M, double cond) {
  std::normal_distribution<double> n;
  CMat A(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) A(i, j) = cplx(n(rng), n(rng));
  Eigen::HouseholderQR<CMat> qr(A);
  const CMat Q = qr.householderQ();
  RVec s(M);
  for (int i = 0; i < M; ++i) s[i] = std::pow(cond, -double(i) / std::max(1, M - 1));
  RandomProblem p;
  p.G = Q * s.cast<cplx>().asDiagonal() * Q.adjoint();
  p.b.resize(M);
  for (int i = 0; i < M; ++i) p.b[i] = cplx(n(rng), n(rng));
  return p;
}

}  // namespace

TEST_CASE("box solver satisfies the optimality conditions", "[solver]") {
  std::mt19937_64 rng(21);
  for (int M : {1, 4, 30, 200}) {
    for (double cond : {1.0, 1e3, 1e8}) {
      const auto p = random_problem(rng, M, cond);
      QuadraticModel model(p.G);
      model.prepare(ConstraintKind::box);
      const RVec bounds = RVec::Constant(M, 0.3);
      const auto res = model.solve_box(p.b, bounds);
      const RVec x = detail::lift(res.gamma);
      const RVec g = detail::lift(2.0 * (model.regularized() * res.gamma + p.b));
      const RVec lo = -detail::lift(CVec(bounds.cast<cplx>() * cplx(1, 1)));
      const RVec hi = -lo;
      INFO("M " << M << " cond " << cond);
      CHECK(detail::projected_gradient_norm(x, g, lo, hi) <= 1e-6 * (1.0 + p.b.norm()));
      CHECK((x.array() <= hi.array() + 1e-12).all());
      CHECK((x.array() >= lo.array() - 1e-12).all());
    }
  }
}

TEST_CASE("loose box equals the unconstrained solution", "[solver]") {
  std::mt19937_64 rng(4);
  const auto p = random_problem(rng, 12, 100.0);
  QuadraticModel model(p.G);
  model.prepare(ConstraintKind::box);
  const CVec free = model.solve_unconstrained(p.b);
  const auto res = model.solve_box(p.b, RVec::Constant(12, 10.0 * free.cwiseAbs().maxCoeff()));
  CHECK((res.gamma - free).norm() <= 1e-7 * free.norm());
}

TEST_CASE("ball solver", "[solver]") {
  std::mt19937_64 rng(8);
  const auto p = random_problem(rng, 10, 1e4);
  QuadraticModel model(p.G);
  model.prepare(ConstraintKind::l2_ball);
  const CVec free = model.solve_unconstrained(p.b);
  SECTION("inactive constraint") {
    const auto res = model.solve_ball(p.b, 2.0 * free.squaredNorm());
    CHECK((res.gamma - free).norm() <= 1e-8 * free.norm());
  }
  SECTION("active constraint beats every feasible scaling") {
    const double eps = 0.01 * free.squaredNorm();
    const auto res = model.solve_ball(p.b, eps);
    CHECK(res.gamma.squaredNorm() == Catch::Approx(eps).epsilon(1e-8));
    const double e = energy_delta(p.G, p.b, res.gamma);
    std::normal_distribution<double> n;
    for (int t = 0; t < 200; ++t) {
      CVec v(10);
      for (int i = 0; i < 10; ++i) v[i] = cplx(n(rng), n(rng));
      v *= std::sqrt(eps) / v.norm();
      CHECK(energy_delta(p.G, p.b, v) >= e - 1e-12 * std::abs(e));
    }
  }
}

TEST_CASE("constraint parsing and validation", "[solver]") {
  CHECK(constraint_kind_from_string("box") == ConstraintKind::box);
  CHECK(constraint_kind_from_string("l2_ball") == ConstraintKind::l2_ball);
  CHECK_THROWS_AS(constraint_kind_from_string("simplex"), ConfigError);
  ConstraintSpec c;
  c.eps_cc = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(QuadraticModel(CMat::Zero(2, 3)), ConfigError);
}
