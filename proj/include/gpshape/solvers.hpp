#pragma once

// Per-carrier quadratic programs. With Gram G = Pi^H Phi Pi and cross term
// b = Pi^H Phi p, the in-band energy of p + Pi gamma is
//   E(gamma) = E(0) + 2 Re(b^H gamma) + gamma^H G gamma.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <optional>
#include <vector>

#include "gpshape/core_model.hpp"
#include "gpshape/error.hpp"

namespace gpshape {

enum class ConstraintKind { unconstrained, box, l2_ball };

inline std::string to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::unconstrained: return "unconstrained";
    case ConstraintKind::box: return "box";
    case ConstraintKind::l2_ball: return "l2_ball";
  }
  return "unconstrained";
}

inline ConstraintKind constraint_kind_from_string(const std::string& s) {
  if (s == "unconstrained" || s == "none") return ConstraintKind::unconstrained;
  if (s == "box") return ConstraintKind::box;
  if (s == "l2_ball" || s == "ball") return ConstraintKind::l2_ball;
  throw ConfigError("unknown constraint kind '" + s + "'");
}

struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::box;
  double eps_cc = 2.0;    // bound on |Re|, |Im| of each CC coefficient
  double eps_t = 2.0;     // bound on |Re|, |Im| of each transition coefficient
  double eps_norm = 1.0;  // ||gamma||^2 <= eps_norm

  void validate() const {
    if (kind == ConstraintKind::box && !(eps_cc > 0.0 && eps_t > 0.0))
      throw ConfigError("box constraint bounds must be positive");
    if (kind == ConstraintKind::l2_ball && !(eps_norm > 0.0))
      throw ConfigError("l2_ball radius must be positive");
  }
};

struct SolveResult {
  CVec gamma;
  int iterations = 0;
  double residual = 0.0;  // projected gradient norm (box), |  ||gamma||^2 - eps | (ball)
};

struct BoxOptions {
  int max_interior_iterations = 200;
  int max_gradient_iterations = 100000;
  double tolerance = 1e-8;  // relative to 1 + ||b||
};

/// Energy change E(gamma) - E(0).
inline double energy_delta(const CMat& G, const CVec& b, const CVec& gamma) {
  return 2.0 * b.dot(gamma).real() + gamma.dot(G * gamma).real();
}

/// Gram matrix with its factorizations, shared by all carriers whose basis is
/// the same. Call prepare() before using it from several threads.
class QuadraticModel {
 public:
  QuadraticModel() = default;
  explicit QuadraticModel(CMat gram) : G_(std::move(gram)) {
    const Eigen::Index M = G_.rows();
    if (G_.cols() != M) throw ConfigError("QuadraticModel: Gram matrix must be square");
    G_ = (0.5 * (G_ + G_.adjoint())).eval();
    ridge_ = M > 0 ? 1e-12 * G_.trace().real() / static_cast<double>(M) : 0.0;
    if (!(ridge_ > 0.0)) ridge_ = std::numeric_limits<double>::min();
  }

  Eigen::Index size() const noexcept { return G_.rows(); }
  const CMat& gram() const noexcept { return G_; }
  double ridge() const noexcept { return ridge_; }

  CMat regularized() const { return G_ + ridge_ * CMat::Identity(size(), size()); }

  void prepare(ConstraintKind kind) {
    if (size() == 0) return;
    if (!llt_ready_) {
      llt_.compute(regularized());
      llt_ready_ = true;
    }
    if (kind == ConstraintKind::box && !lifted_ready_) {
      const CMat A = regularized();
      const Eigen::Index M = size();
      H_.resize(2 * M, 2 * M);
      H_.topLeftCorner(M, M) = 2.0 * A.real();
      H_.topRightCorner(M, M) = -2.0 * A.imag();
      H_.bottomLeftCorner(M, M) = 2.0 * A.imag();
      H_.bottomRightCorner(M, M) = 2.0 * A.real();
      H_ = (0.5 * (H_ + H_.transpose())).eval();
      lifted_ready_ = true;
    }
    if (kind == ConstraintKind::l2_ball && !eig_ready_) {
      eig_.compute(G_);
      eig_ready_ = true;
    }
  }

  /// gamma = -(G + lambda I)^{-1} b
  CVec solve_unconstrained(const CVec& b) const {
    if (b.size() != size()) throw ConfigError("solve_unconstrained: dimension mismatch");
    if (size() == 0) return CVec(0);
    if (!llt_ready_) {
      Eigen::LLT<CMat> llt(regularized());
      return -llt.solve(b);
    }
    return -llt_.solve(b);
  }

  /// Minimizes E subject to |Re gamma_j|, |Im gamma_j| <= bounds_j.
  SolveResult solve_box(const CVec& b, const RVec& bounds, const BoxOptions& opt = {}) const;

  /// Minimizes E subject to ||gamma||^2 <= eps.
  SolveResult solve_ball(const CVec& b, double eps) const;

 private:
  CMat G_;
  double ridge_ = 0.0;
  Eigen::LLT<CMat> llt_;
  bool llt_ready_ = false;
  RMat H_;
  bool lifted_ready_ = false;
  Eigen::SelfAdjointEigenSolver<CMat> eig_;
  bool eig_ready_ = false;

};

namespace detail {

inline RVec lift(const CVec& z) {
  RVec x(2 * z.size());
  x.head(z.size()) = z.real();
  x.tail(z.size()) = z.imag();
  return x;
}

inline CVec unlift(const RVec& x) {
  const Eigen::Index M = x.size() / 2;
  CVec z(M);
  for (Eigen::Index i = 0; i < M; ++i) z[i] = cplx(x[i], x[i + M]);
  return z;
}

inline double projected_gradient_norm(const RVec& x, const RVec& g, const RVec& lo, const RVec& hi) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double y = std::clamp(x[i] - g[i], lo[i], hi[i]);
    s += (x[i] - y) * (x[i] - y);
  }
  return std::sqrt(s);
}

}  // namespace detail

// Primal-dual interior point (Mehrotra predictor-corrector) on
//   min 1/2 x'Hx + c'x  s.t.  lo <= x <= hi,
// followed by an exact solve on the identified active set. Projected gradient
// is the last resort when neither meets the KKT tolerance.
class BoxSolver {
 public:
  BoxSolver(const RMat& H, const RVec& c, const RVec& lo, const RVec& hi)
      : H_(H), c_(c), lo_(lo), hi_(hi), n_(c.size()) {}

  SolveResult run(const BoxOptions& opt) {
    const double tol = opt.tolerance * (1.0 + 0.5 * c_.norm());
    const Eigen::Index n = n_;
    RVec x = 0.5 * (lo_ + hi_);
    RVec s1 = x - lo_, s2 = hi_ - x;
    const double zscale = std::max(1.0, c_.cwiseAbs().maxCoeff());
    RVec z1 = RVec::Constant(n, zscale), z2 = RVec::Constant(n, zscale);
    RVec best_x = x;
    double best_pg = std::numeric_limits<double>::infinity();
    int it = 0;
    Eigen::LLT<RMat> llt;
    RMat K(n, n);
    for (; it < opt.max_interior_iterations; ++it) {
      const RVec g = H_ * x + c_;
      const RVec rd = g - z1 + z2;
      const double mu = (s1.dot(z1) + s2.dot(z2)) / (2.0 * static_cast<double>(n));

      const RVec xc = x.cwiseMax(lo_).cwiseMin(hi_);
      const double pg = detail::projected_gradient_norm(xc, H_ * xc + c_, lo_, hi_);
      if (pg < best_pg) {
        best_pg = pg;
        best_x = xc;
      }
      if (pg <= tol) return {detail::unlift(xc), it, pg};
      if (it % 4 == 3 || mu < 1e-6 * zscale) {
        auto polished = polish(x, z1, z2, tol);
        if (polished) return {detail::unlift(*polished), it, last_polish_pg_};
      }

      const RVec d1 = z1.cwiseQuotient(s1), d2 = z2.cwiseQuotient(s2);
      K = H_;
      K.diagonal() += d1 + d2;
      llt.compute(K);
      if (llt.info() != Eigen::Success) break;

      // predictor: rhs = -rd - z1 + z2 + (complementarity terms) reduces to -g
      // for the affine direction, see derivation with sigma = 0.
      auto direction = [&](const RVec& r1, const RVec& r2, RVec& dx, RVec& dz1, RVec& dz2) {
        // s1 z1 + z1 dx + s1 dz1 = r1 ; s2 z2 - z2 dx + s2 dz2 = r2 (targets)
        const RVec rhs = -(rd + z1 - z2) + r1.cwiseQuotient(s1) - r2.cwiseQuotient(s2);
        dx = llt.solve(rhs);
        dz1 = (r1 - s1.cwiseProduct(z1) - z1.cwiseProduct(dx)).cwiseQuotient(s1);
        dz2 = (r2 - s2.cwiseProduct(z2) + z2.cwiseProduct(dx)).cwiseQuotient(s2);
      };
      auto max_step = [&](const RVec& dx, const RVec& dz1, const RVec& dz2) {
        double a = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (dx[i] < 0.0) a = std::min(a, -s1[i] / dx[i]);
          if (dx[i] > 0.0) a = std::min(a, s2[i] / dx[i]);
          if (dz1[i] < 0.0) a = std::min(a, -z1[i] / dz1[i]);
          if (dz2[i] < 0.0) a = std::min(a, -z2[i] / dz2[i]);
        }
        return a;
      };
      RVec dx, dz1, dz2;
      direction(RVec::Zero(n), RVec::Zero(n), dx, dz1, dz2);
      const double a_aff = max_step(dx, dz1, dz2);
      const double mu_aff = ((s1 + a_aff * dx).dot(z1 + a_aff * dz1) + (s2 - a_aff * dx).dot(z2 + a_aff * dz2)) /
                            (2.0 * static_cast<double>(n));
      const double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
      const RVec r1 = RVec::Constant(n, sigma * mu) - dx.cwiseProduct(dz1);
      const RVec r2 = RVec::Constant(n, sigma * mu) + dx.cwiseProduct(dz2);
      direction(r1, r2, dx, dz1, dz2);
      const double a = std::min(1.0, 0.995 * max_step(dx, dz1, dz2));
      x += a * dx;
      z1 += a * dz1;
      z2 += a * dz2;
      s1 = (x - lo_).cwiseMax(1e-300);
      s2 = (hi_ - x).cwiseMax(1e-300);
    }
    if (auto polished = polish(x, z1, z2, tol)) return {detail::unlift(*polished), it, last_polish_pg_};
    return projected_gradient(best_x, opt, tol, it);
  }

 private:
  // Fix every coordinate whose bound multiplier dominates its slack, solve the
  // free coordinates exactly and accept if the KKT test passes.
  std::optional<RVec> polish(const RVec& x, const RVec& z1, const RVec& z2, double tol) {
    const Eigen::Index n = n_;
    RVec y(n);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s1 = x[i] - lo_[i], s2 = hi_[i] - x[i];
      if (z1[i] > s1 && z1[i] > z2[i]) y[i] = lo_[i];
      else if (z2[i] > s2) y[i] = hi_[i];
      else free.push_back(i);
    }
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      RVec fixed = y;
      for (Eigen::Index i : free) fixed[i] = 0.0;
      const RVec Hx = H_ * fixed;
      RMat Hff(nf, nf);
      RVec rhs(nf);
      for (Eigen::Index r = 0; r < nf; ++r) {
        const Eigen::Index ir = free[static_cast<std::size_t>(r)];
        rhs[r] = -(c_[ir] + Hx[ir]);
        for (Eigen::Index q = 0; q < nf; ++q) Hff(r, q) = H_(ir, free[static_cast<std::size_t>(q)]);
      }
      Eigen::LLT<RMat> llt(Hff);
      if (llt.info() != Eigen::Success) return std::nullopt;
      const RVec yf = llt.solve(rhs);
      for (Eigen::Index r = 0; r < nf; ++r) {
        const Eigen::Index ir = free[static_cast<std::size_t>(r)];
        if (yf[r] < lo_[ir] || yf[r] > hi_[ir]) return std::nullopt;
        y[ir] = yf[r];
      }
    }
    last_polish_pg_ = detail::projected_gradient_norm(y, H_ * y + c_, lo_, hi_);
    if (last_polish_pg_ <= tol) return y;
    return std::nullopt;
  }

  SolveResult projected_gradient(RVec x, const BoxOptions& opt, double tol, int prior_its) const {
    // Step 1/lambda_max from a power iteration.
    RVec v = RVec::Ones(n_) / std::sqrt(static_cast<double>(n_));
    double lmax = 0.0;
    for (int i = 0; i < 100; ++i) {
      RVec w = H_ * v;
      lmax = w.norm();
      if (lmax == 0.0) break;
      v = w / lmax;
    }
    const double step = lmax > 0.0 ? 1.0 / lmax : 1.0;
    RVec g = H_ * x + c_;
    double pg = detail::projected_gradient_norm(x, g, lo_, hi_);
    int it = 0;
    for (; it < opt.max_gradient_iterations && pg > tol; ++it) {
      x = (x - step * g).cwiseMax(lo_).cwiseMin(hi_);
      g.noalias() = H_ * x;
      g += c_;
      pg = detail::projected_gradient_norm(x, g, lo_, hi_);
    }
    if (pg > tol)
      throw SolverError("box QP did not converge (projected gradient " + std::to_string(pg) + ")", pg,
                        prior_its + it);
    return {detail::unlift(x), prior_its + it, pg};
  }

  const RMat& H_;
  const RVec& c_;
  const RVec& lo_;
  const RVec& hi_;
  Eigen::Index n_;
  double last_polish_pg_ = 0.0;
};

inline SolveResult QuadraticModel::solve_box(const CVec& b, const RVec& bounds, const BoxOptions& opt) const {
  const Eigen::Index M = size();
  if (b.size() != M || bounds.size() != M) throw ConfigError("solve_box: dimension mismatch");
  if (M == 0) return {CVec(0), 0, 0.0};
  for (Eigen::Index i = 0; i < M; ++i)
    if (!(bounds[i] > 0.0)) throw ConfigError("solve_box: bounds must be positive");
  const CVec gu = solve_unconstrained(b);
  bool interior = true;
  for (Eigen::Index i = 0; i < M && interior; ++i)
    interior = std::abs(gu[i].real()) <= bounds[i] && std::abs(gu[i].imag()) <= bounds[i];
  if (interior) return {gu, 0, 0.0};

  RMat Hlocal;
  const RMat* H = &H_;
  if (!lifted_ready_) {
    const CMat A = regularized();
    Hlocal.resize(2 * M, 2 * M);
    Hlocal << 2.0 * A.real(), -2.0 * A.imag(), 2.0 * A.imag(), 2.0 * A.real();
    H = &Hlocal;
  }
  const RVec c = 2.0 * detail::lift(b);
  RVec hi(2 * M);
  hi << bounds, bounds;
  const RVec lo = -hi;
  BoxSolver solver(*H, c, lo, hi);
  return solver.run(opt);
}

inline SolveResult QuadraticModel::solve_ball(const CVec& b, double eps) const {
  const Eigen::Index M = size();
  if (b.size() != M) throw ConfigError("solve_ball: dimension mismatch");
  if (!(eps > 0.0)) throw ConfigError("solve_ball: radius must be positive");
  if (M == 0) return {CVec(0), 0, 0.0};
  const CVec gu = solve_unconstrained(b);
  if (gu.squaredNorm() <= eps) return {gu, 0, 0.0};

  Eigen::SelfAdjointEigenSolver<CMat> local;
  const Eigen::SelfAdjointEigenSolver<CMat>* es = &eig_;
  if (!eig_ready_) {
    local.compute(G_);
    es = &local;
  }
  if (es->info() != Eigen::Success) throw SolverError("l2_ball: eigendecomposition failed");
  const RVec lam = (es->eigenvalues().array().max(0.0) + ridge_).matrix();
  const CVec beta = es->eigenvectors().adjoint() * b;
  auto norm2 = [&](double mu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) s += std::norm(beta[i]) / ((lam[i] + mu) * (lam[i] + mu));
    return s;
  };
  double lo = 0.0;
  double hi = b.norm() / std::sqrt(eps);
  if (!(norm2(hi) <= eps * (1.0 + 1e-12)))
    throw SolverError("l2_ball: multiplier bracket does not contain the solution", norm2(hi) - eps, 0);
  int it = 0;
  for (; it < 2000 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (norm2(mid) > eps) lo = mid;
    else hi = mid;
  }
  CVec scaled(M);
  for (Eigen::Index i = 0; i < M; ++i) scaled[i] = beta[i] / (lam[i] + hi);
  return {-(es->eigenvectors() * scaled), it, std::abs(norm2(hi) - eps)};
}

// Convenience forms on an explicit basis.

inline QuadraticModel make_model(const CMat& pi, const CMat& phi_pi) { return QuadraticModel(pi.adjoint() * phi_pi); }

}  // namespace gpshape
