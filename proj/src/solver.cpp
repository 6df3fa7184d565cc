#include "hjb/solver.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>

namespace hjb {

void SolveOptions::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  if (!(step_tol > 0.0) || !(linear_tol > 0.0)) throw std::invalid_argument("step and linear tolerances must be positive");
  if (max_newton < 0) throw std::invalid_argument("max_newton must be nonnegative");
  if (!(damping > 0.0 && damping < 1.0)) throw std::invalid_argument("damping must lie in (0, 1)");
  if (fallback_tau && !(*fallback_tau > 0.0)) throw std::invalid_argument("fallback_tau must be positive");
}

namespace {

// b - A x accumulated in extended precision.
Eigen::VectorXd extended_residual(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  std::vector<long double> acc(b.data(), b.data() + b.size());
  for (int j = 0; j < a.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it)
      acc[it.row()] -= static_cast<long double>(it.value()) * static_cast<long double>(x(j));
  Eigen::VectorXd r(b.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = static_cast<double>(acc[i]);
  return r;
}

}  // namespace

Eigen::VectorXd linear_solve(const SparseMatrix& matrix, const Eigen::VectorXd& rhs, double rel_tol) {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("linear_solve: tolerance must be positive");
  if (matrix.rows() != matrix.cols()) throw std::invalid_argument("linear_solve: matrix is not square");
  if (matrix.rows() != rhs.size()) throw std::invalid_argument("linear_solve: size mismatch");
  if (rhs.size() == 0) return rhs;
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(rhs.size());

  SparseMatrix a = matrix;
  a.makeCompressed();
  // Symmetric diagonal equilibration of the factorized matrix.
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(a.rows());
  for (int j = 0; j < a.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it)
      if (it.row() == it.col() && it.value() != 0.0) scale(j) = 1.0 / std::sqrt(std::abs(it.value()));
  const SparseMatrix scaled = scale.asDiagonal() * a * scale.asDiagonal();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.analyzePattern(scaled);
  lu.factorize(scaled);
  if (lu.info() != Eigen::Success) throw std::runtime_error("linear_solve: matrix is singular (" + lu.lastErrorMessage() + ")");
  auto solve = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
    return scale.asDiagonal() * lu.solve(scale.asDiagonal() * b);
  };
  Eigen::VectorXd x = solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw std::runtime_error("linear_solve: factorization failed");
  Eigen::VectorXd r = extended_residual(a, x, rhs);
  for (int it = 0; it < 8 && r.norm() > rel_tol * bnorm; ++it) {
    x += solve(r);
    r = extended_residual(a, x, rhs);
  }
  if (!(r.norm() <= rel_tol * bnorm)) {
    double anorm = 0.0;
    for (int j = 0; j < a.outerSize(); ++j) anorm = std::max(anorm, a.col(j).norm());
    std::ostringstream msg;
    msg << "linear_solve: relative residual " << r.norm() / bnorm << " above " << rel_tol << "; condition estimate "
        << anorm * x.norm() / bnorm;
    throw std::runtime_error(msg.str());
  }
  return x;
}

namespace {

class DualNorm {
 public:
  explicit DualNorm(const SparseMatrix& gram) {
    ldlt_.compute(gram);
    if (ldlt_.info() != Eigen::Success) throw std::runtime_error("norm Gram matrix is not positive definite");
  }
  Eigen::VectorXd riesz(const Eigen::VectorXd& r) const { return ldlt_.solve(r); }
  double operator()(const Eigen::VectorXd& r) const { return std::sqrt(std::max(0.0, r.dot(riesz(r)))); }

 private:
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

}  // namespace

SolveResult solve_discrete(const NonlinearForm& form, const SolveOptions& opts,
                           const std::optional<DiscreteFunction>& initial) {
  opts.validate();
  const auto& space = form.space_ptr();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(space->dim());
  if (initial) {
    if (initial->space_ptr() != space && initial->coeffs().size() != space->dim())
      throw std::invalid_argument("initial guess lives on another space");
    u = initial->coeffs();
  }

  SolveStats stats;
  if (opts.check_monotonicity) {
    const MonotonicityReport mono = sample_monotonicity(form, opts.monotonicity_samples, opts.seed);
    if (!(mono.c_min > 0.0)) {
      std::ostringstream msg;
      msg << "sampled monotonicity constant " << mono.c_min << " is not positive; increase sigma and rho";
      throw SolveError(msg.str(), stats);
    }
  }
  if (space->dim() == 0) return {DiscreteFunction(space, u), stats};

  const DualNorm dual(form.norm_matrix());
  Eigen::VectorXd r = form.residual(u);
  double rnorm = dual(r);
  stats.residual_history.push_back(rnorm);

  auto finish = [&] {
    stats.final_residual = rnorm;
    return SolveResult{DiscreteFunction(space, u), stats};
  };
  if (rnorm <= opts.tol) return finish();

  // Increments below step_tol relative to u mean the residual sits at its
  // rounding floor.
  auto negligible = [&](const Eigen::VectorXd& increment) {
    return form.norm(increment) <= opts.step_tol * std::max(1.0, form.norm(u));
  };

  bool stalled = false;
  while (stats.newton_iters < opts.max_newton) {
    const Eigen::VectorXd step = linear_solve(form.jacobian(u), -r, opts.linear_tol);
    ++stats.newton_iters;
    double t = 1.0;
    bool accepted = false;
    for (int b = 0; b <= opts.max_backtracks; ++b, t *= opts.damping) {
      const Eigen::VectorXd trial = u + t * step;
      const Eigen::VectorXd rt = form.residual(trial);
      const double nt = dual(rt);
      if (nt < rnorm) {
        u = trial;
        r = rt;
        rnorm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (negligible(step)) {
        stats.stopped_at_rounding = true;
        return finish();
      }
      stalled = true;
      break;
    }
    stats.residual_history.push_back(rnorm);
    if (rnorm <= opts.tol) return finish();
    if (t == 1.0 && negligible(step)) {
      stats.stopped_at_rounding = true;
      return finish();
    }
  }

  if (!stalled && opts.max_newton > 0) throw SolveError("Newton iteration did not converge", finish().stats);

  // Fixed-point fallback u <- u - tau G^{-1} R(u), a contraction for
  // tau < 2c/C^2 by strong monotonicity and Lipschitz continuity.
  double tau = 0.0;
  if (opts.fallback_tau) {
    tau = *opts.fallback_tau;
  } else {
    const MonotonicityReport mono = sample_monotonicity(form, opts.monotonicity_samples, opts.seed);
    if (!(mono.c_min > 0.0)) throw SolveError("fallback step unavailable: sampled monotonicity constant not positive", stats);
    tau = mono.c_min / (mono.lipschitz * mono.lipschitz);
  }
  // Sampled constants can miss the extreme directions; halve tau whenever a
  // step fails to contract.
  constexpr int max_halvings = 30;
  int halvings = 0;
  while (stats.fallback_iters < opts.max_fallback) {
    const Eigen::VectorXd direction = dual.riesz(r);
    const Eigen::VectorXd increment = tau * direction;
    if (negligible(direction)) {
      stats.fallback_tau = tau;
      stats.stopped_at_rounding = true;
      return finish();
    }
    const Eigen::VectorXd trial = u - increment;
    const Eigen::VectorXd rt = form.residual(trial);
    const double next = dual(rt);
    if (!(next < rnorm)) {
      if (++halvings > max_halvings) {
        stats.fallback_tau = tau;
        throw SolveError("fixed-point fallback failed to reduce the residual", finish().stats);
      }
      tau *= 0.5;
      continue;
    }
    ++stats.fallback_iters;
    stats.contraction = std::max(stats.contraction, next / rnorm);
    u = trial;
    r = rt;
    rnorm = next;
    stats.residual_history.push_back(rnorm);
    if (rnorm <= opts.tol) {
      stats.fallback_tau = tau;
      return finish();
    }
  }
  stats.fallback_tau = tau;
  throw SolveError("fixed-point fallback did not converge", finish().stats);
}

}  // namespace hjb
