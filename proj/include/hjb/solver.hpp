#pragma once

#include "hjb/forms.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjb {

struct SolveOptions {
  double tol = 1e-10;        // on the dual norm sqrt(R^T G^{-1} R), G the ||.||_k Gram matrix
  int max_newton = 50;       // 0: fixed-point iteration only
  double damping = 0.5;      // backtracking factor
  int max_backtracks = 10;
  double step_tol = 1e-8;    // relative ||.||_k size of a rejected increment treated as rounding noise
  double linear_tol = 1e-9;  // relative residual of the Newton linear solves
  std::optional<double> fallback_tau;  // auto when unset
  int max_fallback = 2000;
  bool check_monotonicity = false;
  int monotonicity_samples = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SolveStats {
  int newton_iters = 0;
  int fallback_iters = 0;
  double final_residual = 0.0;
  std::vector<double> residual_history;
  double fallback_tau = 0.0;  // step in use when the fallback ended
  double contraction = 0.0;  // largest observed fallback ratio
  bool stopped_at_rounding = false;  // tol not reached; the rejected increment was negligible
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, SolveStats stats) : std::runtime_error(what), stats_(std::move(stats)) {}
  const SolveStats& stats() const { return stats_; }

 private:
  SolveStats stats_;
};

struct SolveResult {
  DiscreteFunction u;
  SolveStats stats;
};

/// Semismooth Newton on A(u; .) = 0 with controls frozen at the current
/// iterate, backtracking on the dual residual norm, and a preconditioned
/// fixed-point fallback when Newton stalls.
SolveResult solve_discrete(const NonlinearForm& form, const SolveOptions& opts = {},
                           const std::optional<DiscreteFunction>& initial = std::nullopt);

/// Sparse direct solve of the equilibrated system with iterative refinement
/// (residuals in extended precision). Throws std::runtime_error if the matrix
/// is singular or the relative residual stays above rel_tol.
Eigen::VectorXd linear_solve(const SparseMatrix& matrix, const Eigen::VectorXd& rhs, double rel_tol = 1e-11);

}  // namespace hjb
