#pragma once

#include "hjb/mesh.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hjb {

/// One control value: a label plus its parameters.
struct Control {
  std::string label;
  std::vector<double> params;
};

/// Finite samplings of the control spaces A and B.
struct ControlSet {
  std::vector<Control> alphas;
  std::vector<Control> betas;
};

using CoefficientFn = std::function<Eigen::Matrix2d(const Point2&, const Control&, const Control&)>;
using SourceFn = std::function<double(const Point2&, const Control&, const Control&)>;

struct ExactSolution {
  std::function<double(const Point2&)> value;
  std::function<Eigen::Vector2d(const Point2&)> gradient;
  std::function<Eigen::Matrix2d(const Point2&)> hessian;
};

/// inf_alpha sup_beta [a^{ab} : D^2 u - f^{ab}] = 0 in a convex polygon,
/// u = 0 on its boundary, with Cordes parameter `nu`.
struct ControlProblem {
  std::string name;
  std::vector<Point2> domain;
  ControlSet controls;
  CoefficientFn a;
  SourceFn f;
  double nu = 1.0;
  std::optional<ExactSolution> exact;

  void validate() const;
};

struct CordesReport {
  double nu_est = 0.0;
  double min_eigenvalue = 0.0;
  bool pass = false;
  Point2 worst_point = Point2::Zero();
  int worst_alpha = -1;
  int worst_beta = -1;
};

/// Samples (Tr a)^2/|a|^2 - 1 over points and all control pairs. Passes iff the
/// sampled minimum reaches `problem.nu` (up to 1e-12) and every sampled `a` is
/// positive definite. Non-symmetric `a` throws std::invalid_argument.
CordesReport verify_ellipticity_cordes(const ControlProblem& problem, std::span<const Point2> samples);

/// gamma(a) = Tr a / |a|_F^2. Throws std::invalid_argument for a = 0.
double gamma_eval(const Eigen::Matrix2d& a);

/// F_gamma at one point, with the optimal controls. `gamma` and `a` belong to
/// the recorded optimizers, so value = gamma (a : M - f) there.
struct PointwiseFG {
  double value = 0.0;
  int opt_alpha = -1;
  int opt_beta = -1;
  double gamma = 0.0;
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
};

/// inf over alphas of sup over betas of gamma (a : M - f); ties go to the
/// lowest index.
PointwiseFG f_gamma_eval(const ControlProblem& problem, const Point2& x, const Eigen::Matrix2d& hessian);

/// The operator without renormalization, inf sup [a : M - f].
double f_eval(const ControlProblem& problem, const Point2& x, const Eigen::Matrix2d& hessian);

/// Uniformly spread sample points inside the problem domain.
std::vector<Point2> interior_samples(const ControlProblem& problem, int per_direction);

}  // namespace hjb
