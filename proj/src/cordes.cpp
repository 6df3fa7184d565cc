#include "hjb/cordes.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hjb {

void ControlProblem::validate() const {
  if (controls.alphas.empty() || controls.betas.empty())
    throw std::invalid_argument("control sets must be nonempty");
  if (!a || !f) throw std::invalid_argument("coefficient and source functions are required");
  if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("Cordes parameter nu must lie in (0, 1]");
}

double gamma_eval(const Eigen::Matrix2d& a) {
  const double norm2 = a.squaredNorm();
  if (!(norm2 > 0.0)) throw std::invalid_argument("gamma_eval: zero coefficient matrix");
  return a.trace() / norm2;
}

CordesReport verify_ellipticity_cordes(const ControlProblem& problem, std::span<const Point2> samples) {
  if (samples.empty()) throw std::invalid_argument("verify_ellipticity_cordes: no sample points");
  if (problem.controls.alphas.empty() || problem.controls.betas.empty())
    throw std::invalid_argument("verify_ellipticity_cordes: empty control set");

  struct Where {
    Point2 x = Point2::Zero();
    int alpha = -1, beta = -1;
  } worst_ratio, worst_eig;

  CordesReport report;
  report.nu_est = std::numeric_limits<double>::infinity();
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  const auto& alphas = problem.controls.alphas;
  const auto& betas = problem.controls.betas;
  for (const Point2& x : samples) {
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      for (std::size_t j = 0; j < betas.size(); ++j) {
        const Eigen::Matrix2d a = problem.a(x, alphas[i], betas[j]);
        if (std::abs(a(0, 1) - a(1, 0)) > 1e-12 * (1.0 + a.norm()))
          throw std::invalid_argument("coefficient matrix is not symmetric");
        const double lambda_min = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(a, Eigen::EigenvaluesOnly)
                                      .eigenvalues()
                                      .minCoeff();
        const double norm2 = a.squaredNorm();
        const double ratio = norm2 > 0.0 ? a.trace() * a.trace() / norm2 - 1.0 : -1.0;
        const Where here{x, static_cast<int>(i), static_cast<int>(j)};
        if (ratio < report.nu_est) {
          report.nu_est = ratio;
          worst_ratio = here;
        }
        if (lambda_min < report.min_eigenvalue) {
          report.min_eigenvalue = lambda_min;
          worst_eig = here;
        }
      }
    }
  }
  const bool elliptic = report.min_eigenvalue > 0.0;
  report.pass = elliptic && report.nu_est >= problem.nu - 1e-12;
  const Where& w = elliptic ? worst_ratio : worst_eig;
  report.worst_point = w.x;
  report.worst_alpha = w.alpha;
  report.worst_beta = w.beta;
  return report;
}

PointwiseFG f_gamma_eval(const ControlProblem& problem, const Point2& x, const Eigen::Matrix2d& hessian) {
  const auto& alphas = problem.controls.alphas;
  const auto& betas = problem.controls.betas;
  if (alphas.empty() || betas.empty()) throw std::invalid_argument("f_gamma_eval: empty control set");

  PointwiseFG best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    PointwiseFG inner;
    inner.value = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < betas.size(); ++j) {
      const Eigen::Matrix2d a = problem.a(x, alphas[i], betas[j]);
      const double g = gamma_eval(a);
      const double v = g * ((a.array() * hessian.array()).sum() - problem.f(x, alphas[i], betas[j]));
      if (v > inner.value) {
        inner = {v, static_cast<int>(i), static_cast<int>(j), g, a};
      }
    }
    if (inner.value < best.value) best = inner;
  }
  return best;
}

double f_eval(const ControlProblem& problem, const Point2& x, const Eigen::Matrix2d& hessian) {
  const auto& alphas = problem.controls.alphas;
  const auto& betas = problem.controls.betas;
  if (alphas.empty() || betas.empty()) throw std::invalid_argument("f_eval: empty control set");
  double best = std::numeric_limits<double>::infinity();
  for (const Control& alpha : alphas) {
    double inner = -std::numeric_limits<double>::infinity();
    for (const Control& beta : betas) {
      const Eigen::Matrix2d a = problem.a(x, alpha, beta);
      inner = std::max(inner, (a.array() * hessian.array()).sum() - problem.f(x, alpha, beta));
    }
    best = std::min(best, inner);
  }
  return best;
}

std::vector<Point2> interior_samples(const ControlProblem& problem, int per_direction) {
  if (problem.domain.size() < 3) throw std::invalid_argument("problem domain is not a polygon");
  Point2 lo = problem.domain.front(), hi = problem.domain.front();
  for (const Point2& p : problem.domain) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const std::size_t n = problem.domain.size();
  double orient = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = problem.domain[i];
    const Point2& b = problem.domain[(i + 1) % n];
    orient += a.x() * b.y() - b.x() * a.y();
  }
  auto inside = [&](const Point2& q) {
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 e = problem.domain[(i + 1) % n] - problem.domain[i];
      const Point2 d = q - problem.domain[i];
      if (orient * (e.x() * d.y() - e.y() * d.x()) <= 0.0) return false;
    }
    return true;
  };
  std::vector<Point2> out;
  for (int i = 0; i < per_direction; ++i) {
    for (int j = 0; j < per_direction; ++j) {
      const Point2 q(lo.x() + (hi.x() - lo.x()) * (i + 0.5) / per_direction,
                     lo.y() + (hi.y() - lo.y()) * (j + 0.5) / per_direction);
      if (inside(q)) out.push_back(q);
    }
  }
  return out;
}

}  // namespace hjb
