#include "hjb/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hjb {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Map [-1,1] -> [0,1].
    nodes[i] = 0.5 * (1.0 - x);
    nodes[n - 1 - i] = 0.5 * (1.0 + x);
    weights[i] = weights[n - 1 - i] = 0.5 * w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.5;
}

QuadratureRule quadrature_rule(QuadratureDomain domain, int exactness) {
  if (exactness < 0 || exactness > max_quadrature_exactness)
    throw std::invalid_argument("unsupported quadrature exactness " + std::to_string(exactness));

  QuadratureRule rule;
  rule.exactness = exactness;
  std::vector<double> x, w;
  if (domain == QuadratureDomain::segment) {
    gauss_legendre(exactness / 2 + 1, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      rule.points.emplace_back(x[i], 0.0);
      rule.weights.push_back(w[i]);
    }
    return rule;
  }

  // (u, v) in [0,1]^2 -> (u, (1-u) v), Jacobian (1-u) adds one degree in u.
  std::vector<double> xu, wu;
  gauss_legendre((exactness + 1) / 2 + 1, xu, wu);
  gauss_legendre(exactness / 2 + 1, x, w);
  for (std::size_t i = 0; i < xu.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      rule.points.emplace_back(xu[i], (1.0 - xu[i]) * x[j]);
      rule.weights.push_back(wu[i] * w[j] * (1.0 - xu[i]));
    }
  }
  return rule;
}

}  // namespace hjb
