#pragma once

#include <Eigen/Core>

#include <vector>

namespace hjb {

enum class QuadratureDomain { triangle, segment };

/// Points and weights on the reference triangle {(0,0),(1,0),(0,1)} (area 1/2)
/// or the reference segment [0,1] (points stored as (t, 0)).
struct QuadratureRule {
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;
  int exactness = 0;

  int size() const { return static_cast<int>(weights.size()); }
};

/// Highest polynomial degree integrated exactly by the rules below.
inline constexpr int max_quadrature_exactness = 60;

/// Gauss-Legendre on the segment, collapsed (Duffy) Gauss-Legendre product
/// on the triangle. Throws std::invalid_argument for unsupported degrees.
QuadratureRule quadrature_rule(QuadratureDomain domain, int exactness);

/// n-point Gauss-Legendre nodes and weights on [0,1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace hjb
