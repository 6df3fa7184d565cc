#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hjb/quadrature.hpp"

#include <cmath>

using hjb::QuadratureDomain;

namespace {

// int over the reference triangle of x^a y^b = a! b! / (a + b + 2)!
double triangle_moment(int a, int b) {
  return std::exp(std::lgamma(a + 1.0) + std::lgamma(b + 1.0) - std::lgamma(a + b + 3.0));
}

double apply(const hjb::QuadratureRule& r, int a, int b) {
  double s = 0.0;
  for (int i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.points[i].x(), a) * std::pow(r.points[i].y(), b);
  return s;
}

}  // namespace

TEST_CASE("known moments") {
  const auto tri = hjb::quadrature_rule(QuadratureDomain::triangle, 4);
  CHECK(apply(tri, 1, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(apply(tri, 0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  const auto seg = hjb::quadrature_rule(QuadratureDomain::segment, 2);
  CHECK(apply(seg, 2, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("monomial sweep up to the declared exactness") {
  for (int deg = 0; deg <= 24; ++deg) {
    const auto tri = hjb::quadrature_rule(QuadratureDomain::triangle, deg);
    const auto seg = hjb::quadrature_rule(QuadratureDomain::segment, deg);
    CHECK(tri.exactness >= deg);
    CHECK(seg.exactness >= deg);
    for (double w : tri.weights) CHECK(w > 0.0);
    for (double w : seg.weights) CHECK(w > 0.0);
    for (const auto& x : tri.points) {
      CHECK(x.x() >= 0.0);
      CHECK(x.y() >= 0.0);
      CHECK(x.x() + x.y() <= 1.0);
    }
    for (int a = 0; a <= deg; ++a) {
      for (int b = 0; a + b <= deg; ++b) {
        const double exact = triangle_moment(a, b);
        CHECK(std::abs(apply(tri, a, b) - exact) <= 1e-13 * exact);
      }
      const double exact = 1.0 / (a + 1.0);
      CHECK(std::abs(apply(seg, a, 0) - exact) <= 1e-13 * exact);
    }
  }
}

TEST_CASE("largest supported degree") {
  const int deg = hjb::max_quadrature_exactness;
  const auto tri = hjb::quadrature_rule(QuadratureDomain::triangle, deg);
  for (int a : {0, deg / 2, deg}) {
    const double exact = triangle_moment(a, deg - a);
    CHECK(std::abs(apply(tri, a, deg - a) - exact) <= 1e-12 * exact);
  }
  CHECK_THROWS_AS(hjb::quadrature_rule(QuadratureDomain::triangle, deg + 1), std::invalid_argument);
  CHECK_THROWS_AS(hjb::quadrature_rule(QuadratureDomain::segment, -1), std::invalid_argument);
}

TEST_CASE("gauss legendre nodes") {
  std::vector<double> x, w;
  hjb::gauss_legendre(3, x, w);
  REQUIRE(x.size() == 3);
  CHECK(x[1] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(4.0 / 9.0));
  CHECK(x[0] == doctest::Approx(0.5 - 0.5 * std::sqrt(0.6)));
}
