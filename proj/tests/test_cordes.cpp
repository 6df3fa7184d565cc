#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hjb/cordes.hpp"
#include "hjb/problems.hpp"

#include <cmath>
#include <random>

using hjb::Control;
using hjb::ControlProblem;
using hjb::Point2;

namespace {

ControlProblem constant_problem(const Eigen::Matrix2d& a, double f, int n_alpha = 1, int n_beta = 1) {
  ControlProblem p;
  p.name = "constant";
  p.domain = {Point2(0, 0), Point2(1, 0), Point2(1, 1), Point2(0, 1)};
  for (int i = 0; i < n_alpha; ++i) p.controls.alphas.push_back({"a", {double(i)}});
  for (int i = 0; i < n_beta; ++i) p.controls.betas.push_back({"b", {double(i)}});
  p.a = [a](const Point2&, const Control&, const Control&) { return a; };
  p.f = [f](const Point2&, const Control&, const Control&) { return f; };
  return p;
}

Eigen::Matrix2d random_symmetric(std::mt19937_64& rng, double scale = 5.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::Matrix2d m;
  m(0, 0) = n(rng);
  m(1, 1) = n(rng);
  m(0, 1) = m(1, 0) = n(rng);
  return m;
}

}  // namespace

TEST_CASE("gamma") {
  CHECK(hjb::gamma_eval(Eigen::Matrix2d::Identity()) == doctest::Approx(1.0));
  CHECK(hjb::gamma_eval(Eigen::Vector2d(2, 1).asDiagonal().toDenseMatrix()) == doctest::Approx(0.6));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    Eigen::Matrix2d a = random_symmetric(rng);
    a = a * a.transpose() + 0.1 * Eigen::Matrix2d::Identity();
    CHECK(hjb::gamma_eval(a) > 0.0);
    for (double t : {0.5, 3.0, 17.0}) CHECK(hjb::gamma_eval(t * a) == doctest::Approx(hjb::gamma_eval(a) / t));
  }
  CHECK_THROWS_AS(hjb::gamma_eval(Eigen::Matrix2d::Zero()), std::invalid_argument);
}

TEST_CASE("ellipticity and Cordes sampling") {
  const std::vector<Point2> pts{Point2(0.2, 0.3), Point2(0.7, 0.5)};
  auto id = constant_problem(Eigen::Matrix2d::Identity(), 0.0);
  auto r = hjb::verify_ellipticity_cordes(id, pts);
  CHECK(r.nu_est == doctest::Approx(1.0));
  CHECK(r.pass);

  auto aniso = constant_problem(Eigen::Vector2d(1, 0.1).asDiagonal().toDenseMatrix(), 0.0);
  aniso.nu = 2 * 0.1 / 1.01;
  r = hjb::verify_ellipticity_cordes(aniso, pts);
  CHECK(r.nu_est == doctest::Approx(2 * 0.1 / 1.01).epsilon(1e-14));
  CHECK(r.pass);
  aniso.nu = 0.2;
  CHECK_FALSE(hjb::verify_ellipticity_cordes(aniso, pts).pass);

  auto degenerate = constant_problem(Eigen::Vector2d(1, 0).asDiagonal().toDenseMatrix(), 0.0);
  r = hjb::verify_ellipticity_cordes(degenerate, pts);
  CHECK_FALSE(r.pass);
  CHECK(r.nu_est <= 1e-14);

  Eigen::Matrix2d skew;
  skew << 1, 0.2, 0, 1;
  CHECK_THROWS_AS(hjb::verify_ellipticity_cordes(constant_problem(skew, 0.0), pts), std::invalid_argument);
  CHECK_THROWS_AS(hjb::verify_ellipticity_cordes(id, std::vector<Point2>{}), std::invalid_argument);
}

TEST_CASE("pointwise F_gamma") {
  const auto p = constant_problem(Eigen::Matrix2d::Identity(), 0.0);
  const auto v = hjb::f_gamma_eval(p, Point2(0.5, 0.5), Eigen::Matrix2d::Identity());
  CHECK(v.value == doctest::Approx(2.0));
  CHECK(v.gamma == doctest::Approx(1.0));
  CHECK(v.opt_alpha == 0);
  CHECK(v.opt_beta == 0);

  // Identical controls tie everywhere; the lowest index wins.
  const auto tied = constant_problem(2.0 * Eigen::Matrix2d::Identity(), 1.0, 3, 4);
  const auto t = hjb::f_gamma_eval(tied, Point2(0.1, 0.9), Eigen::Matrix2d::Identity());
  CHECK(t.opt_alpha == 0);
  CHECK(t.opt_beta == 0);
  CHECK(t.value == doctest::Approx(0.5 * (4.0 - 1.0)));

  auto empty = p;
  empty.controls.betas.clear();
  CHECK_THROWS(hjb::f_gamma_eval(empty, Point2(0.5, 0.5), Eigen::Matrix2d::Identity()));
}

TEST_CASE("inf sup with explicit controls") {
  // a = c I per beta, f per (alpha, beta): direct enumeration oracle.
  ControlProblem p = constant_problem(Eigen::Matrix2d::Identity(), 0.0, 3, 2);
  p.a = [](const Point2&, const Control&, const Control& b) -> Eigen::Matrix2d {
    return (1.0 + b.params[0]) * Eigen::Matrix2d::Identity();
  };
  p.f = [](const Point2& x, const Control& a, const Control& b) { return a.params[0] * x.x() - 2.0 * b.params[0]; };
  std::mt19937_64 rng(2);
  for (int s = 0; s < 50; ++s) {
    const Eigen::Matrix2d m = random_symmetric(rng);
    const Point2 x(0.3, 0.6);
    double inf = 1e300;
    int arg_a = -1, arg_b = -1;
    for (int a = 0; a < 3; ++a) {
      double sup = -1e300;
      int best_b = -1;
      for (int b = 0; b < 2; ++b) {
        const double c = 1.0 + b;
        const double value = (1.0 / c) * (c * m.trace() - (a * x.x() - 2.0 * b));
        if (value > sup) sup = value, best_b = b;
      }
      if (sup < inf) inf = sup, arg_a = a, arg_b = best_b;
    }
    const auto v = hjb::f_gamma_eval(p, x, m);
    CHECK(v.value == doctest::Approx(inf).epsilon(1e-13));
    CHECK(v.opt_alpha == arg_a);
    CHECK(v.opt_beta == arg_b);
    CHECK(v.value == doctest::Approx(v.gamma * ((v.a.array() * m.array()).sum() - p.f(x, p.controls.alphas[v.opt_alpha],
                                                                                   p.controls.betas[v.opt_beta]))));
  }
}

TEST_CASE("registry problems") {
  const auto names = hjb::registry_names();
  CHECK(names == std::vector<std::string>{"poisson_singleton", "two_control_switch", "rotated_anisotropic", "homogeneous"});
  try {
    hjb::make_problem("nope");
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("two_control_switch") != std::string::npos);
  }

  const auto aniso = hjb::make_problem("rotated_anisotropic");
  CHECK(aniso.nu == doctest::Approx(0.19802).epsilon(1e-5));
  CHECK(aniso.controls.alphas.size() == 8);
  CHECK(aniso.controls.betas.size() == 2);

  for (const auto& b : hjb::registry()) {
    const auto& p = b.problem;
    CAPTURE(p.name);
    CHECK_NOTHROW(p.validate());
    const auto samples = hjb::interior_samples(p, 9);
    const auto r = hjb::verify_ellipticity_cordes(p, samples);
    CHECK(r.pass);
    CHECK(r.min_eigenvalue > 0.0);
    REQUIRE(p.exact.has_value());
    for (const auto& x : samples) {
      // The exact solution satisfies the equation pointwise.
      CHECK(std::abs(hjb::f_gamma_eval(p, x, p.exact->hessian(x)).value) < 1e-10);
      CHECK(std::abs(hjb::f_eval(p, x, p.exact->hessian(x))) < 1e-10);
      const Point2 y = x + Point2(1e-6, -2e-6);
      CHECK(p.exact->value(y) - p.exact->value(x) ==
            doctest::Approx(p.exact->gradient(x).dot(y - x)).epsilon(1e-4));
    }
    for (const auto& x : p.domain) CHECK(std::abs(p.exact->value(x)) < 1e-14);
  }
}

TEST_CASE("switching problem is zero at the exact Hessian where g > 0") {
  const auto p = hjb::make_problem("two_control_switch");
  const auto u = hjb::sine_solution();
  for (const Point2 x : {Point2(0.1, 0.2), Point2(0.8, 0.9), Point2(0.25, 0.3)}) {
    REQUIRE(std::cos(M_PI * x.x()) * std::cos(M_PI * x.y()) > 0.0);
    CHECK(std::abs(hjb::f_gamma_eval(p, x, u.hessian(x)).value) < 1e-12);
  }
}

TEST_CASE("Cordes bounds and sign equivalence at random samples") {
  std::mt19937_64 rng(7);
  const double lipschitz = 1.0 + std::sqrt(3.0);
  for (const auto& b : hjb::registry()) {
    const auto& p = b.problem;
    CAPTURE(p.name);
    const auto samples = hjb::interior_samples(p, 5);
    int worst = 0;
    for (const auto& x : samples) {
      for (int s = 0; s < 40; ++s) {
        const Eigen::Matrix2d m = random_symmetric(rng), n = random_symmetric(rng);
        const double fm = hjb::f_gamma_eval(p, x, m).value;
        const double fn = hjb::f_gamma_eval(p, x, n).value;
        const double d = (m - n).norm();
        const double lhs = std::abs(fm - fn - (m - n).trace());
        worst += lhs > std::sqrt(1.0 - p.nu) * d + 1e-12;
        CHECK(std::abs(fm - fn) <= lipschitz * d + 1e-12);
        const double raw = hjb::f_eval(p, x, m);
        CHECK((raw <= 0.0) == (fm <= 0.0));
      }
    }
    CHECK(worst == 0);
  }
}
