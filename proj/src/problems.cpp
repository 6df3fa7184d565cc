#include "hjb/problems.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hjb {

namespace {

constexpr double pi = std::numbers::pi;

std::vector<Point2> unit_square() { return {Point2(0, 0), Point2(1, 0), Point2(1, 1), Point2(0, 1)}; }

std::vector<Control> indexed_controls(int n, const std::string& prefix) {
  std::vector<Control> out;
  for (int i = 0; i < n; ++i) out.push_back({prefix + std::to_string(i), {static_cast<double>(i)}});
  return out;
}

double laplace_sine(const Point2& x) { return -2.0 * pi * pi * std::sin(pi * x.x()) * std::sin(pi * x.y()); }

// Sign-changing switch function.
double switch_g(const Point2& x) { return std::cos(pi * x.x()) * std::cos(pi * x.y()); }

BenchmarkProblem poisson_singleton() {
  ControlProblem p;
  p.name = "poisson_singleton";
  p.domain = unit_square();
  p.controls = {indexed_controls(1, "a"), indexed_controls(1, "b")};
  p.a = [](const Point2&, const Control&, const Control&) -> Eigen::Matrix2d { return Eigen::Matrix2d::Identity(); };
  p.f = [](const Point2& x, const Control&, const Control&) { return laplace_sine(x); };
  p.nu = 1.0;
  p.exact = sine_solution();
  return {p, "a = I, f = laplacian of sin(pi x) sin(pi y)"};
}

BenchmarkProblem two_control_switch() {
  ControlProblem p;
  p.name = "two_control_switch";
  p.domain = unit_square();
  p.controls = {indexed_controls(2, "a"), indexed_controls(2, "b")};
  p.a = [](const Point2&, const Control&, const Control&) -> Eigen::Matrix2d { return Eigen::Matrix2d::Identity(); };
  p.f = [](const Point2& x, const Control& alpha, const Control& beta) {
    return laplace_sine(x) - (alpha.params[0] - beta.params[0]) * switch_g(x);
  };
  p.nu = 1.0;
  p.exact = sine_solution();
  return {p, "a = I, f = lap u - (alpha - beta) cos(pi x) cos(pi y); inf sup (alpha - beta) g = 0"};
}

constexpr double anisotropy = 0.1;
constexpr int angles = 8;

BenchmarkProblem rotated_anisotropic() {
  constexpr double eps = anisotropy;
  ControlProblem p;
  p.name = "rotated_anisotropic";
  p.domain = unit_square();
  p.controls = {indexed_controls(angles, "a"), indexed_controls(2, "b")};
  auto coefficient = [](const Control& alpha) {
    const double t = pi * alpha.params[0] / angles;
    Eigen::Matrix2d r;
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return Eigen::Matrix2d(r.transpose() * Eigen::Vector2d(1.0, anisotropy).asDiagonal() * r);
  };
  p.a = [coefficient](const Point2&, const Control& alpha, const Control&) { return coefficient(alpha); };
  const ExactSolution u = sine_solution();
  p.f = [coefficient, u](const Point2& x, const Control& alpha, const Control& beta) {
    const Eigen::Matrix2d a = coefficient(alpha);
    const double gamma = a.trace() / a.squaredNorm();
    const double s = static_cast<int>(alpha.params[0]) % 2;
    return (a.array() * u.hessian(x).array()).sum() - (s - beta.params[0]) * switch_g(x) / gamma;
  };
  p.nu = 2.0 * eps / (1.0 + eps * eps);
  p.exact = u;
  return {p, "a = R^T diag(1, 0.1) R over 8 angles; f = a : D^2 u - (alpha mod 2 - beta) g / gamma"};
}

BenchmarkProblem homogeneous() {
  ControlProblem p;
  p.name = "homogeneous";
  p.domain = unit_square();
  p.controls = {indexed_controls(1, "a"), indexed_controls(1, "b")};
  p.a = [](const Point2&, const Control&, const Control&) -> Eigen::Matrix2d { return Eigen::Matrix2d::Identity(); };
  p.f = [](const Point2&, const Control&, const Control&) { return 0.0; };
  p.nu = 1.0;
  p.exact = ExactSolution{[](const Point2&) { return 0.0; }, [](const Point2&) { return Eigen::Vector2d::Zero().eval(); },
                          [](const Point2&) { return Eigen::Matrix2d::Zero().eval(); }};
  return {p, "a = I, f = 0, u = 0"};
}

}  // namespace

ExactSolution sine_solution() {
  ExactSolution u;
  u.value = [](const Point2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  u.gradient = [](const Point2& x) {
    return Eigen::Vector2d(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()),
                           pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
  };
  u.hessian = [](const Point2& x) {
    const double sx = std::sin(pi * x.x()), sy = std::sin(pi * x.y());
    const double cx = std::cos(pi * x.x()), cy = std::cos(pi * x.y());
    Eigen::Matrix2d h;
    h << -pi * pi * sx * sy, pi * pi * cx * cy, pi * pi * cx * cy, -pi * pi * sx * sy;
    return h;
  };
  return u;
}

std::vector<BenchmarkProblem> registry() {
  return {poisson_singleton(), two_control_switch(), rotated_anisotropic(), homogeneous()};
}

std::vector<std::string> registry_names() {
  std::vector<std::string> names;
  for (const auto& b : registry()) names.push_back(b.problem.name);
  return names;
}

ControlProblem make_problem(const std::string& name) {
  for (auto& b : registry())
    if (b.problem.name == name) return b.problem;
  std::string known;
  for (const auto& n : registry_names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown problem '" + name + "' (known: " + known + ")");
}

}  // namespace hjb
