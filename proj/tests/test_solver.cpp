#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hjb/problems.hpp"
#include "hjb/solver.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>

using hjb::Continuity;
using hjb::DiscreteFunction;

namespace {

std::shared_ptr<const hjb::FESpace> space_on(const hjb::MeshLevel& mesh, int p, Continuity s) {
  hjb::SpaceConfig c;
  c.p = p;
  c.s = s;
  return hjb::build_space(std::make_shared<const hjb::MeshLevel>(mesh), c);
}

hjb::NonlinearForm make_form(const std::string& name, std::shared_ptr<const hjb::FESpace> space) {
  return hjb::NonlinearForm(space, std::make_shared<const hjb::ControlProblem>(hjb::make_problem(name)),
                            hjb::FormParams::defaults(space->config()));
}

void check_history(const hjb::SolveStats& s) {
  for (std::size_t i = 1; i < s.residual_history.size(); ++i) CHECK(s.residual_history[i] < s.residual_history[i - 1]);
}

bool converged(const hjb::SolveStats& s, const hjb::SolveOptions& o) {
  return s.final_residual <= o.tol || s.stopped_at_rounding;
}

}  // namespace

TEST_CASE("linear_solve") {
  const int n = 6;
  hjb::SparseMatrix eye(n, n);
  eye.setIdentity();
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
  CHECK((hjb::linear_solve(eye, b) - b).norm() == 0.0);

  // DG mass matrix on a small mesh.
  const auto space = space_on(hjb::refine_uniform(hjb::unit_square_mesh(2), 2), 3, Continuity::dg);
  std::vector<Eigen::Triplet<double>> t;
  const auto& rule = space->volume_rule();
  for (int k = 0; k < space->mesh().num_elements(); ++k) {
    const auto dofs = space->element_dofs(k);
    for (int q = 0; q < rule.size(); ++q) {
      const auto v = space->eval_shape(k, rule.points[q], 0);
      const double w = rule.weights[q] * std::abs(space->geometry(k).det);
      for (int i = 0; i < space->local_size(); ++i)
        for (int j = 0; j < space->local_size(); ++j) t.emplace_back(dofs[i], dofs[j], w * v.value(i) * v.value(j));
    }
  }
  hjb::SparseMatrix mass(space->dim(), space->dim());
  mass.setFromTriplets(t.begin(), t.end());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd rhs(space->dim());
  for (int i = 0; i < rhs.size(); ++i) rhs(i) = normal(rng);
  const Eigen::VectorXd x = hjb::linear_solve(mass, rhs);
  CHECK((mass * x - rhs).norm() <= 1e-11 * rhs.norm());

  hjb::SparseMatrix singular(3, 3);
  singular.insert(0, 0) = 1.0;
  singular.insert(1, 1) = 1.0;
  singular.insert(2, 0) = 1.0;
  CHECK_THROWS_AS(hjb::linear_solve(singular, Eigen::Vector3d(1, 2, 3)), std::runtime_error);
  CHECK_THROWS_AS(hjb::linear_solve(hjb::SparseMatrix(2, 3), Eigen::Vector2d(1, 1)), std::invalid_argument);
}

TEST_CASE("option validation") {
  hjb::SolveOptions o;
  CHECK_NOTHROW(o.validate());
  o.tol = 0.0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = {};
  o.damping = 1.0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = {};
  o.fallback_tau = -1.0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
}

TEST_CASE("linear problem takes one Newton step") {
  for (auto s : {Continuity::dg, Continuity::c0}) {
    const auto space = space_on(hjb::unit_square_mesh(4), 2, s);
    const auto form = make_form("poisson_singleton", space);
    const hjb::SolveOptions opts;
    const auto result = hjb::solve_discrete(form, opts);
    CHECK(result.stats.newton_iters == 1);
    CHECK(result.stats.fallback_iters == 0);
    CHECK(converged(result.stats, opts));
    const Eigen::VectorXd r = form.residual(result.u.coeffs());
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-9);

    const auto zero = hjb::solve_discrete(make_form("homogeneous", space), opts);
    CHECK(zero.stats.newton_iters == 0);
    CHECK(zero.u.coeffs().norm() == 0.0);
  }
}

TEST_CASE("switching benchmarks over three levels") {
  hjb::MeshLevel mesh = hjb::unit_square_mesh(2);
  std::vector<double> norms;
  for (int level = 0; level < 3; ++level) {
    for (const std::string name : {"two_control_switch", "rotated_anisotropic"}) {
      CAPTURE(name);
      CAPTURE(level);
      const auto space = space_on(mesh, 2, Continuity::dg);
      const auto form = make_form(name, space);
      const hjb::SolveOptions opts;
      const auto result = hjb::solve_discrete(form, opts);
      CHECK(result.stats.newton_iters <= 15);
      CHECK(converged(result.stats, opts));
      check_history(result.stats);
      if (name == "two_control_switch") norms.push_back(hjb::norm_k(result.u));
      MESSAGE(name << " level " << level << ": " << result.stats.newton_iters << " Newton steps, residual "
                   << result.stats.final_residual);
    }
    mesh = hjb::refine_uniform(mesh, 2);
  }
  // Boundedness across levels (data norm: ||sin(pi x) sin(pi y)||_{H^2} < 11).
  for (double n : norms) CHECK(n <= 2.0 * norms[0] + 11.0);
}

TEST_CASE("solution is independent of the initial guess") {
  const auto space = space_on(hjb::refine_uniform(hjb::unit_square_mesh(2), 2), 2, Continuity::c0);
  const auto form = make_form("rotated_anisotropic", space);
  const hjb::SolveOptions opts;
  const auto a = hjb::solve_discrete(form, opts);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 10.0);
  Eigen::VectorXd guess(space->dim());
  for (int i = 0; i < guess.size(); ++i) guess(i) = normal(rng);
  const auto b = hjb::solve_discrete(form, opts, DiscreteFunction(space, guess));
  CHECK(form.norm(a.u.coeffs() - b.u.coeffs()) <= 10.0 * opts.tol);
  check_history(b.stats);
}

TEST_CASE("fixed-point fallback contracts") {
  const auto space = space_on(hjb::unit_square_mesh(2), 2, Continuity::dg);
  for (const std::string name : {"two_control_switch", "rotated_anisotropic"}) {
    CAPTURE(name);
    const auto form = make_form(name, space);
    hjb::SolveOptions opts;
    opts.max_newton = 0;
    opts.tol = 1e-8;
    opts.max_fallback = 5000;
    const auto fp = hjb::solve_discrete(form, opts);
    CHECK(fp.stats.newton_iters == 0);
    CHECK(fp.stats.fallback_iters > 0);
    CHECK(fp.stats.fallback_tau > 0.0);
    CHECK(fp.stats.contraction < 1.0);
    check_history(fp.stats);
    MESSAGE(name << ": tau " << fp.stats.fallback_tau << ", contraction " << fp.stats.contraction << ", "
                 << fp.stats.fallback_iters << " iterations");
    const auto newton = hjb::solve_discrete(form, hjb::SolveOptions{});
    CHECK(form.norm(fp.u.coeffs() - newton.u.coeffs()) <= 1e-6);
  }
}

TEST_CASE("failures carry statistics") {
  const auto space = space_on(hjb::unit_square_mesh(2), 2, Continuity::dg);
  const auto form = make_form("rotated_anisotropic", space);
  hjb::SolveOptions opts;
  opts.max_newton = 0;
  opts.max_fallback = 3;
  opts.fallback_tau = 1e-3;
  try {
    hjb::solve_discrete(form, opts);
    FAIL("expected SolveError");
  } catch (const hjb::SolveError& e) {
    CHECK(e.stats().fallback_iters == 3);
    CHECK(e.stats().residual_history.size() == 4);
  }

  // Sampled monotonicity check before solving.
  hjb::SolveOptions check;
  check.check_monotonicity = true;
  CHECK_NOTHROW(hjb::solve_discrete(form, check));
  const auto mono = hjb::sample_monotonicity(form, 20, 1);
  CHECK(mono.c_min > 0.0);
}
