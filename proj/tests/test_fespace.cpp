#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hjb/fespace.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using hjb::Continuity;
using hjb::Point2;
using hjb::SpaceConfig;

namespace {

std::shared_ptr<const hjb::MeshLevel> square(int n) {
  return std::make_shared<const hjb::MeshLevel>(hjb::unit_square_mesh(n));
}

std::shared_ptr<const hjb::MeshLevel> perturbed_mesh() {
  auto m = hjb::refine_uniform(hjb::unit_square_mesh(2), 2);
  std::vector<int> marked{0, 3, 7};
  m = hjb::refine_conforming(m, marked);
  return std::make_shared<const hjb::MeshLevel>(m);
}

SpaceConfig config(int p, Continuity s) {
  SpaceConfig c;
  c.p = p;
  c.s = s;
  return c;
}

// M_ij = int phi_i phi_j
Eigen::MatrixXd mass_matrix(const hjb::FESpace& space) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(space.dim(), space.dim());
  const auto& rule = space.volume_rule();
  for (int k = 0; k < space.mesh().num_elements(); ++k) {
    const auto dofs = space.element_dofs(k);
    for (int q = 0; q < rule.size(); ++q) {
      const auto b = space.eval_shape(k, rule.points[q], 0);
      const double w = rule.weights[q] * std::abs(space.geometry(k).det);
      for (int i = 0; i < space.local_size(); ++i)
        for (int j = 0; j < space.local_size(); ++j)
          if (dofs[i] >= 0 && dofs[j] >= 0) m(dofs[i], dofs[j]) += w * b.value(i) * b.value(j);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("space dimensions") {
  const auto mesh = square(1);
  CHECK(hjb::build_space(mesh, config(2, Continuity::dg))->dim() == 12);
  CHECK(hjb::build_space(mesh, config(2, Continuity::c0))->dim() == 1);
  CHECK_THROWS_AS(hjb::build_space(mesh, config(1, Continuity::dg)), std::invalid_argument);
  SpaceConfig bad_q = config(4, Continuity::dg);
  bad_q.q = 1;
  CHECK_THROWS_AS(bad_q.validate(), std::invalid_argument);

  const auto m4 = square(4);
  for (int p = 2; p <= 4; ++p) {
    CHECK(hjb::build_space(m4, config(p, Continuity::dg))->dim() == m4->num_elements() * (p + 1) * (p + 2) / 2);
    // Interior Lagrange nodes of the structured grid: (4p - 1)^2.
    CHECK(hjb::build_space(m4, config(p, Continuity::c0))->dim() == (4 * p - 1) * (4 * p - 1));
  }
}

TEST_CASE("reference basis identities") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto mesh = perturbed_mesh();
  for (int p = 2; p <= 4; ++p) {
    const auto space = hjb::build_space(mesh, config(p, Continuity::c0));
    const auto lagrange = hjb::ReferenceBasis::lagrange(p);
    for (int trial = 0; trial < 5; ++trial) {
      double a = u(rng), b = u(rng);
      if (a + b > 1) a = 1 - a, b = 1 - b;
      hjb::BasisValues v;
      lagrange.evaluate(Eigen::Vector2d(a, b), 2, v);
      CHECK(v.value.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(v.grad.colwise().sum().norm() < 1e-10);
      CHECK(v.hess.colwise().sum().norm() < 1e-8);
    }
    for (std::size_t i = 0; i < lagrange.nodes().size(); ++i) {
      hjb::BasisValues v;
      lagrange.evaluate(lagrange.nodes()[i], 0, v);
      for (int j = 0; j < lagrange.size(); ++j) CHECK(v.value(j) == doctest::Approx(i == std::size_t(j) ? 1.0 : 0.0));
    }
  }
  CHECK_THROWS(hjb::build_space(square(1), config(2, Continuity::dg))->eval_shape(0, Eigen::Vector2d(0.2, 0.2), 3));
}

TEST_CASE("orthonormal basis on the reference triangle") {
  const auto b = hjb::ReferenceBasis::orthonormal(4);
  const auto rule = hjb::quadrature_rule(hjb::QuadratureDomain::triangle, 10);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(b.size(), b.size());
  for (int q = 0; q < rule.size(); ++q) {
    hjb::BasisValues v;
    b.evaluate(rule.points[q], 0, v);
    g += rule.weights[q] * v.value * v.value.transpose();
  }
  CHECK((g - Eigen::MatrixXd::Identity(b.size(), b.size())).norm() < 1e-10);
}

TEST_CASE("physical derivatives match finite differences") {
  const auto mesh = perturbed_mesh();
  const double h = 1e-5;
  for (auto s : {Continuity::dg, Continuity::c0}) {
    for (int p = 2; p <= 3; ++p) {
      const auto space = hjb::build_space(mesh, config(p, s));
      for (int k : {0, 5, mesh->num_elements() - 1}) {
        const auto& g = space->geometry(k);
        const Eigen::Vector2d xi(0.3, 0.25);
        const auto v = space->eval_shape(k, xi, 2);
        for (int d = 0; d < 2; ++d) {
          const Eigen::Vector2d dx = h * Eigen::Vector2d::Unit(d);
          const Eigen::Vector2d dxi = g.inverse * dx;
          const auto plus = space->eval_shape(k, xi + dxi, 1);
          const auto minus = space->eval_shape(k, xi - dxi, 1);
          const Eigen::VectorXd fd_value = (plus.value - minus.value) / (2 * h);
          const Eigen::MatrixX2d fd_grad = (plus.grad - minus.grad) / (2 * h);
          CHECK((fd_value - v.grad.col(d)).norm() <= 1e-6 * (1 + v.grad.norm()));
          // Row d of the Hessian: (xx, xy) for d = 0, (xy, yy) for d = 1.
          const Eigen::VectorXd hd0 = v.hess.col(d == 0 ? 0 : 1);
          const Eigen::VectorXd hd1 = v.hess.col(d == 0 ? 1 : 2);
          CHECK((fd_grad.col(0) - hd0).norm() <= 1e-6 * (1 + v.hess.norm()));
          CHECK((fd_grad.col(1) - hd1).norm() <= 1e-6 * (1 + v.hess.norm()));
        }
      }
    }
  }
}

TEST_CASE("second derivatives of quadratics are constant") {
  const auto space = hjb::build_space(perturbed_mesh(), config(2, Continuity::dg));
  const auto a = space->eval_shape(2, Eigen::Vector2d(0.1, 0.1), 2);
  const auto b = space->eval_shape(2, Eigen::Vector2d(0.6, 0.3), 2);
  const auto c = space->eval_shape(2, Eigen::Vector2d(0.2, 0.7), 2);
  CHECK((a.hess - b.hess).norm() < 1e-9 * a.hess.norm());
  CHECK((a.hess - c.hess).norm() < 1e-9 * a.hess.norm());
}

TEST_CASE("continuity of C0 traces") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto mesh = perturbed_mesh();
  for (int p = 2; p <= 4; ++p) {
    const auto space = hjb::build_space(mesh, config(p, Continuity::c0));
    Eigen::VectorXd c(space->dim());
    for (int i = 0; i < c.size(); ++i) c(i) = n(rng);
    const hjb::DiscreteFunction v(space, c);
    double mismatch = 0.0, boundary = 0.0;
    const auto& rule = space->face_rule();
    for (const auto& f : mesh->faces()) {
      const Point2 a = mesh->vertices()[f.vertices[0]];
      const Point2 b = mesh->vertices()[f.vertices[1]];
      for (const auto& t : rule.points) {
        const Point2 x = a + t.x() * (b - a);
        const double v0 = v.evaluate(f.elements[0], space->geometry(f.elements[0]).to_reference(x), 0).value;
        if (f.is_interior()) {
          const double v1 = v.evaluate(f.elements[1], space->geometry(f.elements[1]).to_reference(x), 0).value;
          mismatch = std::max(mismatch, std::abs(v0 - v1));
        } else {
          boundary = std::max(boundary, std::abs(v0));
        }
      }
    }
    CHECK(mismatch <= 1e-10);
    CHECK(boundary <= 1e-10);
  }
}

TEST_CASE("L2 projection") {
  const auto mesh = perturbed_mesh();
  for (auto s : {Continuity::dg, Continuity::c0}) {
    const auto space = hjb::build_space(mesh, config(3, s));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd c(space->dim());
    for (int i = 0; i < c.size(); ++i) c(i) = n(rng);
    const hjb::DiscreteFunction v(space, c);
    // Reproduce a member of the space, evaluated through element lookup.
    const auto in_space = [&](const Point2& x) {
      for (int k = 0; k < mesh->num_elements(); ++k) {
        const Eigen::Vector2d xi = space->geometry(k).to_reference(x);
        if (xi.x() >= -1e-12 && xi.y() >= -1e-12 && xi.sum() <= 1 + 1e-12) return v.evaluate(k, xi, 0).value;
      }
      return 0.0;
    };
    const auto pv = hjb::project_l2(space, in_space);
    CHECK((pv.coeffs() - c).norm() <= 1e-12 * c.norm() * 10);

    const Eigen::MatrixXd m = mass_matrix(*space);
    CHECK((m - m.transpose()).norm() < 1e-14 * m.norm());
    CHECK(Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success);
  }

  const auto dg = hjb::build_space(mesh, config(2, Continuity::dg));
  const auto px = hjb::project_l2(dg, [](const Point2& x) { return x.x(); });
  for (int k = 0; k < mesh->num_elements(); ++k) {
    const Eigen::Vector2d xi(0.2, 0.3);
    CHECK(px.evaluate(k, xi, 0).value == doctest::Approx(dg->geometry(k).to_physical(xi).x()).epsilon(1e-12));
  }

  // Galerkin orthogonality of sin(pi x).
  const auto f = [](const Point2& x) { return std::sin(std::numbers::pi * x.x()); };
  const auto pf = hjb::project_l2(dg, f);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(dg->dim());
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(dg->dim());
  const auto& rule = dg->volume_rule();
  for (int k = 0; k < mesh->num_elements(); ++k) {
    const auto dofs = dg->element_dofs(k);
    for (int q = 0; q < rule.size(); ++q) {
      const auto b = dg->eval_shape(k, rule.points[q], 0);
      const double w = rule.weights[q] * std::abs(dg->geometry(k).det);
      const double fx = f(dg->geometry(k).to_physical(rule.points[q]));
      const double e = fx - pf.evaluate(k, rule.points[q], 0).value;
      for (int i = 0; i < dg->local_size(); ++i) {
        r(dofs[i]) += w * e * b.value(i);
        scale(dofs[i]) += w * std::abs(fx * b.value(i));
      }
    }
  }
  CHECK(r.cwiseAbs().maxCoeff() <= 1e-10 * scale.maxCoeff());
}

TEST_CASE("transfer to a refined mesh") {
  const auto coarse_mesh = perturbed_mesh();
  const auto fine_mesh = std::make_shared<const hjb::MeshLevel>(hjb::refine_conforming(*coarse_mesh, std::vector<int>{1, 2}));
  for (auto s : {Continuity::dg, Continuity::c0}) {
    const auto coarse = hjb::build_space(coarse_mesh, config(3, s));
    const auto fine = hjb::build_space(fine_mesh, config(3, s));
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd c(coarse->dim());
    for (int i = 0; i < c.size(); ++i) c(i) = n(rng);
    const hjb::DiscreteFunction v(coarse, c);
    const auto w = hjb::transfer(v, fine);
    for (int k = 0; k < fine_mesh->num_elements(); ++k) {
      const int parent = *fine_mesh->elements()[k].parent;
      const Eigen::Vector2d xi(0.25, 0.4);
      const Point2 x = fine->geometry(k).to_physical(xi);
      CHECK(w.evaluate(k, xi, 0).value ==
            doctest::Approx(v.evaluate(parent, coarse->geometry(parent).to_reference(x), 0).value).epsilon(1e-10));
    }
  }
}

TEST_CASE("function export") {
  const auto space = hjb::build_space(square(1), config(2, Continuity::dg));
  const auto v = hjb::project_l2(space, [](const Point2& x) { return x.x() + x.y(); });
  std::ostringstream out;
  hjb::write_function_samples(out, v, 2);
  std::istringstream in(out.str());
  std::string tag;
  int k = -1;
  in >> tag >> k;
  CHECK(tag == "f");
  CHECK(k == 0);
  std::ostringstream csv;
  hjb::write_coefficients_csv(csv, v);
  const std::string text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') >= 12);
}
