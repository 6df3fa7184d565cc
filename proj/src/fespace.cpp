#include "hjb/fespace.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

namespace hjb {

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Graded monomials xi^a eta^b with their first and second derivatives.
struct Monomials {
  std::vector<std::array<int, 2>> exps;

  explicit Monomials(int degree) {
    for (int d = 0; d <= degree; ++d)
      for (int j = 0; j <= d; ++j) exps.push_back({d - j, j});
  }

  void evaluate(const Eigen::Vector2d& xi, int order, BasisValues& m) const {
    const int n = static_cast<int>(exps.size());
    m.value.resize(n);
    if (order >= 1) m.grad.resize(n, 2);
    if (order >= 2) m.hess.resize(n, 3);
    auto pw = [](double x, int e) { return e < 0 ? 0.0 : std::pow(x, e); };
    for (int i = 0; i < n; ++i) {
      const int a = exps[i][0], b = exps[i][1];
      m.value(i) = pw(xi.x(), a) * pw(xi.y(), b);
      if (order >= 1) {
        m.grad(i, 0) = a * pw(xi.x(), a - 1) * pw(xi.y(), b);
        m.grad(i, 1) = b * pw(xi.x(), a) * pw(xi.y(), b - 1);
      }
      if (order >= 2) {
        m.hess(i, 0) = a * (a - 1) * pw(xi.x(), a - 2) * pw(xi.y(), b);
        m.hess(i, 1) = a * b * pw(xi.x(), a - 1) * pw(xi.y(), b - 1);
        m.hess(i, 2) = b * (b - 1) * pw(xi.x(), a) * pw(xi.y(), b - 2);
      }
    }
  }
};

}  // namespace

int polynomial_dim(int degree) { return (degree + 1) * (degree + 2) / 2; }

int SpaceConfig::quad_degree() const {
  return quadrature_degree.value_or(2 * std::max(p, lifting_degree()) + 2);
}

void SpaceConfig::validate() const {
  if (p < 2) throw std::invalid_argument("polynomial degree p must be at least 2, got " + std::to_string(p));
  if (lifting_degree() < p - 2)
    throw std::invalid_argument("lifting degree q must satisfy q >= p - 2");
  if (quad_degree() < 2 * p) throw std::invalid_argument("quadrature degree must be at least 2p");
}

ReferenceBasis ReferenceBasis::lagrange(int degree) {
  ReferenceBasis b;
  b.degree_ = degree;
  const Monomials mono(degree);
  const int n = polynomial_dim(degree);
  Eigen::MatrixXd vandermonde(n, n);
  BasisValues m;
  int row = 0;
  for (int j = 0; j <= degree; ++j) {
    for (int i = 0; i + j <= degree; ++i) {
      const Eigen::Vector2d node(double(i) / degree, double(j) / degree);
      b.nodes_.push_back(node);
      b.lattice_.push_back({i, j});
      mono.evaluate(node, 0, m);
      vandermonde.row(row++) = m.value.transpose();
    }
  }
  b.coeffs_ = vandermonde.transpose().inverse();
  return b;
}

ReferenceBasis ReferenceBasis::orthonormal(int degree) {
  ReferenceBasis b;
  b.degree_ = degree;
  const Monomials mono(degree);
  const int n = polynomial_dim(degree);
  // Exact moments on the reference triangle: int xi^a eta^b = a! b! / (a+b+2)!.
  Eigen::MatrixXd gram(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int a = mono.exps[i][0] + mono.exps[j][0];
      const int c = mono.exps[i][1] + mono.exps[j][1];
      gram(i, j) = factorial(a) * factorial(c) / factorial(a + c + 2);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("monomial Gram matrix is not positive definite");
  b.coeffs_ = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  return b;
}

void ReferenceBasis::evaluate(const Eigen::Vector2d& xi, int order, BasisValues& out) const {
  if (order < 0 || order > 2) throw std::invalid_argument("derivative order must be 0, 1 or 2");
  BasisValues m;
  Monomials(degree_).evaluate(xi, order, m);
  out.value = coeffs_ * m.value;
  if (order >= 1) out.grad = coeffs_ * m.grad;
  if (order >= 2) out.hess = coeffs_ * m.hess;
}

ElementGeometry element_geometry(const MeshLevel& mesh, int k) {
  const auto c = mesh.corners(k);
  ElementGeometry g;
  g.origin = c[0];
  g.jacobian.col(0) = c[1] - c[0];
  g.jacobian.col(1) = c[2] - c[0];
  g.det = g.jacobian.determinant();
  g.inverse = g.jacobian.inverse();
  return g;
}

void to_physical(const ElementGeometry& g, int order, BasisValues& values) {
  if (order >= 1) values.grad = values.grad * g.inverse;
  if (order >= 2) {
    for (Eigen::Index i = 0; i < values.hess.rows(); ++i) {
      const Eigen::Matrix2d h = g.inverse.transpose() * unpack_hessian(values.hess.row(i).transpose()) * g.inverse;
      values.hess.row(i) << h(0, 0), h(0, 1), h(1, 1);
    }
  }
}

FESpace::FESpace(std::shared_ptr<const MeshLevel> mesh, SpaceConfig config)
    : mesh_(std::move(mesh)), config_(config) {
  if (!mesh_) throw std::invalid_argument("FESpace requires a mesh");
  config_.validate();
  basis_ = config_.s == Continuity::c0 ? ReferenceBasis::lagrange(config_.p)
                                       : ReferenceBasis::orthonormal(config_.p);
  volume_rule_ = quadrature_rule(QuadratureDomain::triangle, config_.quad_degree());
  face_rule_ = quadrature_rule(QuadratureDomain::segment, config_.quad_degree());

  const int ne = mesh_->num_elements();
  const int n = basis_.size();
  geometry_.resize(ne);
  for (int k = 0; k < ne; ++k) geometry_[k] = element_geometry(*mesh_, k);

  dof_map_.assign(static_cast<std::size_t>(ne) * n, -1);
  if (config_.s == Continuity::dg) {
    for (std::size_t i = 0; i < dof_map_.size(); ++i) dof_map_[i] = static_cast<int>(i);
    dim_ = ne * n;
    return;
  }

  // Lagrange nodes are identified by their barycentric weights on global
  // vertices: (kind, id_a, id_b, weight) with kind 0 vertex, 1 edge, 2 interior.
  const int p = config_.p;
  std::map<std::array<int, 4>, int> index;
  for (int k = 0; k < ne; ++k) {
    const auto& v = mesh_->elements()[k].vertices;
    for (int i = 0; i < n; ++i) {
      const auto [li, lj] = basis_.lattice()[i];
      const std::array<int, 3> bary{p - li - lj, li, lj};
      std::array<int, 4> key{};
      bool on_boundary = false;
      const int zeros = int(bary[0] == 0) + int(bary[1] == 0) + int(bary[2] == 0);
      if (zeros == 2) {
        const int lv = bary[0] == p ? 0 : (bary[1] == p ? 1 : 2);
        key = {0, v[lv], 0, 0};
        on_boundary = mesh_->is_boundary_vertex(v[lv]);
      } else if (zeros == 1) {
        const int z = bary[0] == 0 ? 0 : (bary[1] == 0 ? 1 : 2);
        const int a = (z + 1) % 3, b = (z + 2) % 3;
        const int lo = v[a] < v[b] ? a : b;
        const int hi = lo == a ? b : a;
        key = {1, v[lo], v[hi], bary[hi]};
        on_boundary = !mesh_->faces()[mesh_->element_faces(k)[z]].is_interior();
      } else {
        key = {2, k, i, 0};
      }
      if (on_boundary) continue;
      auto [it, inserted] = index.try_emplace(key, dim_);
      if (inserted) {
        ++dim_;
        dof_points_.push_back(geometry_[k].to_physical(basis_.nodes()[i]));
      }
      dof_map_[static_cast<std::size_t>(k) * n + i] = it->second;
    }
  }
}

BasisValues FESpace::eval_shape(int k, const Eigen::Vector2d& xi, int order) const {
  if (order < 0 || order > 2) throw std::invalid_argument("eval_shape: order must be 0, 1 or 2");
  BasisValues out;
  basis_.evaluate(xi, order, out);
  to_physical(geometry_[k], order, out);
  return out;
}

std::shared_ptr<const FESpace> build_space(std::shared_ptr<const MeshLevel> mesh, SpaceConfig config) {
  return std::make_shared<const FESpace>(std::move(mesh), config);
}

DiscreteFunction::DiscreteFunction(std::shared_ptr<const FESpace> space)
    : space_(std::move(space)), coeffs_(Eigen::VectorXd::Zero(space_->dim())) {}

DiscreteFunction::DiscreteFunction(std::shared_ptr<const FESpace> space, Eigen::VectorXd coeffs)
    : space_(std::move(space)), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != space_->dim()) throw std::invalid_argument("coefficient vector has wrong length");
}

Eigen::VectorXd DiscreteFunction::local_coeffs(int k) const {
  const auto dofs = space_->element_dofs(k);
  Eigen::VectorXd c(dofs.size());
  for (std::size_t i = 0; i < dofs.size(); ++i) c(i) = dofs[i] >= 0 ? coeffs_(dofs[i]) : 0.0;
  return c;
}

LocalJet DiscreteFunction::evaluate(int k, const Eigen::Vector2d& xi, int order) const {
  const BasisValues b = space_->eval_shape(k, xi, order);
  const Eigen::VectorXd c = local_coeffs(k);
  LocalJet jet;
  jet.value = b.value.dot(c);
  if (order >= 1) jet.grad = b.grad.transpose() * c;
  if (order >= 2) jet.hess = unpack_hessian(b.hess.transpose() * c);
  return jet;
}

DiscreteFunction project_l2(std::shared_ptr<const FESpace> space, const ScalarField& f) {
  const int dim = space->dim();
  const QuadratureRule& rule = space->volume_rule();
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  BasisValues b;
  for (int k = 0; k < space->mesh().num_elements(); ++k) {
    const auto& g = space->geometry(k);
    const auto dofs = space->element_dofs(k);
    for (int q = 0; q < rule.size(); ++q) {
      space->basis().evaluate(rule.points[q], 0, b);
      const double w = rule.weights[q] * g.det;
      const double fx = f(g.to_physical(rule.points[q]));
      for (std::size_t i = 0; i < dofs.size(); ++i) {
        if (dofs[i] < 0) continue;
        rhs(dofs[i]) += w * fx * b.value(i);
        for (std::size_t j = 0; j < dofs.size(); ++j)
          if (dofs[j] >= 0) triplets.emplace_back(dofs[i], dofs[j], w * b.value(i) * b.value(j));
      }
    }
  }
  Eigen::SparseMatrix<double> mass(dim, dim);
  mass.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(mass);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("project_l2: mass matrix factorization failed");
  Eigen::VectorXd c = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("project_l2: mass matrix solve failed");
  return DiscreteFunction(std::move(space), std::move(c));
}

DiscreteFunction transfer(const DiscreteFunction& coarse, std::shared_ptr<const FESpace> fine) {
  const MeshLevel& fmesh = fine->mesh();
  const FESpace& cspace = coarse.space();
  if (fine->continuity() != cspace.continuity() || fine->degree() != cspace.degree())
    throw std::invalid_argument("transfer: spaces must have the same degree and continuity");
  DiscreteFunction out(fine);
  const int n = fine->local_size();

  auto ancestor = [&](int k) {
    const auto& parent = fmesh.elements()[k].parent;
    if (!parent || *parent < 0 || *parent >= cspace.mesh().num_elements())
      throw std::invalid_argument("transfer: fine element has no parent on the coarse mesh");
    return *parent;
  };

  if (fine->continuity() == Continuity::c0) {
    for (int k = 0; k < fmesh.num_elements(); ++k) {
      const int a = ancestor(k);
      const auto dofs = fine->element_dofs(k);
      for (int i = 0; i < n; ++i) {
        if (dofs[i] < 0) continue;
        const Point2 x = fine->geometry(k).to_physical(fine->basis().nodes()[i]);
        out.coeffs()(dofs[i]) = coarse.evaluate(a, cspace.geometry(a).to_reference(x), 0).value;
      }
    }
    return out;
  }

  const QuadratureRule& rule = fine->volume_rule();
  BasisValues b;
  for (int k = 0; k < fmesh.num_elements(); ++k) {
    const int a = ancestor(k);
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int q = 0; q < rule.size(); ++q) {
      fine->basis().evaluate(rule.points[q], 0, b);
      const Point2 x = fine->geometry(k).to_physical(rule.points[q]);
      const double u = coarse.evaluate(a, cspace.geometry(a).to_reference(x), 0).value;
      mass += rule.weights[q] * b.value * b.value.transpose();
      rhs += rule.weights[q] * u * b.value;
    }
    const Eigen::VectorXd c = mass.ldlt().solve(rhs);
    const auto dofs = fine->element_dofs(k);
    for (int i = 0; i < n; ++i) out.coeffs()(dofs[i]) = c(i);
  }
  return out;
}

void write_function_samples(std::ostream& out, const DiscreteFunction& v, int lattice) {
  out.precision(17);
  for (int k = 0; k < v.space().mesh().num_elements(); ++k) {
    out << "f " << k;
    for (int j = 0; j <= lattice; ++j)
      for (int i = 0; i + j <= lattice; ++i)
        out << ' ' << v.evaluate(k, Eigen::Vector2d(double(i) / lattice, double(j) / lattice), 0).value;
    out << '\n';
  }
}

void write_coefficients_csv(std::ostream& out, const DiscreteFunction& v) {
  out.precision(17);
  out << "dof,coefficient\n";
  for (Eigen::Index i = 0; i < v.coeffs().size(); ++i) out << i << ',' << v.coeffs()(i) << '\n';
}

}  // namespace hjb
