#pragma once

#include "hjb/mesh.hpp"
#include "hjb/quadrature.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace hjb {

/// s = 0: discontinuous piecewise polynomials; s = 1: continuous with zero
/// boundary values.
enum class Continuity { dg = 0, c0 = 1 };

struct SpaceConfig {
  int p = 2;
  Continuity s = Continuity::dg;
  std::optional<int> q;                 // lifting degree, defaults to p
  std::optional<int> quadrature_degree; // defaults to max(2p, 2q) + 2

  int lifting_degree() const { return q.value_or(p); }
  int quad_degree() const;
  void validate() const;
};

/// Values and derivatives of every basis function at one point. Hessians are
/// stored as (xx, xy, yy).
struct BasisValues {
  Eigen::VectorXd value;
  Eigen::MatrixX2d grad;
  Eigen::MatrixX3d hess;
};

/// Polynomial basis of P_p on the reference triangle, stored as coefficients
/// in the graded monomial basis xi^(d-j) eta^j.
class ReferenceBasis {
 public:
  /// Nodal basis on the equispaced lattice (i/p, j/p), i + j <= p.
  static ReferenceBasis lagrange(int degree);
  /// L2(reference)-orthonormal basis from Gram-Schmidt on the monomials.
  static ReferenceBasis orthonormal(int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(coeffs_.rows()); }
  /// Lattice nodes of the Lagrange basis (empty for the orthonormal basis).
  const std::vector<Eigen::Vector2d>& nodes() const { return nodes_; }
  /// Lattice index (i, j) of each Lagrange node.
  const std::vector<std::array<int, 2>>& lattice() const { return lattice_; }

  void evaluate(const Eigen::Vector2d& xi, int order, BasisValues& out) const;

 private:
  int degree_ = 0;
  Eigen::MatrixXd coeffs_;
  std::vector<Eigen::Vector2d> nodes_;
  std::vector<std::array<int, 2>> lattice_;
};

int polynomial_dim(int degree);

/// Affine map x = origin + jacobian * xi from the reference triangle.
struct ElementGeometry {
  Point2 origin = Point2::Zero();
  Eigen::Matrix2d jacobian = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d inverse = Eigen::Matrix2d::Identity();
  double det = 1.0;

  Point2 to_physical(const Eigen::Vector2d& xi) const { return origin + jacobian * xi; }
  Eigen::Vector2d to_reference(const Point2& x) const { return inverse * (x - origin); }
};

ElementGeometry element_geometry(const MeshLevel& mesh, int k);

/// Pushes reference derivatives forward through an affine map, in place.
void to_physical(const ElementGeometry& g, int order, BasisValues& values);

inline Eigen::Matrix2d unpack_hessian(const Eigen::Vector3d& h) {
  Eigen::Matrix2d m;
  m << h(0), h(1), h(1), h(2);
  return m;
}

class FESpace {
 public:
  FESpace(std::shared_ptr<const MeshLevel> mesh, SpaceConfig config);

  const MeshLevel& mesh() const { return *mesh_; }
  const std::shared_ptr<const MeshLevel>& mesh_ptr() const { return mesh_; }
  const SpaceConfig& config() const { return config_; }
  Continuity continuity() const { return config_.s; }
  int degree() const { return config_.p; }

  int dim() const { return dim_; }
  int local_size() const { return basis_.size(); }
  /// Global DOF of each local basis function; -1 marks a removed boundary DOF.
  std::span<const int> element_dofs(int k) const {
    return {dof_map_.data() + static_cast<std::size_t>(k) * local_size(), static_cast<std::size_t>(local_size())};
  }

  const ReferenceBasis& basis() const { return basis_; }
  const ElementGeometry& geometry(int k) const { return geometry_[k]; }
  const QuadratureRule& volume_rule() const { return volume_rule_; }
  const QuadratureRule& face_rule() const { return face_rule_; }

  /// Physical-space basis values (order 0), gradients (1) or Hessians (2) at
  /// a reference point of element k. Throws for order > 2.
  BasisValues eval_shape(int k, const Eigen::Vector2d& xi, int order) const;

  /// Physical location of each global DOF node (C0 spaces only).
  const std::vector<Point2>& dof_points() const { return dof_points_; }

 private:
  std::shared_ptr<const MeshLevel> mesh_;
  SpaceConfig config_;
  ReferenceBasis basis_;
  std::vector<int> dof_map_;
  std::vector<ElementGeometry> geometry_;
  std::vector<Point2> dof_points_;
  QuadratureRule volume_rule_;
  QuadratureRule face_rule_;
  int dim_ = 0;
};

std::shared_ptr<const FESpace> build_space(std::shared_ptr<const MeshLevel> mesh, SpaceConfig config);

/// Value, gradient and Hessian of a discrete function at one point.
struct LocalJet {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

class DiscreteFunction {
 public:
  explicit DiscreteFunction(std::shared_ptr<const FESpace> space);
  DiscreteFunction(std::shared_ptr<const FESpace> space, Eigen::VectorXd coeffs);

  const FESpace& space() const { return *space_; }
  const std::shared_ptr<const FESpace>& space_ptr() const { return space_; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  Eigen::VectorXd& coeffs() { return coeffs_; }

  /// Coefficients of the local basis on element k (zero for removed DOFs).
  Eigen::VectorXd local_coeffs(int k) const;
  LocalJet evaluate(int k, const Eigen::Vector2d& xi, int order = 2) const;

 private:
  std::shared_ptr<const FESpace> space_;
  Eigen::VectorXd coeffs_;
};

using ScalarField = std::function<double(const Point2&)>;

/// L2-orthogonal projection onto the space. Throws std::runtime_error if the
/// mass matrix cannot be factorized.
DiscreteFunction project_l2(std::shared_ptr<const FESpace> space, const ScalarField& f);

/// Moves a function onto a space over a refinement of its mesh, using the
/// `parent` lineage of the fine elements. Exact for DG; nodal interpolation
/// for C0.
DiscreteFunction transfer(const DiscreteFunction& coarse, std::shared_ptr<const FESpace> fine);

/// `f <element> <values...>` with values on the lattice (i/n, j/n), i + j <= n.
void write_function_samples(std::ostream& out, const DiscreteFunction& v, int lattice = 2);
void write_coefficients_csv(std::ostream& out, const DiscreteFunction& v);

}  // namespace hjb
