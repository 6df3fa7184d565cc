#pragma once

#include "hjb/cordes.hpp"
#include "hjb/fespace.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace hjb {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct FormParams {
  double theta = 0.5;
  double sigma = 40.0;
  double rho = 160.0;

  /// sigma = 10 p^2; rho = 10 p^4 for DG and 0 for C0.
  static FormParams defaults(const SpaceConfig& config);
  void validate(Continuity s) const;
};

/// Orthonormal basis of P_q on a physical element, used for liftings.
class LiftingBasis {
 public:
  explicit LiftingBasis(int q);
  int degree() const { return basis_.degree(); }
  int size() const { return basis_.size(); }
  Eigen::VectorXd values(const ElementGeometry& g, const Point2& x) const;

 private:
  ReferenceBasis basis_;
};

/// One quadrature point on a face, with its reference coordinates in each
/// adjacent element. `weight` already includes the face length.
struct FacePoint {
  Point2 x = Point2::Zero();
  double weight = 0.0;
  std::array<Eigen::Vector2d, 2> xi{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
};

std::vector<FacePoint> face_points(const FESpace& space, int face, const QuadratureRule& rule);
std::vector<FacePoint> face_points(const FESpace& space, int face);

/// Unit tangent of a face, the normal rotated counterclockwise.
Point2 face_tangent(const MeshLevel& mesh, int face);

/// Lifting of a face function into P_q on the (one or two) adjacent elements.
/// Row r of `coeffs[side]` holds component r in the order (00, 01, 10, 11)
/// for matrix liftings, or the single row of a scalar lifting.
struct FaceLifting {
  int face = -1;
  std::array<int, 2> elements{-1, -1};
  std::array<Eigen::MatrixXd, 2> coeffs;
};

/// Scalar lifting r^F(w): int r phi = int_F w {phi} for all phi in P_q.
FaceLifting lift_face_scalar(const FESpace& space, int face, const std::function<double(const Point2&)>& w, int q);

/// Matrix lifting r^F(w), [r]_ij = r^F(w_i n_j), with w replaced by its
/// tangential part on boundary faces.
FaceLifting lift_face(const FESpace& space, int face, const std::function<Eigen::Vector2d(const Point2&)>& w, int q);

/// Value of a lifting at a physical point of one of its elements (zero
/// elsewhere). Returns a 1x1 or 2x2 matrix according to the lifting kind.
Eigen::MatrixXd evaluate_lifting(const FESpace& space, const FaceLifting& lifting, int element, const Point2& x,
                                 int q);

/// grad^2 v, r(jump grad v), H v = grad^2 v - r, and Delta v = Tr H v for one
/// discrete function.
class LiftedHessianField {
 public:
  LiftedHessianField(const DiscreteFunction& v, int q);

  int lifting_degree() const { return basis_.degree(); }
  /// Lifting coefficients on element k, rows (00, 01, 10, 11).
  const Eigen::MatrixXd& coefficients(int k) const { return coeffs_[k]; }

  Eigen::Matrix2d hessian(int k, const Eigen::Vector2d& xi) const;
  Eigen::Matrix2d lifting(int k, const Eigen::Vector2d& xi) const;
  Eigen::Matrix2d lifted_hessian(int k, const Eigen::Vector2d& xi) const;
  double lifted_laplacian(int k, const Eigen::Vector2d& xi) const;

 private:
  DiscreteFunction v_;
  LiftingBasis basis_;
  std::vector<Eigen::MatrixXd> coeffs_;
};

/// q defaults to the space's lifting degree.
LiftedHessianField lifted_hessian(const DiscreteFunction& v);
LiftedHessianField lifted_hessian(const DiscreteFunction& v, int q);

enum class StabMode { facewise, lifted };

/// The stabilization form S(w, v), evaluated by direct quadrature either from
/// face traces or from the lifted Hessians.
double stab_form(const DiscreteFunction& w, const DiscreteFunction& v, StabMode mode);

double jump_penalty_form(const DiscreteFunction& w, const DiscreteFunction& v, const FormParams& params);

double jump_seminorm(const DiscreteFunction& v);
double norm_k(const DiscreteFunction& v);

/// ||u - v||_k against a smooth exact solution with zero boundary values,
/// using quadrature of exactness 2p + 4.
double error_norm_k(const DiscreteFunction& v, const ExactSolution& u);

/// A(w; v) by direct quadrature, without assembled matrices.
double nonlinear_form_value(const ControlProblem& problem, const FormParams& params, const DiscreteFunction& w,
                            const DiscreteFunction& v);

struct AssembledSystem {
  Eigen::VectorXd residual;
  SparseMatrix jacobian;
};

struct MonotonicityReport {
  int samples = 0;
  double c_min = 0.0;   // min of (R(w)-R(v)).(w-v) / ||w-v||_k^2
  double c_max = 0.0;
  double lipschitz = 0.0;  // max of sup_z |(R(w)-R(v)).z| / (||w-v||_k ||z||_k)
};

/// Precomputed assembly data for A(. ; .) on one space. Element data covers
/// quadrature points, basis Hessians and the lifted Laplacians of all basis
/// functions whose jumps touch the element.
class NonlinearForm {
 public:
  NonlinearForm(std::shared_ptr<const FESpace> space, std::shared_ptr<const ControlProblem> problem,
                FormParams params, int threads = 1);

  const FESpace& space() const { return *space_; }
  const std::shared_ptr<const FESpace>& space_ptr() const { return space_; }
  const ControlProblem& problem() const { return *problem_; }
  const std::shared_ptr<const ControlProblem>& problem_ptr() const { return problem_; }
  const FormParams& params() const { return params_; }
  int threads() const { return threads_; }

  const SparseMatrix& stabilization() const { return stab_; }
  const SparseMatrix& penalty() const { return penalty_; }
  /// Gram matrix of the ||.||_k inner product.
  const SparseMatrix& norm_matrix() const { return gram_; }

  /// R_i = A(u; phi_i).
  Eigen::VectorXd residual(const Eigen::VectorXd& u) const;
  /// Matrix of w -> A'(u) w with the optimal controls frozen at u.
  SparseMatrix jacobian(const Eigen::VectorXd& u) const;
  AssembledSystem assemble(const Eigen::VectorXd& u) const;

  /// int_K F_gamma[u]^2 for each element.
  std::vector<double> residual_squares(const Eigen::VectorXd& u) const;

  double norm(const Eigen::VectorXd& v) const;

 private:
  struct ElementData {
    std::vector<Point2> points;
    Eigen::VectorXd weights;
    Eigen::MatrixXd hess;  // row 3*q + c: component c (xx, xy, yy) at point q
    std::vector<int> patch;
    Eigen::MatrixXd lap;   // lifted Laplacian of each patch DOF at each point
  };

  void build_element_data();
  void build_matrices();
  Eigen::Matrix2d hessian_at(int k, int q, const Eigen::VectorXd& local) const;

  std::shared_ptr<const FESpace> space_;
  std::shared_ptr<const ControlProblem> problem_;
  FormParams params_;
  int threads_ = 1;
  std::vector<ElementData> elements_;
  SparseMatrix stab_, penalty_, gram_;
};

Eigen::VectorXd nonlinear_residual(const NonlinearForm& form, const DiscreteFunction& u);
SparseMatrix frozen_jacobian(const NonlinearForm& form, const DiscreteFunction& u);

/// Samples strong monotonicity and the Lipschitz bound of the residual map on
/// random coefficient vectors.
MonotonicityReport sample_monotonicity(const NonlinearForm& form, int pairs, std::uint64_t seed);

/// `i j value` lines, zero-based, column-major order.
void write_triplets(std::ostream& out, const SparseMatrix& matrix);

}  // namespace hjb
