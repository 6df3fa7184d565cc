#include "hjb/forms.hpp"

#include "hjb/parallel.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace hjb {

namespace {

double frobenius(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) { return (a.array() * b.array()).sum(); }

// Packed (xx, xy, yy) Hessian rows.
double packed_inner(const Eigen::Ref<const Eigen::RowVector3d>& a, const Eigen::Ref<const Eigen::RowVector3d>& b) {
  return a(0) * b(0) + 2.0 * a(1) * b(1) + a(2) * b(2);
}

double face_weight(const Face& face) { return face.is_interior() ? 0.5 : 1.0; }

struct FaceJump {
  std::array<LocalJet, 2> side;
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
};

FaceJump face_jump(const DiscreteFunction& v, const Face& face, const FacePoint& fp, int order) {
  FaceJump j;
  j.side[0] = v.evaluate(face.elements[0], fp.xi[0], order);
  j.value = j.side[0].value;
  j.grad = j.side[0].grad;
  if (face.is_interior()) {
    j.side[1] = v.evaluate(face.elements[1], fp.xi[1], order);
    j.value -= j.side[1].value;
    j.grad -= j.side[1].grad;
  }
  return j;
}

Eigen::Vector2d tangential(const Eigen::Vector2d& w, const Point2& n) { return w - w.dot(n) * n; }

// Adds delta_F int_F comps(x) psi(x)^T to the lifting coefficients of each
// element adjacent to `face`.
template <class Comps>
void accumulate_lifting(const FESpace& space, const LiftingBasis& basis, int face_id, int rows, Comps&& comps,
                        std::array<Eigen::MatrixXd, 2>& out) {
  const Face& face = space.mesh().faces()[face_id];
  const double delta = face_weight(face);
  Eigen::VectorXd c(rows);
  for (int s = 0; s < 2; ++s) {
    if (face.elements[s] >= 0 && out[s].size() == 0) out[s] = Eigen::MatrixXd::Zero(rows, basis.size());
  }
  for (const FacePoint& fp : face_points(space, face_id)) {
    comps(fp, c);
    for (int s = 0; s < 2; ++s) {
      const int e = face.elements[s];
      if (e < 0) continue;
      out[s].noalias() += (delta * fp.weight) * c * basis.values(space.geometry(e), fp.x).transpose();
    }
  }
}

Eigen::Matrix2d reshape4(const Eigen::VectorXd& v) {
  Eigen::Matrix2d m;
  m << v(0), v(1), v(2), v(3);
  return m;
}

}  // namespace

FormParams FormParams::defaults(const SpaceConfig& config) {
  FormParams params;
  const double p = config.p;
  params.theta = 0.5;
  params.sigma = 10.0 * p * p;
  params.rho = config.s == Continuity::dg ? 10.0 * p * p * p * p : 0.0;
  return params;
}

void FormParams::validate(Continuity s) const {
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0, 1]");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (s == Continuity::dg && !(rho > 0.0)) throw std::invalid_argument("rho must be positive for discontinuous spaces");
  if (s == Continuity::c0 && !(rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");
}

LiftingBasis::LiftingBasis(int q) : basis_(ReferenceBasis::orthonormal(q)) {
  if (q < 0) throw std::invalid_argument("lifting degree must be nonnegative");
}

Eigen::VectorXd LiftingBasis::values(const ElementGeometry& g, const Point2& x) const {
  BasisValues b;
  basis_.evaluate(g.to_reference(x), 0, b);
  return b.value / std::sqrt(std::abs(g.det));
}

std::vector<FacePoint> face_points(const FESpace& space, int face, const QuadratureRule& rule) {
  const MeshLevel& mesh = space.mesh();
  const Face& f = mesh.faces()[face];
  const Point2& a = mesh.vertices()[f.vertices[0]];
  const Point2& b = mesh.vertices()[f.vertices[1]];
  const double length = (b - a).norm();
  std::vector<FacePoint> pts(rule.size());
  for (int i = 0; i < rule.size(); ++i) {
    FacePoint& fp = pts[i];
    fp.x = a + rule.points[i].x() * (b - a);
    fp.weight = rule.weights[i] * length;
    for (int s = 0; s < 2; ++s)
      if (f.elements[s] >= 0) fp.xi[s] = space.geometry(f.elements[s]).to_reference(fp.x);
  }
  return pts;
}

std::vector<FacePoint> face_points(const FESpace& space, int face) {
  return face_points(space, face, space.face_rule());
}

Point2 face_tangent(const MeshLevel& mesh, int face) {
  const Point2& n = mesh.faces()[face].normal;
  return Point2(-n.y(), n.x());
}

FaceLifting lift_face_scalar(const FESpace& space, int face, const std::function<double(const Point2&)>& w, int q) {
  const LiftingBasis basis(q);
  FaceLifting out;
  out.face = face;
  out.elements = space.mesh().faces()[face].elements;
  accumulate_lifting(space, basis, face, 1, [&](const FacePoint& fp, Eigen::VectorXd& c) { c(0) = w(fp.x); },
                     out.coeffs);
  return out;
}

FaceLifting lift_face(const FESpace& space, int face, const std::function<Eigen::Vector2d(const Point2&)>& w, int q) {
  const LiftingBasis basis(q);
  const Face& f = space.mesh().faces()[face];
  FaceLifting out;
  out.face = face;
  out.elements = f.elements;
  accumulate_lifting(
      space, basis, face, 4,
      [&](const FacePoint& fp, Eigen::VectorXd& c) {
        Eigen::Vector2d wv = w(fp.x);
        if (!f.is_interior()) wv = tangential(wv, f.normal);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) c(2 * a + b) = wv(a) * f.normal(b);
      },
      out.coeffs);
  return out;
}

Eigen::MatrixXd evaluate_lifting(const FESpace& space, const FaceLifting& lifting, int element, const Point2& x,
                                 int q) {
  const int rows = static_cast<int>(std::max(lifting.coeffs[0].rows(), lifting.coeffs[1].rows()));
  const bool matrix = rows == 4;
  for (int s = 0; s < 2; ++s) {
    if (lifting.elements[s] != element) continue;
    const Eigen::VectorXd vals = lifting.coeffs[s] * LiftingBasis(q).values(space.geometry(element), x);
    if (matrix) return reshape4(vals);
    return Eigen::MatrixXd::Constant(1, 1, vals(0));
  }
  return matrix ? Eigen::MatrixXd::Zero(2, 2) : Eigen::MatrixXd::Zero(1, 1);
}

LiftedHessianField::LiftedHessianField(const DiscreteFunction& v, int q) : v_(v), basis_(q) {
  const FESpace& space = v.space();
  const MeshLevel& mesh = space.mesh();
  if (q < space.degree() - 2) throw std::invalid_argument("lifting degree must be at least p - 2");
  coeffs_.assign(mesh.num_elements(), Eigen::MatrixXd::Zero(4, basis_.size()));
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    std::array<Eigen::MatrixXd, 2> local;
    accumulate_lifting(
        space, basis_, f, 4,
        [&](const FacePoint& fp, Eigen::VectorXd& c) {
          Eigen::Vector2d w = face_jump(v, face, fp, 1).grad;
          if (!face.is_interior()) w = tangential(w, face.normal);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) c(2 * a + b) = w(a) * face.normal(b);
        },
        local);
    for (int s = 0; s < 2; ++s)
      if (face.elements[s] >= 0) coeffs_[face.elements[s]] += local[s];
  }
}

Eigen::Matrix2d LiftedHessianField::hessian(int k, const Eigen::Vector2d& xi) const {
  return v_.evaluate(k, xi, 2).hess;
}

Eigen::Matrix2d LiftedHessianField::lifting(int k, const Eigen::Vector2d& xi) const {
  const ElementGeometry& g = v_.space().geometry(k);
  return reshape4(coeffs_[k] * basis_.values(g, g.to_physical(xi)));
}

Eigen::Matrix2d LiftedHessianField::lifted_hessian(int k, const Eigen::Vector2d& xi) const {
  return hessian(k, xi) - lifting(k, xi);
}

double LiftedHessianField::lifted_laplacian(int k, const Eigen::Vector2d& xi) const {
  return lifted_hessian(k, xi).trace();
}

LiftedHessianField lifted_hessian(const DiscreteFunction& v) {
  return LiftedHessianField(v, v.space().config().lifting_degree());
}

LiftedHessianField lifted_hessian(const DiscreteFunction& v, int q) { return LiftedHessianField(v, q); }

double stab_form(const DiscreteFunction& w, const DiscreteFunction& v, StabMode mode) {
  if (&w.space() != &v.space()) throw std::invalid_argument("stab_form: functions live on different spaces");
  const FESpace& space = w.space();
  const MeshLevel& mesh = space.mesh();
  const QuadratureRule& rule = space.volume_rule();
  double total = 0.0;

  if (mode == StabMode::lifted) {
    const LiftedHessianField lw = lifted_hessian(w), lv = lifted_hessian(v);
    for (int k = 0; k < mesh.num_elements(); ++k) {
      const double det = std::abs(space.geometry(k).det);
      for (int i = 0; i < rule.size(); ++i) {
        const Eigen::Vector2d& xi = rule.points[i];
        const Eigen::Matrix2d rw = lw.lifting(k, xi), rv = lv.lifting(k, xi);
        const Eigen::Matrix2d hw = lw.hessian(k, xi) - rw, hv = lv.hessian(k, xi) - rv;
        total += rule.weights[i] * det *
                 (frobenius(hw, hv) - hw.trace() * hv.trace() + rw.trace() * rv.trace() - frobenius(rw, rv));
      }
    }
    return total;
  }

  for (int k = 0; k < mesh.num_elements(); ++k) {
    const double det = std::abs(space.geometry(k).det);
    for (int i = 0; i < rule.size(); ++i) {
      const Eigen::Matrix2d hw = w.evaluate(k, rule.points[i]).hess, hv = v.evaluate(k, rule.points[i]).hess;
      total += rule.weights[i] * det * (frobenius(hw, hv) - hw.trace() * hv.trace());
    }
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    const Point2& n = face.normal;
    const Point2 t = face_tangent(mesh, f);
    const double delta = face_weight(face);
    for (const FacePoint& fp : face_points(space, f)) {
      const FaceJump jw = face_jump(w, face, fp, 2), jv = face_jump(v, face, fp, 2);
      double tt_w = t.dot(jw.side[0].hess * t), tt_v = t.dot(jv.side[0].hess * t);
      double tn_w = t.dot(jw.side[0].hess * n), tn_v = t.dot(jv.side[0].hess * n);
      if (face.is_interior()) {
        tt_w += t.dot(jw.side[1].hess * t);
        tt_v += t.dot(jv.side[1].hess * t);
        tn_w += t.dot(jw.side[1].hess * n);
        tn_v += t.dot(jv.side[1].hess * n);
      }
      tt_w *= delta, tt_v *= delta, tn_w *= delta, tn_v *= delta;
      double integrand = -(tn_w * jv.grad.dot(t) + tn_v * jw.grad.dot(t));
      if (face.is_interior()) integrand += tt_w * jv.grad.dot(n) + tt_v * jw.grad.dot(n);
      total += fp.weight * integrand;
    }
  }
  return total;
}

double jump_penalty_form(const DiscreteFunction& w, const DiscreteFunction& v, const FormParams& params) {
  const FESpace& space = w.space();
  const MeshLevel& mesh = space.mesh();
  double total = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    const double h = mesh.face_length(f);
    for (const FacePoint& fp : face_points(space, f)) {
      const FaceJump jw = face_jump(w, face, fp, 1), jv = face_jump(v, face, fp, 1);
      double integrand = params.rho / (h * h * h) * jw.value * jv.value;
      if (face.is_interior()) integrand += params.sigma / h * jw.grad.dot(jv.grad);
      total += fp.weight * integrand;
    }
  }
  return total;
}

double jump_seminorm(const DiscreteFunction& v) {
  FormParams unit;
  unit.sigma = 1.0;
  unit.rho = 1.0;
  return std::sqrt(std::max(0.0, jump_penalty_form(v, v, unit)));
}

double norm_k(const DiscreteFunction& v) {
  const FESpace& space = v.space();
  const QuadratureRule& rule = space.volume_rule();
  double total = 0.0;
  for (int k = 0; k < space.mesh().num_elements(); ++k) {
    const double det = std::abs(space.geometry(k).det);
    for (int i = 0; i < rule.size(); ++i) {
      const LocalJet j = v.evaluate(k, rule.points[i]);
      total += rule.weights[i] * det * (j.hess.squaredNorm() + j.grad.squaredNorm() + j.value * j.value);
    }
  }
  const double jump = jump_seminorm(v);
  return std::sqrt(total + jump * jump);
}

double error_norm_k(const DiscreteFunction& v, const ExactSolution& u) {
  const FESpace& space = v.space();
  const MeshLevel& mesh = space.mesh();
  const int degree = 2 * space.degree() + 4;
  const QuadratureRule vol = quadrature_rule(QuadratureDomain::triangle, degree);
  const QuadratureRule seg = quadrature_rule(QuadratureDomain::segment, degree);
  double total = 0.0;
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const ElementGeometry& g = space.geometry(k);
    for (int i = 0; i < vol.size(); ++i) {
      const Point2 x = g.to_physical(vol.points[i]);
      const LocalJet j = v.evaluate(k, vol.points[i]);
      const double e = u.value(x) - j.value;
      total += vol.weights[i] * std::abs(g.det) *
               ((u.hessian(x) - j.hess).squaredNorm() + (u.gradient(x) - j.grad).squaredNorm() + e * e);
    }
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    const double h = mesh.face_length(f);
    for (const FacePoint& fp : face_points(space, f, seg)) {
      const FaceJump jv = face_jump(v, face, fp, 1);
      // The exact solution is smooth and vanishes on the boundary.
      const double value_jump = face.is_interior() ? jv.value : jv.value - u.value(fp.x);
      double integrand = value_jump * value_jump / (h * h * h);
      if (face.is_interior()) integrand += jv.grad.squaredNorm() / h;
      total += fp.weight * integrand;
    }
  }
  return std::sqrt(total);
}

double nonlinear_form_value(const ControlProblem& problem, const FormParams& params, const DiscreteFunction& w,
                            const DiscreteFunction& v) {
  const FESpace& space = w.space();
  const QuadratureRule& rule = space.volume_rule();
  const LiftedHessianField lv = lifted_hessian(v);
  double total = 0.0;
  for (int k = 0; k < space.mesh().num_elements(); ++k) {
    const ElementGeometry& g = space.geometry(k);
    for (int i = 0; i < rule.size(); ++i) {
      const Eigen::Vector2d& xi = rule.points[i];
      const double fg = f_gamma_eval(problem, g.to_physical(xi), w.evaluate(k, xi).hess).value;
      total += rule.weights[i] * std::abs(g.det) * fg * lv.lifted_laplacian(k, xi);
    }
  }
  return total + params.theta * stab_form(w, v, StabMode::facewise) + jump_penalty_form(w, v, params);
}

NonlinearForm::NonlinearForm(std::shared_ptr<const FESpace> space, std::shared_ptr<const ControlProblem> problem,
                             FormParams params, int threads)
    : space_(std::move(space)), problem_(std::move(problem)), params_(params), threads_(std::max(1, threads)) {
  if (!space_ || !problem_) throw std::invalid_argument("NonlinearForm: null space or problem");
  space_->config().validate();
  params_.validate(space_->continuity());
  problem_->validate();
  build_element_data();
  build_matrices();
}

void NonlinearForm::build_element_data() {
  const FESpace& space = *space_;
  const MeshLevel& mesh = space.mesh();
  const QuadratureRule& rule = space.volume_rule();
  const LiftingBasis lbasis(space.config().lifting_degree());
  const int nq = rule.size();
  const int nloc = space.local_size();
  elements_.assign(mesh.num_elements(), {});

  parallel_for(mesh.num_elements(), threads_, [&](int k) {
    ElementData& d = elements_[k];
    const ElementGeometry& g = space.geometry(k);
    d.points.resize(nq);
    d.weights.resize(nq);
    d.hess.resize(3 * nq, nloc);
    Eigen::MatrixXd laplace(nq, nloc);
    Eigen::MatrixXd psi(nq, lbasis.size());
    for (int i = 0; i < nq; ++i) {
      d.points[i] = g.to_physical(rule.points[i]);
      d.weights(i) = rule.weights[i] * std::abs(g.det);
      const BasisValues b = space.eval_shape(k, rule.points[i], 2);
      d.hess.middleRows(3 * i, 3) = b.hess.transpose();
      laplace.row(i) = (b.hess.col(0) + b.hess.col(2)).transpose();
      psi.row(i) = lbasis.values(g, d.points[i]).transpose();
    }

    auto column = [&](int dof) {
      const auto it = std::find(d.patch.begin(), d.patch.end(), dof);
      if (it != d.patch.end()) return static_cast<int>(it - d.patch.begin());
      d.patch.push_back(dof);
      return static_cast<int>(d.patch.size()) - 1;
    };
    const auto own = space.element_dofs(k);
    std::vector<int> own_col(nloc, -1);
    for (int i = 0; i < nloc; ++i)
      if (own[i] >= 0) own_col[i] = column(own[i]);

    // Trace of the lifting of each patch DOF's gradient jump, in the P_q basis.
    // Boundary faces lift traceless fields and are skipped.
    std::vector<Eigen::VectorXd> trace_cols;
    for (int e = 0; e < 3; ++e) {
      const int f = mesh.element_faces(k)[e];
      const Face& face = mesh.faces()[f];
      if (!face.is_interior()) continue;
      for (const FacePoint& fp : face_points(space, f)) {
        const Eigen::VectorXd psi_f = lbasis.values(g, fp.x);
        for (int s = 0; s < 2; ++s) {
          const int el = face.elements[s];
          const double sign = s == 0 ? 1.0 : -1.0;
          const BasisValues b = space.eval_shape(el, fp.xi[s], 1);
          const Eigen::VectorXd dn = b.grad * face.normal;
          const auto dofs = space.element_dofs(el);
          for (int i = 0; i < nloc; ++i) {
            if (dofs[i] < 0) continue;
            const int c = column(dofs[i]);
            if (c >= static_cast<int>(trace_cols.size()))
              trace_cols.resize(c + 1, Eigen::VectorXd::Zero(lbasis.size()));
            trace_cols[c] += (0.5 * fp.weight * sign * dn(i)) * psi_f;
          }
        }
      }
    }
    const int np = static_cast<int>(d.patch.size());
    d.lap = Eigen::MatrixXd::Zero(nq, np);
    for (int i = 0; i < nloc; ++i)
      if (own_col[i] >= 0) d.lap.col(own_col[i]) += laplace.col(i);
    for (int c = 0; c < static_cast<int>(trace_cols.size()); ++c) d.lap.col(c) -= psi * trace_cols[c];
  });
}

void NonlinearForm::build_matrices() {
  const FESpace& space = *space_;
  const MeshLevel& mesh = space.mesh();
  const QuadratureRule& rule = space.volume_rule();
  const int nloc = space.local_size();
  std::vector<Eigen::Triplet<double>> ts, tp, tg;

  auto scatter = [](std::vector<Eigen::Triplet<double>>& out, const std::vector<int>& dofs, const Eigen::MatrixXd& m) {
    for (std::size_t a = 0; a < dofs.size(); ++a) {
      if (dofs[a] < 0) continue;
      for (std::size_t b = 0; b < dofs.size(); ++b) {
        if (dofs[b] < 0 || m(a, b) == 0.0) continue;
        out.emplace_back(dofs[a], dofs[b], m(a, b));
      }
    }
  };

  for (int k = 0; k < mesh.num_elements(); ++k) {
    const ElementData& d = elements_[k];
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(nloc, nloc), gm = Eigen::MatrixXd::Zero(nloc, nloc);
    for (int i = 0; i < rule.size(); ++i) {
      const BasisValues b = space.eval_shape(k, rule.points[i], 1);
      const Eigen::MatrixXd h = d.hess.middleRows(3 * i, 3).transpose();  // nloc x 3
      Eigen::MatrixXd hh(nloc, nloc);
      for (int a = 0; a < nloc; ++a)
        for (int c = 0; c < nloc; ++c) hh(a, c) = packed_inner(h.row(a), h.row(c));
      const Eigen::VectorXd lap = h.col(0) + h.col(2);
      s += d.weights(i) * (hh - lap * lap.transpose());
      gm += d.weights(i) * (hh + b.grad * b.grad.transpose() + b.value * b.value.transpose());
    }
    const auto own = space.element_dofs(k);
    const std::vector<int> dofs(own.begin(), own.end());
    scatter(ts, dofs, s);
    scatter(tg, dofs, gm);
  }

  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    const bool interior = face.is_interior();
    const int sides = interior ? 2 : 1;
    const int nb = sides * nloc;
    const double h = mesh.face_length(f);
    const double delta = face_weight(face);
    const Point2& n = face.normal;
    const Point2 t = face_tangent(mesh, f);
    std::vector<int> dofs;
    for (int s = 0; s < sides; ++s) {
      const auto e = space.element_dofs(face.elements[s]);
      dofs.insert(dofs.end(), e.begin(), e.end());
    }
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(nb, nb), pen = Eigen::MatrixXd::Zero(nb, nb),
                    gm = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd jv(nb), jn(nb), jt(nb), att(nb), atn(nb);
    Eigen::MatrixXd jg(nb, 2);
    for (const FacePoint& fp : face_points(space, f)) {
      for (int side = 0; side < sides; ++side) {
        const BasisValues b = space.eval_shape(face.elements[side], fp.xi[side], 2);
        const double sign = side == 0 ? 1.0 : -1.0;
        for (int i = 0; i < nloc; ++i) {
          const int r = side * nloc + i;
          const Eigen::Matrix2d hess = unpack_hessian(b.hess.row(i).transpose());
          jv(r) = sign * b.value(i);
          jg.row(r) = sign * b.grad.row(i);
          att(r) = delta * t.dot(hess * t);
          atn(r) = delta * t.dot(hess * n);
        }
      }
      jn = jg * n;
      jt = jg * t;
      s -= fp.weight * (jt * atn.transpose() + atn * jt.transpose());
      const Eigen::MatrixXd value_part = jv * jv.transpose() / (h * h * h);
      pen += fp.weight * params_.rho * value_part;
      gm += fp.weight * value_part;
      if (interior) {
        s += fp.weight * (jn * att.transpose() + att * jn.transpose());
        const Eigen::MatrixXd grad_part = jg * jg.transpose() / h;
        pen += fp.weight * params_.sigma * grad_part;
        gm += fp.weight * grad_part;
      }
    }
    scatter(ts, dofs, s);
    scatter(tp, dofs, pen);
    scatter(tg, dofs, gm);
  }

  const int n = space.dim();
  stab_.resize(n, n);
  penalty_.resize(n, n);
  gram_.resize(n, n);
  stab_.setFromTriplets(ts.begin(), ts.end());
  penalty_.setFromTriplets(tp.begin(), tp.end());
  gram_.setFromTriplets(tg.begin(), tg.end());
}

Eigen::Matrix2d NonlinearForm::hessian_at(int k, int q, const Eigen::VectorXd& local) const {
  return unpack_hessian(elements_[k].hess.middleRows(3 * q, 3) * local);
}

Eigen::VectorXd NonlinearForm::residual(const Eigen::VectorXd& u) const {
  if (u.size() != space_->dim()) throw std::invalid_argument("residual: coefficient vector has wrong length");
  const DiscreteFunction fn(space_, u);
  const int ne = space_->mesh().num_elements();
  std::vector<Eigen::VectorXd> parts(ne);
  parallel_for(ne, threads_, [&](int k) {
    const ElementData& d = elements_[k];
    const Eigen::VectorXd local = fn.local_coeffs(k);
    Eigen::VectorXd values(d.weights.size());
    for (int q = 0; q < values.size(); ++q)
      values(q) = d.weights(q) * f_gamma_eval(*problem_, d.points[q], hessian_at(k, q, local)).value;
    parts[k] = d.lap.transpose() * values;
  });
  Eigen::VectorXd r = params_.theta * (stab_ * u) + penalty_ * u;
  for (int k = 0; k < ne; ++k) {
    const auto& patch = elements_[k].patch;
    for (std::size_t i = 0; i < patch.size(); ++i) r(patch[i]) += parts[k](i);
  }
  return r;
}

SparseMatrix NonlinearForm::jacobian(const Eigen::VectorXd& u) const {
  if (u.size() != space_->dim()) throw std::invalid_argument("jacobian: coefficient vector has wrong length");
  const DiscreteFunction fn(space_, u);
  const int ne = space_->mesh().num_elements();
  const int nloc = space_->local_size();
  std::vector<Eigen::MatrixXd> parts(ne);
  parallel_for(ne, threads_, [&](int k) {
    const ElementData& d = elements_[k];
    const Eigen::VectorXd local = fn.local_coeffs(k);
    const int nq = static_cast<int>(d.weights.size());
    Eigen::MatrixXd g(nq, nloc);
    for (int q = 0; q < nq; ++q) {
      const PointwiseFG fg = f_gamma_eval(*problem_, d.points[q], hessian_at(k, q, local));
      const Eigen::RowVector3d coef(fg.a(0, 0), fg.a(0, 1) + fg.a(1, 0), fg.a(1, 1));
      g.row(q) = (d.weights(q) * fg.gamma) * (coef * d.hess.middleRows(3 * q, 3));
    }
    parts[k] = d.lap.transpose() * g;
  });
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < ne; ++k) {
    const auto& patch = elements_[k].patch;
    const auto cols = space_->element_dofs(k);
    for (int j = 0; j < nloc; ++j) {
      if (cols[j] < 0) continue;
      for (std::size_t i = 0; i < patch.size(); ++i)
        if (parts[k](i, j) != 0.0) trips.emplace_back(patch[i], cols[j], parts[k](i, j));
    }
  }
  SparseMatrix jac(space_->dim(), space_->dim());
  jac.setFromTriplets(trips.begin(), trips.end());
  jac += params_.theta * stab_ + penalty_;
  jac.makeCompressed();
  return jac;
}

AssembledSystem NonlinearForm::assemble(const Eigen::VectorXd& u) const { return {residual(u), jacobian(u)}; }

std::vector<double> NonlinearForm::residual_squares(const Eigen::VectorXd& u) const {
  const DiscreteFunction fn(space_, u);
  const int ne = space_->mesh().num_elements();
  std::vector<double> out(ne, 0.0);
  parallel_for(ne, threads_, [&](int k) {
    const ElementData& d = elements_[k];
    const Eigen::VectorXd local = fn.local_coeffs(k);
    double sum = 0.0;
    for (int q = 0; q < d.weights.size(); ++q) {
      const double v = f_gamma_eval(*problem_, d.points[q], hessian_at(k, q, local)).value;
      sum += d.weights(q) * v * v;
    }
    out[k] = sum;
  });
  return out;
}

double NonlinearForm::norm(const Eigen::VectorXd& v) const { return std::sqrt(std::max(0.0, v.dot(gram_ * v))); }

Eigen::VectorXd nonlinear_residual(const NonlinearForm& form, const DiscreteFunction& u) {
  return form.residual(u.coeffs());
}

SparseMatrix frozen_jacobian(const NonlinearForm& form, const DiscreteFunction& u) { return form.jacobian(u.coeffs()); }

MonotonicityReport sample_monotonicity(const NonlinearForm& form, int pairs, std::uint64_t seed) {
  if (pairs <= 0) throw std::invalid_argument("sample_monotonicity: need at least one pair");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int n = form.space().dim();
  auto random_vector = [&] {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = unit(rng);
    return v;
  };
  // sup_z |dr.z| / ||z||_k = sqrt(dr^T G^{-1} dr).
  const Eigen::SimplicialLDLT<SparseMatrix> gram(form.norm_matrix());
  if (gram.info() != Eigen::Success) throw std::runtime_error("sample_monotonicity: singular norm matrix");
  MonotonicityReport report;
  report.c_min = std::numeric_limits<double>::infinity();
  report.c_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < pairs; ++i) {
    const Eigen::VectorXd w = random_vector();
    // Alternate between far-apart pairs and nearby pairs.
    const double scale = i % 2 == 0 ? 1.0 : std::pow(10.0, -1.0 - 2.0 * (unit(rng) + 1.0) / 2.0);
    const Eigen::VectorXd v = w + scale * random_vector();
    const Eigen::VectorXd d = w - v;
    const Eigen::VectorXd dr = form.residual(w) - form.residual(v);
    const double dn = form.norm(d);
    if (!(dn > 0.0)) continue;
    const double c = dr.dot(d) / (dn * dn);
    report.c_min = std::min(report.c_min, c);
    report.c_max = std::max(report.c_max, c);
    const double dual = std::sqrt(std::max(0.0, dr.dot(gram.solve(dr))));
    report.lipschitz = std::max(report.lipschitz, dual / dn);
    ++report.samples;
  }
  return report;
}

void write_triplets(std::ostream& out, const SparseMatrix& matrix) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out.precision(17);
  for (int j = 0; j < matrix.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(matrix, j); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  out.flags(flags);
  out.precision(precision);
}

}  // namespace hjb
