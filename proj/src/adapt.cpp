#include "hjb/adapt.hpp"

#include "hjb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hjb {

EstimatorReport estimate(const ControlProblem& problem, const DiscreteFunction& u, int threads) {
  const FESpace& space = u.space();
  const MeshLevel& mesh = space.mesh();
  const QuadratureRule& rule = space.volume_rule();
  const int ne = mesh.num_elements();
  EstimatorReport report;
  report.per_element.resize(ne);

  parallel_for(ne, threads, [&](int k) {
    const ElementGeometry& g = space.geometry(k);
    double sum = 0.0;
    for (int i = 0; i < rule.size(); ++i) {
      const double v = f_gamma_eval(problem, g.to_physical(rule.points[i]), u.evaluate(k, rule.points[i]).hess).value;
      sum += rule.weights[i] * std::abs(g.det) * v * v;
    }
    report.per_element[k].element = k;
    report.per_element[k].eta_sq_residual = sum;
  });

  std::vector<std::array<double, 2>> face_parts(mesh.num_faces());
  parallel_for(mesh.num_faces(), threads, [&](int f) {
    const Face& face = mesh.faces()[f];
    const double h = mesh.face_length(f);
    double grad = 0.0, value = 0.0;
    for (const FacePoint& fp : face_points(space, f)) {
      const LocalJet a = u.evaluate(face.elements[0], fp.xi[0], 1);
      double jv = a.value;
      Eigen::Vector2d jg = a.grad;
      if (face.is_interior()) {
        const LocalJet b = u.evaluate(face.elements[1], fp.xi[1], 1);
        jv -= b.value;
        jg -= b.grad;
        grad += fp.weight * jg.squaredNorm() / h;
      }
      value += fp.weight * jv * jv / (h * h * h);
    }
    face_parts[f] = {grad, value};
  });
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    const double delta = face.is_interior() ? 0.5 : 1.0;
    for (int s = 0; s < 2; ++s) {
      if (face.elements[s] < 0) continue;
      ElementEstimate& e = report.per_element[face.elements[s]];
      e.eta_sq_gradjump += delta * face_parts[f][0];
      e.eta_sq_valjump += delta * face_parts[f][1];
    }
  }
  double r = 0.0, gj = 0.0, vj = 0.0;
  for (const ElementEstimate& e : report.per_element) {
    r += e.eta_sq_residual;
    gj += e.eta_sq_gradjump;
    vj += e.eta_sq_valjump;
  }
  report.residual = std::sqrt(r);
  report.gradjump = std::sqrt(gj);
  report.valjump = std::sqrt(vj);
  report.total = std::sqrt(r + gj + vj);
  return report;
}

MarkingStrategy MarkingStrategy::parse(const std::string& text) {
  MarkingStrategy s;
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  if (name == "max") {
    s.kind = Kind::max_fraction;
  } else if (name == "doerfler" || name == "dorfler") {
    s.kind = Kind::doerfler;
  } else {
    throw std::invalid_argument("unknown marking strategy '" + name + "' (use max:<mu> or doerfler:<theta>)");
  }
  if (colon != std::string::npos) {
    const std::string value = text.substr(colon + 1);
    std::size_t used = 0;
    try {
      s.parameter = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size())
      throw std::invalid_argument("marking parameter '" + value + "' is not a number");
  }
  s.validate();
  return s;
}

std::string MarkingStrategy::to_string() const {
  return (kind == Kind::max_fraction ? "max:" : "doerfler:") + std::to_string(parameter);
}

void MarkingStrategy::validate() const {
  if (!(parameter > 0.0 && parameter <= 1.0)) throw std::invalid_argument("marking parameter must lie in (0, 1]");
}

std::vector<int> mark(const EstimatorReport& report, const MarkingStrategy& strategy) {
  strategy.validate();
  const auto& els = report.per_element;
  if (els.empty()) throw std::invalid_argument("mark: empty estimator report");
  std::vector<int> order(els.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (els[a].eta_sq() != els[b].eta_sq()) return els[a].eta_sq() > els[b].eta_sq();
    return els[a].element < els[b].element;
  });

  std::vector<int> marked{els[order[0]].element};
  if (strategy.kind == MarkingStrategy::Kind::max_fraction) {
    const double threshold = strategy.parameter * std::sqrt(els[order[0]].eta_sq());
    for (std::size_t i = 1; i < order.size(); ++i)
      if (std::sqrt(els[order[i]].eta_sq()) >= threshold) marked.push_back(els[order[i]].element);
  } else {
    double total = 0.0;
    for (const ElementEstimate& e : els) total += e.eta_sq();
    double sum = els[order[0]].eta_sq();
    for (std::size_t i = 1; i < order.size() && sum < strategy.parameter * total; ++i) {
      marked.push_back(els[order[i]].element);
      sum += els[order[i]].eta_sq();
    }
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

MeshLevel initial_mesh(const ControlProblem& problem, int n) {
  const std::vector<Point2> square{Point2(0, 0), Point2(1, 0), Point2(1, 1), Point2(0, 1)};
  bool is_square = problem.domain.size() == 4;
  for (std::size_t i = 0; is_square && i < 4; ++i) is_square = (problem.domain[i] - square[i]).norm() < 1e-14;
  if (is_square) return unit_square_mesh(n);
  MeshLevel mesh = convex_polygon_mesh(problem.domain);
  for (int i = 1; i < n; ++i) mesh = refine_uniform(mesh, 2);
  return mesh;
}

AdaptiveTrace adaptive_solve(const ControlProblem& problem, const AdaptiveConfig& config,
                             const IterationObserver& observer) {
  problem.validate();
  config.space.validate();
  config.strategy.validate();
  const FormParams params = config.params.value_or(FormParams::defaults(config.space));
  params.validate(config.space.s);
  auto pproblem = std::make_shared<const ControlProblem>(problem);

  AdaptiveTrace trace;
  auto mesh = std::make_shared<const MeshLevel>(initial_mesh(problem, config.initial_n));
  std::optional<DiscreteFunction> previous;
  for (int k = 0; k < config.stop.max_iters; ++k) {
    auto space = build_space(mesh, config.space);
    if (k > 0 && config.stop.max_dofs && space->dim() > *config.stop.max_dofs) break;

    const NonlinearForm form(space, pproblem, params, config.threads);
    std::optional<DiscreteFunction> guess;
    if (previous) guess = transfer(*previous, space);
    SolveResult solved{DiscreteFunction(space), {}};
    try {
      solved = solve_discrete(form, config.solve, guess);
    } catch (const SolveError& e) {
      trace.error = e.what();
      return trace;
    } catch (const std::runtime_error& e) {
      trace.error = e.what();
      return trace;
    }

    const EstimatorReport report = estimate(problem, solved.u, config.threads);
    const SizeData h = sizes(*mesh);
    IterationRecord rec;
    rec.k = k;
    rec.ndofs = space->dim();
    rec.num_elements = mesh->num_elements();
    rec.h_min = *std::min_element(h.element.begin(), h.element.end());
    rec.h_max = *std::max_element(h.element.begin(), h.element.end());
    rec.eta_total = report.total;
    rec.eta_residual = report.residual;
    rec.eta_gradjump = report.gradjump;
    rec.eta_valjump = report.valjump;
    if (problem.exact) rec.error_norm_k = error_norm_k(solved.u, *problem.exact);
    rec.solution_norm_k = form.norm(solved.u.coeffs());
    rec.solve = solved.stats;

    const bool last = k + 1 >= config.stop.max_iters || report.total <= config.stop.eta_tol;
    std::vector<int> marked;
    if (config.mode == RefinementMode::uniform) {
      marked.resize(mesh->num_elements());
      std::iota(marked.begin(), marked.end(), 0);
    } else {
      marked = mark(report, config.strategy);
    }
    double eta_max = 0.0;
    for (const auto& e : report.per_element) eta_max = std::max(eta_max, e.eta_sq());
    rec.argmax_marked = std::any_of(marked.begin(), marked.end(),
                                    [&](int id) { return report.per_element[id].eta_sq() == eta_max; });
    rec.marked = last ? 0 : static_cast<int>(marked.size());
    trace.records.push_back(rec);
    if (observer) observer(rec, *mesh, solved.u, report);
    if (last) break;

    previous = solved.u;
    mesh = std::make_shared<const MeshLevel>(config.mode == RefinementMode::uniform ? refine_uniform(*mesh, 2)
                                                                                    : refine_conforming(*mesh, marked));
  }
  return trace;
}

}  // namespace hjb
