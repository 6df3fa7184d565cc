#pragma once

#include "hjb/forms.hpp"
#include "hjb/solver.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hjb {

struct ElementEstimate {
  int element = 0;
  double eta_sq_residual = 0.0;
  double eta_sq_gradjump = 0.0;
  double eta_sq_valjump = 0.0;

  double eta_sq() const { return eta_sq_residual + eta_sq_gradjump + eta_sq_valjump; }
};

struct EstimatorReport {
  std::vector<ElementEstimate> per_element;
  double total = 0.0;  // sqrt of the sum of all parts
  double residual = 0.0, gradjump = 0.0, valjump = 0.0;  // square roots of the summed parts
};

/// Element estimators: int_K F_gamma[u]^2 plus delta_F-weighted gradient
/// jumps over interior faces and value jumps over all faces of K.
EstimatorReport estimate(const ControlProblem& problem, const DiscreteFunction& u, int threads = 1);

struct MarkingStrategy {
  enum class Kind { max_fraction, doerfler };
  Kind kind = Kind::doerfler;
  double parameter = 0.5;

  /// "max:0.5", "doerfler:0.5", or a bare "max" / "doerfler".
  static MarkingStrategy parse(const std::string& text);
  std::string to_string() const;
  void validate() const;
};

/// Sorted element ids. Always contains an element of largest estimator.
std::vector<int> mark(const EstimatorReport& report, const MarkingStrategy& strategy);

struct StopCriteria {
  std::optional<long> max_dofs;  // no solve on a larger space after the first iteration
  double eta_tol = 0.0;
  int max_iters = 20;
};

enum class RefinementMode { adaptive, uniform };

struct AdaptiveConfig {
  SpaceConfig space;
  std::optional<FormParams> params;  // defaults from the space config
  MarkingStrategy strategy;
  StopCriteria stop;
  RefinementMode mode = RefinementMode::adaptive;
  SolveOptions solve;
  int initial_n = 2;  // initial mesh: unit_square_mesh(initial_n), or the problem polygon if not the unit square
  int threads = 1;
};

struct IterationRecord {
  int k = 0;
  int ndofs = 0;
  int num_elements = 0;
  double h_min = 0.0, h_max = 0.0;
  double eta_total = 0.0, eta_residual = 0.0, eta_gradjump = 0.0, eta_valjump = 0.0;
  std::optional<double> error_norm_k;
  double solution_norm_k = 0.0;
  SolveStats solve;
  int marked = 0;
  bool argmax_marked = true;
};

struct AdaptiveTrace {
  std::vector<IterationRecord> records;
  std::optional<std::string> error;  // set when a solve failed; records hold the completed iterations
};

using IterationObserver =
    std::function<void(const IterationRecord&, const MeshLevel&, const DiscreteFunction&, const EstimatorReport&)>;

/// Solve, estimate, mark, refine until a stop criterion holds.
AdaptiveTrace adaptive_solve(const ControlProblem& problem, const AdaptiveConfig& config,
                             const IterationObserver& observer = {});

/// Initial mesh used by adaptive_solve.
MeshLevel initial_mesh(const ControlProblem& problem, int n);

}  // namespace hjb
