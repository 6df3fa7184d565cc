#pragma once

#include "hjb/cordes.hpp"

#include <string>
#include <vector>

namespace hjb {

struct BenchmarkProblem {
  ControlProblem problem;
  std::string notes;
};

/// poisson_singleton, two_control_switch, rotated_anisotropic, homogeneous.
std::vector<BenchmarkProblem> registry();
std::vector<std::string> registry_names();

/// Throws std::invalid_argument for unknown names.
ControlProblem make_problem(const std::string& name);

/// sin(pi x) sin(pi y) on the unit square.
ExactSolution sine_solution();

}  // namespace hjb
