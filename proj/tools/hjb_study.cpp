// Batch driver for uniform and adaptive convergence studies.

#include "hjb/problems.hpp"
#include "hjb/study.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
  std::optional<std::string> problem, cont, mark, out;
  std::optional<int> p, q, quadrature, max_iters, threads, initial_n, max_newton;
  std::optional<long> max_dofs;
  std::optional<double> theta, sigma, rho, eta_tol, tol;
  std::optional<std::uint64_t> seed;
  bool uniform = false, adaptive = false, vtk = false, no_meshes = false, solutions = false;
};

void apply(const Overrides& o, hjb::StudyConfig& c) {
  if (o.problem) c.problem = *o.problem;
  if (o.p) c.space.p = *o.p;
  if (o.q) c.space.q = *o.q;
  if (o.quadrature) c.space.quadrature_degree = *o.quadrature;
  if (o.cont) {
    if (*o.cont == "dg") {
      c.space.s = hjb::Continuity::dg;
    } else if (*o.cont == "c0ip" || *o.cont == "c0") {
      c.space.s = hjb::Continuity::c0;
    } else {
      throw hjb::ConfigError("--cont", "'" + *o.cont + "' is not one of dg, c0ip");
    }
  }
  if (o.theta) c.theta = *o.theta;
  if (o.sigma) c.sigma = *o.sigma;
  if (o.rho) c.rho = *o.rho;
  if (o.mark) {
    try {
      c.strategy = hjb::MarkingStrategy::parse(*o.mark);
    } catch (const std::invalid_argument& e) {
      throw hjb::ConfigError("--mark", e.what());
    }
  }
  if (o.max_dofs) c.stop.max_dofs = *o.max_dofs;
  if (o.max_iters) c.stop.max_iters = *o.max_iters;
  if (o.eta_tol) c.stop.eta_tol = *o.eta_tol;
  if (o.initial_n) c.initial_n = *o.initial_n;
  if (o.tol) c.solve.tol = *o.tol;
  if (o.max_newton) c.solve.max_newton = *o.max_newton;
  if (o.uniform) c.mode = hjb::RefinementMode::uniform;
  if (o.adaptive) c.mode = hjb::RefinementMode::adaptive;
  if (o.out) c.out_dir = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.vtk) c.write_vtk = true;
  if (o.no_meshes) c.write_meshes = false;
  if (o.solutions) c.write_solutions = true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive DG / C0-IP solver for HJB and Isaacs equations"};
  std::optional<std::string> config_path;
  Overrides o;
  bool list = false, show_config = false, quiet = false;
  app.add_option("--config", config_path, "Config file ([section] key = value)");
  app.add_option("--problem", o.problem, "Registry problem");
  app.add_option("--p", o.p, "Polynomial degree (>= 2)");
  app.add_option("--q", o.q, "Lifting degree (>= p - 2, default p)");
  app.add_option("--quadrature", o.quadrature, "Quadrature exactness");
  app.add_option("--cont", o.cont, "dg | c0ip");
  app.add_option("--theta", o.theta, "Stabilization weight in [0, 1]");
  app.add_option("--sigma", o.sigma, "Gradient jump penalty");
  app.add_option("--rho", o.rho, "Value jump penalty");
  app.add_option("--mark", o.mark, "max:<mu> | doerfler:<theta>");
  app.add_option("--max-dofs", o.max_dofs, "Do not solve on spaces larger than this");
  app.add_option("--max-iters,--levels", o.max_iters, "Number of solve-estimate-mark-refine iterations");
  app.add_option("--eta-tol", o.eta_tol, "Stop once the estimator is below this");
  app.add_option("--initial-n", o.initial_n, "Initial mesh divisions");
  app.add_option("--tol", o.tol, "Solver tolerance");
  app.add_option("--max-newton", o.max_newton, "Newton iteration limit");
  app.add_flag("--uniform", o.uniform, "Uniform refinement");
  app.add_flag("--adaptive", o.adaptive, "Adaptive refinement");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--seed", o.seed, "Seed for sampled checks");
  app.add_option("--threads", o.threads, "Assembly threads");
  app.add_flag("--vtk", o.vtk, "Write mesh_<k>.vtk");
  app.add_flag("--no-meshes", o.no_meshes, "Skip mesh_<k>.txt");
  app.add_flag("--solutions", o.solutions, "Write solution samples per level");
  app.add_flag("--list-problems", list, "List registry problems and exit");
  app.add_flag("--show-config", show_config, "Print the effective configuration and exit");
  app.add_flag("--quiet", quiet, "No progress table");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& b : hjb::registry()) std::cout << b.problem.name << "  " << b.notes << '\n';
    return 0;
  }

  hjb::StudyConfig config;
  try {
    if (config_path) config = hjb::read_config_file(*config_path);
    apply(o, config);
    config.validate();
  } catch (const hjb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  if (o.uniform && o.adaptive) {
    std::cerr << "config error: --uniform and --adaptive are exclusive\n";
    return 2;
  }
  if (show_config) {
    hjb::write_config(std::cout, config);
    return 0;
  }

  hjb::StudyResult result;
  try {
    result = hjb::run_study(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (!quiet) {
    std::printf("%4s %8s %12s %12s %12s %7s %7s\n", "iter", "ndofs", "h_max", "eta", "err_k", "newton", "marked");
    for (const auto& r : result.trace.records)
      std::printf("%4d %8d %12.4e %12.4e %12.4e %7d %7d\n", r.k, r.ndofs, r.h_max, r.eta_total,
                  r.error_norm_k.value_or(0.0), r.solve.newton_iters, r.marked);
    const auto& s = result.summary;
    if (s.slope_error_h) std::printf("error slope vs h: %.3f (R^2 %.4f)\n", s.slope_error_h->slope, s.slope_error_h->r2);
    if (s.slope_error) std::printf("error slope vs ndofs: %.3f\n", s.slope_error->slope);
    if (s.slope_eta) std::printf("eta slope vs ndofs: %.3f\n", s.slope_eta->slope);
    if (s.ratio_min) std::printf("eta/error in [%.4f, %.4f]\n", *s.ratio_min, *s.ratio_max);
    std::printf("outputs in %s\n", config.out_dir.string().c_str());
  }
  if (result.trace.error) {
    std::cerr << "solver failure: " << *result.trace.error << " (partial outputs written)\n";
    return 1;
  }
  return 0;
}
