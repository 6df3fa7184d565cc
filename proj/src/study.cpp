#include "hjb/study.hpp"

#include "hjb/problems.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace hjb {

namespace {

using nlohmann::json;

template <class T>
T parse_value(const std::string& field, const std::string& text);

template <>
double parse_value<double>(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) throw ConfigError(field, "'" + text + "' is not a number");
  return v;
}

template <>
long parse_value<long>(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError(field, "'" + text + "' is not an integer");
  return v;
}

bool parse_bool(const std::string& field, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(field, "'" + text + "' is not a boolean");
}

Continuity parse_continuity(const std::string& field, const std::string& text) {
  if (text == "dg" || text == "0") return Continuity::dg;
  if (text == "c0ip" || text == "c0" || text == "1") return Continuity::c0;
  throw ConfigError(field, "'" + text + "' is not one of dg, c0ip");
}

RefinementMode parse_mode(const std::string& field, const std::string& text) {
  if (text == "adaptive") return RefinementMode::adaptive;
  if (text == "uniform") return RefinementMode::uniform;
  throw ConfigError(field, "'" + text + "' is not one of adaptive, uniform");
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json fit_json(const std::optional<SlopeFit>& fit) {
  if (!fit) return nullptr;
  return json{{"slope", fit->slope}, {"r2", fit->r2}};
}

}  // namespace

FormParams StudyConfig::form_params() const {
  FormParams p = FormParams::defaults(space);
  if (theta) p.theta = *theta;
  if (sigma) p.sigma = *sigma;
  if (rho) p.rho = *rho;
  return p;
}

void StudyConfig::validate() const {
  try {
    make_problem(problem);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("problem.name", e.what());
  }
  if (space.p < 2) throw ConfigError("space.p", "must be at least 2");
  if (space.lifting_degree() < space.p - 2) throw ConfigError("space.q", "must be at least p - 2");
  if (space.quadrature_degree && *space.quadrature_degree < 2 * space.p)
    throw ConfigError("space.quadrature", "must be at least 2p");
  if (space.quad_degree() > max_quadrature_exactness) throw ConfigError("space.quadrature", "too large");
  const FormParams p = form_params();
  if (!(p.theta >= 0.0 && p.theta <= 1.0)) throw ConfigError("forms.theta", "must lie in [0, 1]");
  if (!(p.sigma > 0.0)) throw ConfigError("forms.sigma", "must be positive");
  if (space.s == Continuity::dg && !(p.rho > 0.0)) throw ConfigError("forms.rho", "must be positive for dg");
  if (!(p.rho >= 0.0)) throw ConfigError("forms.rho", "must be nonnegative");
  try {
    strategy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("adapt.mark", e.what());
  }
  if (stop.max_dofs && *stop.max_dofs <= 0) throw ConfigError("adapt.max_dofs", "must be positive");
  if (stop.max_iters <= 0) throw ConfigError("adapt.max_iters", "must be positive");
  if (!(stop.eta_tol >= 0.0)) throw ConfigError("adapt.eta_tol", "must be nonnegative");
  if (initial_n <= 0) throw ConfigError("adapt.initial_n", "must be positive");
  if (!(solve.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
  if (solve.max_newton < 0) throw ConfigError("solver.max_newton", "must be nonnegative");
  if (!(solve.damping > 0.0 && solve.damping < 1.0)) throw ConfigError("solver.damping", "must lie in (0, 1)");
  if (solve.fallback_tau && !(*solve.fallback_tau > 0.0)) throw ConfigError("solver.fallback_tau", "must be positive");
  if (threads <= 0) throw ConfigError("run.threads", "must be positive");
  if (out_dir.empty()) throw ConfigError("output.dir", "must not be empty");
}

StudyConfig read_config(std::istream& in, StudyConfig c) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", std::string("line ") + std::to_string(e.line()) + ": " + e.message());
  }
  using Setter = std::function<void(const std::string& field, const std::string& value)>;
  const std::map<std::string, Setter> setters{
      {"problem.name", [&](auto&, const std::string& v) { c.problem = v; }},
      {"space.p", [&](auto& f, const std::string& v) { c.space.p = static_cast<int>(parse_value<long>(f, v)); }},
      {"space.q", [&](auto& f, const std::string& v) { c.space.q = static_cast<int>(parse_value<long>(f, v)); }},
      {"space.cont", [&](auto& f, const std::string& v) { c.space.s = parse_continuity(f, v); }},
      {"space.quadrature",
       [&](auto& f, const std::string& v) { c.space.quadrature_degree = static_cast<int>(parse_value<long>(f, v)); }},
      {"forms.theta", [&](auto& f, const std::string& v) { c.theta = parse_value<double>(f, v); }},
      {"forms.sigma", [&](auto& f, const std::string& v) { c.sigma = parse_value<double>(f, v); }},
      {"forms.rho", [&](auto& f, const std::string& v) { c.rho = parse_value<double>(f, v); }},
      {"adapt.mode", [&](auto& f, const std::string& v) { c.mode = parse_mode(f, v); }},
      {"adapt.mark",
       [&](auto& f, const std::string& v) {
         try {
           c.strategy = MarkingStrategy::parse(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(f, e.what());
         }
       }},
      {"adapt.max_dofs", [&](auto& f, const std::string& v) { c.stop.max_dofs = parse_value<long>(f, v); }},
      {"adapt.max_iters", [&](auto& f, const std::string& v) { c.stop.max_iters = static_cast<int>(parse_value<long>(f, v)); }},
      {"adapt.eta_tol", [&](auto& f, const std::string& v) { c.stop.eta_tol = parse_value<double>(f, v); }},
      {"adapt.initial_n", [&](auto& f, const std::string& v) { c.initial_n = static_cast<int>(parse_value<long>(f, v)); }},
      {"solver.tol", [&](auto& f, const std::string& v) { c.solve.tol = parse_value<double>(f, v); }},
      {"solver.max_newton",
       [&](auto& f, const std::string& v) { c.solve.max_newton = static_cast<int>(parse_value<long>(f, v)); }},
      {"solver.damping", [&](auto& f, const std::string& v) { c.solve.damping = parse_value<double>(f, v); }},
      {"solver.fallback_tau", [&](auto& f, const std::string& v) { c.solve.fallback_tau = parse_value<double>(f, v); }},
      {"output.dir", [&](auto&, const std::string& v) { c.out_dir = v; }},
      {"output.meshes", [&](auto& f, const std::string& v) { c.write_meshes = parse_bool(f, v); }},
      {"output.vtk", [&](auto& f, const std::string& v) { c.write_vtk = parse_bool(f, v); }},
      {"output.solutions", [&](auto& f, const std::string& v) { c.write_solutions = parse_bool(f, v); }},
      {"run.seed",
       [&](auto& f, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_value<long>(f, v)); }},
      {"run.threads", [&](auto& f, const std::string& v) { c.threads = static_cast<int>(parse_value<long>(f, v)); }},
  };
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty())
      throw ConfigError(section, "key outside of a section");
    for (const auto& [key, node] : entries) {
      const std::string field = section + "." + key;
      const auto it = setters.find(field);
      if (it == setters.end()) throw ConfigError(field, "unknown setting");
      it->second(field, node.data());
    }
  }
  return c;
}

StudyConfig read_config_file(const std::filesystem::path& path, StudyConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return read_config(in, std::move(base));
}

void write_config(std::ostream& out, const StudyConfig& c) {
  const FormParams p = c.form_params();
  out << "[problem]\nname = " << c.problem << "\n\n";
  out << "[space]\np = " << c.space.p << "\nq = " << c.space.lifting_degree()
      << "\ncont = " << (c.space.s == Continuity::dg ? "dg" : "c0ip") << "\nquadrature = " << c.space.quad_degree()
      << "\n\n";
  out << "[forms]\ntheta = " << number(p.theta) << "\nsigma = " << number(p.sigma) << "\nrho = " << number(p.rho)
      << "\n\n";
  out << "[adapt]\nmode = " << (c.mode == RefinementMode::uniform ? "uniform" : "adaptive")
      << "\nmark = " << c.strategy.to_string() << "\n";
  if (c.stop.max_dofs) out << "max_dofs = " << *c.stop.max_dofs << "\n";
  out << "max_iters = " << c.stop.max_iters << "\neta_tol = " << number(c.stop.eta_tol)
      << "\ninitial_n = " << c.initial_n << "\n\n";
  out << "[solver]\ntol = " << number(c.solve.tol) << "\nmax_newton = " << c.solve.max_newton
      << "\ndamping = " << number(c.solve.damping) << "\n";
  if (c.solve.fallback_tau) out << "fallback_tau = " << number(*c.solve.fallback_tau) << "\n";
  out << "\n[run]\nseed = " << c.seed << "\nthreads = " << c.threads << "\n";
}

std::optional<SlopeFit> fit_loglog(const std::vector<double>& x, const std::vector<double>& y, int last,
                                   int min_points) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_loglog: size mismatch");
  if (static_cast<int>(x.size()) < min_points || last < 2) return std::nullopt;
  std::vector<double> lx, ly;
  for (std::size_t i = x.size() - std::min<std::size_t>(x.size(), last); i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::nullopt;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / n, my += ly[i] / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

StudySummary summarize(const std::string& problem, const AdaptiveTrace& trace) {
  StudySummary s;
  s.problem = problem;
  s.levels = static_cast<int>(trace.records.size());
  s.error = trace.error;
  std::vector<double> ndofs, h, eta, err;
  bool have_error = !trace.records.empty();
  for (const auto& r : trace.records) {
    ndofs.push_back(r.ndofs);
    h.push_back(r.h_max);
    eta.push_back(r.eta_total);
    have_error = have_error && r.error_norm_k.has_value();
    if (r.error_norm_k) err.push_back(*r.error_norm_k);
  }
  s.slope_eta = fit_loglog(ndofs, eta);
  s.slope_eta_h = fit_loglog(h, eta);
  if (have_error) {
    s.slope_error = fit_loglog(ndofs, err);
    s.slope_error_h = fit_loglog(h, err);
    for (std::size_t i = 0; i < err.size(); ++i) {
      if (!(err[i] > 0.0) || !(eta[i] > 0.0)) continue;
      const double ratio = eta[i] / err[i];
      s.ratio_min = std::min(s.ratio_min.value_or(ratio), ratio);
      s.ratio_max = std::max(s.ratio_max.value_or(ratio), ratio);
    }
    if (s.ratio_min) {
      s.c_rel_obs = 1.0 / *s.ratio_min;
      s.c_eff_obs = *s.ratio_max;
    }
  }
  return s;
}

void write_trace_csv(std::ostream& out, const AdaptiveTrace& trace) {
  out << "iter,ndofs,h_min,h_max,eta_total,eta_residual,eta_gradjump,eta_valjump,err_norm_k,newton_iters,marked\n";
  for (const auto& r : trace.records) {
    out << r.k << ',' << r.ndofs << ',' << number(r.h_min) << ',' << number(r.h_max) << ',' << number(r.eta_total)
        << ',' << number(r.eta_residual) << ',' << number(r.eta_gradjump) << ',' << number(r.eta_valjump) << ','
        << (r.error_norm_k ? number(*r.error_norm_k) : std::string()) << ',' << r.solve.newton_iters << ','
        << r.marked << '\n';
  }
}

void write_trace_json(std::ostream& out, const AdaptiveTrace& trace) {
  json records = json::array();
  for (const auto& r : trace.records) {
    records.push_back({{"iter", r.k},
                       {"ndofs", r.ndofs},
                       {"elements", r.num_elements},
                       {"h_min", r.h_min},
                       {"h_max", r.h_max},
                       {"eta_total", r.eta_total},
                       {"eta_residual", r.eta_residual},
                       {"eta_gradjump", r.eta_gradjump},
                       {"eta_valjump", r.eta_valjump},
                       {"err_norm_k", optional_number(r.error_norm_k)},
                       {"solution_norm_k", r.solution_norm_k},
                       {"marked", r.marked},
                       {"argmax_marked", r.argmax_marked},
                       {"solver",
                        {{"newton_iters", r.solve.newton_iters},
                         {"fallback_iters", r.solve.fallback_iters},
                         {"final_residual", r.solve.final_residual},
                         {"stopped_at_rounding", r.solve.stopped_at_rounding},
                         {"residual_history", r.solve.residual_history}}}});
  }
  json doc{{"records", records}, {"error", trace.error ? json(*trace.error) : json(nullptr)}};
  out << doc.dump(2) << '\n';
}

void write_summary_json(std::ostream& out, const StudyConfig& config, const StudySummary& s) {
  const FormParams p = config.form_params();
  json params{{"p", config.space.p},
              {"q", config.space.lifting_degree()},
              {"cont", config.space.s == Continuity::dg ? "dg" : "c0ip"},
              {"quadrature", config.space.quad_degree()},
              {"theta", p.theta},
              {"sigma", p.sigma},
              {"rho", p.rho},
              {"mode", config.mode == RefinementMode::uniform ? "uniform" : "adaptive"},
              {"mark", config.strategy.to_string()},
              {"max_dofs", config.stop.max_dofs ? json(*config.stop.max_dofs) : json(nullptr)},
              {"max_iters", config.stop.max_iters},
              {"eta_tol", config.stop.eta_tol},
              {"solver_tol", config.solve.tol},
              {"seed", config.seed}};
  auto slope = [](const std::optional<SlopeFit>& f) { return f ? json(f->slope) : json(nullptr); };
  json doc{{"problem", s.problem},
           {"params", params},
           {"levels", s.levels},
           {"slope_error", slope(s.slope_error)},
           {"slope_eta", slope(s.slope_eta)},
           {"slope_error_h", slope(s.slope_error_h)},
           {"slope_eta_h", slope(s.slope_eta_h)},
           {"fit_error", fit_json(s.slope_error)},
           {"fit_eta", fit_json(s.slope_eta)},
           {"fit_error_h", fit_json(s.slope_error_h)},
           {"fit_eta_h", fit_json(s.slope_eta_h)},
           {"c_rel_obs", optional_number(s.c_rel_obs)},
           {"c_eff_obs", optional_number(s.c_eff_obs)},
           {"eta_error_ratio_min", optional_number(s.ratio_min)},
           {"eta_error_ratio_max", optional_number(s.ratio_max)},
           {"error", s.error ? json(*s.error) : json(nullptr)}};
  out << doc.dump(2) << '\n';
}

StudyResult run_study(const StudyConfig& config) {
  config.validate();
  const ControlProblem problem = make_problem(config.problem);
  std::filesystem::create_directories(config.out_dir);

  AdaptiveConfig ac;
  ac.space = config.space;
  ac.params = config.form_params();
  ac.strategy = config.strategy;
  ac.stop = config.stop;
  ac.mode = config.mode;
  ac.solve = config.solve;
  ac.solve.seed = config.seed;
  ac.initial_n = config.initial_n;
  ac.threads = config.threads;

  auto open = [&](const std::string& name) {
    std::ofstream f(config.out_dir / name);
    if (!f) throw std::runtime_error("cannot write " + (config.out_dir / name).string());
    return f;
  };
  const IterationObserver observer = [&](const IterationRecord& rec, const MeshLevel& mesh, const DiscreteFunction& u,
                                         const EstimatorReport&) {
    const std::string k = std::to_string(rec.k);
    if (config.write_meshes) {
      auto f = open("mesh_" + k + ".txt");
      write_mesh_text(f, mesh);
    }
    if (config.write_vtk) {
      auto f = open("mesh_" + k + ".vtk");
      write_mesh_vtk(f, mesh);
    }
    if (config.write_solutions) {
      auto f = open("solution_" + k + ".txt");
      write_function_samples(f, u, 2 * config.space.p);
    }
  };

  StudyResult result;
  result.trace = adaptive_solve(problem, ac, observer);
  result.summary = summarize(config.problem, result.trace);
  {
    auto f = open("trace.csv");
    write_trace_csv(f, result.trace);
  }
  {
    auto f = open("trace.json");
    write_trace_json(f, result.trace);
  }
  {
    auto f = open("summary.json");
    write_summary_json(f, config, result.summary);
  }
  {
    auto f = open("config.ini");
    write_config(f, config);
  }
  return result;
}

}  // namespace hjb
