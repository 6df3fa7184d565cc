#pragma once

#include "hjb/adapt.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjb {

/// Invalid configuration; the message starts with the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct StudyConfig {
  std::string problem = "poisson_singleton";
  SpaceConfig space;
  std::optional<double> theta, sigma, rho;  // unset: FormParams::defaults
  MarkingStrategy strategy;
  StopCriteria stop;
  RefinementMode mode = RefinementMode::adaptive;
  SolveOptions solve;
  int initial_n = 2;
  std::filesystem::path out_dir = "out";
  bool write_meshes = true;
  bool write_vtk = false;
  bool write_solutions = false;
  std::uint64_t seed = 1;
  int threads = 1;

  FormParams form_params() const;
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Reads `[section] key = value` text. Unknown sections or keys and
/// malformed values throw ConfigError.
StudyConfig read_config(std::istream& in, StudyConfig base = {});
StudyConfig read_config_file(const std::filesystem::path& path, StudyConfig base = {});
void write_config(std::ostream& out, const StudyConfig& config);

struct SlopeFit {
  double slope = 0.0;
  double r2 = 0.0;
};

/// Least squares fit of log y against log x over the last `last` points.
/// Empty when fewer than `min_points` usable points are given.
std::optional<SlopeFit> fit_loglog(const std::vector<double>& x, const std::vector<double>& y, int last = 3,
                                   int min_points = 4);

struct StudySummary {
  std::string problem;
  int levels = 0;
  std::optional<SlopeFit> slope_error;    // against ndofs
  std::optional<SlopeFit> slope_eta;      // against ndofs
  std::optional<SlopeFit> slope_error_h;  // against h_max
  std::optional<SlopeFit> slope_eta_h;
  std::optional<double> c_rel_obs;  // max error / eta
  std::optional<double> c_eff_obs;  // max eta / error
  std::optional<double> ratio_min, ratio_max;  // range of eta / error
  std::optional<std::string> error;
};

StudySummary summarize(const std::string& problem, const AdaptiveTrace& trace);

struct StudyResult {
  AdaptiveTrace trace;
  StudySummary summary;
};

/// Runs the study and writes trace.csv, trace.json, summary.json and the
/// optional per-level files into config.out_dir.
StudyResult run_study(const StudyConfig& config);

void write_trace_csv(std::ostream& out, const AdaptiveTrace& trace);
void write_trace_json(std::ostream& out, const AdaptiveTrace& trace);
void write_summary_json(std::ostream& out, const StudyConfig& config, const StudySummary& summary);

}  // namespace hjb
