#pragma once

#include "freqlab/audit.hpp"
#include "freqlab/identities.hpp"
#include "freqlab/problem_config.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace freqlab::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,        ///< bad config, arguments or input file
  kNoConvergence = 3,
  kContradiction = 4,
  kResidualVeto = 5,
  kInconclusive = 6,
};

inline constexpr int kSchemaVersion = 1;

/// [grid] section.
struct GridConfig {
  double h = 1e-3;       ///< radial step
  int M = 64;            ///< radial cells of the polar grid
  int K = 64;            ///< angular points
  int stride = 0;        ///< radius-grid spacing in samples (0: module default)
  double damping = 0.5;
  double tol = 1e-10;
  int max_iters = 500;
  bool operator==(const GridConfig&) const = default;
};

/// [tolerances] section; zero means the module default.
struct ToleranceConfig {
  double h_prime = 0.0;
  double pohozaev = 0.0;
  double log_derivative = 0.0;
  double defect_match = 1e-4;
  double rellich = 5e-6;
  double kinematic = 0.0;
  double cs_gap = 1e-10;
  double z_nu = 1e-12;
  double tol_d = 1e-10;
  double residual_factor = 10.0;
  double residual_floor = 1e-9;
  double residual_abs = 1e-8;
  bool operator==(const ToleranceConfig&) const = default;

  freq::Tolerances identities() const;
  audit::AuditControls audit() const;
};

/// [options] section: per-command parameters.
///   ode:   mode = counterexample | energy | shooting | pme
///   solve: mode = radial | grid | glued | sample
struct OptionsConfig {
  std::string mode;
  double a = 0.5;          ///< u(0) for shooting / radial solves
  double t0 = 0.0;         ///< glue point (counterexample) or PME time shift
  double t_end = 10.0;     ///< integration length
  int points = 1000;       ///< samples per branch (counterexample)
  std::string boundary = "0.3";  ///< grid boundary data, expression in s = theta
  std::string exact;       ///< manufactured / sampled field, expression in x1, x2
  double glue_radius = 0.5;
  std::string levels = "16, 32, 64";  ///< grid sizes of the convergence table
  double t_lo = 0.5, t_hi = 2.0;
  int nx = 64, nt = 64;
  bool operator==(const OptionsConfig&) const = default;
};

/// A run configuration: INI sections [run], [grid], [tolerances], [options]
/// and the problem sections of core::ProblemConfig (or [run] problem = FILE).
struct RunConfig {
  std::string command;
  std::string output = "freq-lab-out";
  std::uint64_t seed = 20240101;
  std::string field;         ///< input field file (frequency, audit)
  std::string problem_file;  ///< optional; replaces the inline problem sections
  int jobs = 1;
  core::ProblemConfig problem;
  GridConfig grid;
  ToleranceConfig tolerances;
  OptionsConfig options;
  bool operator==(const RunConfig&) const = default;

  void validate() const;
  std::string serialize() const;
  /// Relative problem paths are resolved against base_dir.
  static RunConfig parse(const std::string& ini, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& file);
};

struct ManifestEntry {
  std::string file;
  std::uintmax_t bytes = 0;
  std::string fnv1a;
};

/// What a command produced. Timestamps are kept out of content_hash.
struct RunRecord {
  std::string command;
  std::string config_snapshot;
  std::string started, finished;
  std::vector<ManifestEntry> manifest;
  nlohmann::json summary;
  int exit_code = kOk;
  std::string content_hash;

  nlohmann::json to_json() const;
};

/// Collects output files under one directory and records them.
class OutputDir {
public:
  explicit OutputDir(std::filesystem::path dir);
  const std::filesystem::path& path() const { return dir_; }
  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const nlohmann::json& j);
  const std::vector<ManifestEntry>& manifest() const { return manifest_; }

private:
  std::filesystem::path dir_;
  std::vector<ManifestEntry> manifest_;
};

/// FREQ_LAB_OUT overrides cfg.output.
std::filesystem::path output_dir(const RunConfig& cfg);

int cmd_ode(const RunConfig& cfg, RunRecord& rec, OutputDir& out);
int cmd_solve(const RunConfig& cfg, RunRecord& rec, OutputDir& out);
int cmd_frequency(const RunConfig& cfg, RunRecord& rec, OutputDir& out);
int cmd_audit(const RunConfig& cfg, RunRecord& rec, OutputDir& out);
int cmd_check(const RunConfig& cfg, RunRecord& rec, OutputDir& out);

/// Validates, dispatches on cfg.command, writes run.json and appends to
/// history.jsonl. Errors become exit codes with a message on `err`.
int execute(const RunConfig& cfg, std::ostream& log, std::ostream& err);

/// ordered_json -> json with sorted keys.
nlohmann::json sorted(const nlohmann::ordered_json& j);

} // namespace freqlab::cli
