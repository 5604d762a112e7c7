#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvbd/checks.hpp"
#include "mvbd/distribution.hpp"
#include "mvbd/model.hpp"
#include "mvbd/simulate.hpp"
#include "mvbd/solver.hpp"

namespace mvbd {

struct RouteSpec {
  enum class Kind { Picard, Direct, Dyadic };
  Kind kind = Kind::Picard;
  int n = 0;
  std::string name() const;
  /// "picard", "direct" or "dyadic:<n>"; throws ConfigError naming `path`.
  static RouteSpec parse(const std::string& text, const std::string& path);
};

struct ExperimentSpec {
  std::string name;
  double tol = 0.02;
  std::optional<double> T;
  std::optional<std::int64_t> replicas;
  std::size_t N = 0;
  double p = 2.0;
  /// Test function min(i, f_cap) of the gradient experiment.
  State f_cap = 10;
  bool declared_beta = false;
};

struct RunConfig {
  std::string name = "run";
  ModelPtr model;
  Distribution initial, initial_alt;

  double T = 1.0;
  double h = 1.0 / 256;
  std::vector<RouteSpec> routes{RouteSpec{}};
  bool stationary = false;
  SolverOptions solver;
  PicardConfig picard;

  std::size_t N = 1;
  std::int64_t replicas = 1000;
  std::optional<std::uint64_t> seed;
  std::vector<double> checkpoints;
  std::int64_t log_replicas = 1;
  SimOptions sim;

  std::vector<ExperimentSpec> experiments;

  SamplePlan plan;
  double lyapunov_exponent = 2.0;
  double theta = 2.0;
  double check_p = 2.0;

  std::string output = "out";
  /// FNV-1a of the config text.
  std::uint64_t hash = 0;
};

/// Validating loader for the JSON run config; every error is a ConfigError
/// whose message starts with the offending field path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a(const std::string& bytes);

/// Names accepted in `experiments[].name`.
const std::vector<std::string>& experiment_names();

struct CommandResult {
  bool pass = true;
  std::vector<std::filesystem::path> files;
};

/// Each command writes under <out>/<command>/ and a manifest there.
CommandResult cmd_solve(const RunConfig& cfg, const std::filesystem::path& out);
CommandResult cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out, unsigned workers);
CommandResult cmd_experiment(const RunConfig& cfg, const std::filesystem::path& out, unsigned workers);
CommandResult cmd_check(const RunConfig& cfg, const std::filesystem::path& out, unsigned workers);

/// Exit code for an exception escaping a command: 2 for ConfigError, 3 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace mvbd
