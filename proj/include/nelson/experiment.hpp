#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nelson/config.hpp"
#include "nelson/sde.hpp"

namespace nelson {

/// Exit codes of the command-line driver.
enum ExitCode : int {
  kExitOk = 0,
  kExitInvariantFailed = 1,
  kExitConfigError = 2,
  kExitRuntimeError = 3,
};

/// SDE system of the configured model.
SdeSystemd build_system(const ExperimentConfig& cfg);

/// Momentum noise of the general model: params.eps, or the Nelson choice
/// sqrt(hbar / m) / G(E0) when params.hbar is set.
double general_model_eps7(const ExperimentConfig& cfg);

/// Initial states uniformly distributed in angle on the energy shell E0:
/// (x, v) for the oscillator models, (x, p) for the general model.
InitSampler<double> shell_sampler(const ExperimentConfig& cfg);

/// Integrator actually used: "auto" picks the exact transition law for the
/// harmonic models and Euler-Maruyama otherwise.
Integrator resolve_integrator(const ExperimentConfig& cfg);

/// Main ensemble of the configured run.
Ensemble simulate_ensemble(const ExperimentConfig& cfg);

/// Seed of the k-th auxiliary ensemble derived from the master seed.
std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t k);

/// One checked invariant of a command.
struct InvariantOutcome {
  std::string name;
  std::string estimator;
  std::string target;
  nlohmann::json parameters = nlohmann::json::object();
  bool pass = false;
  double statistic = 0.0;
  double threshold = 0.0;
  std::vector<std::string> files;

  nlohmann::json to_json() const;
};

struct CommandResult {
  std::string command;
  std::vector<InvariantOutcome> invariants;
  std::vector<std::string> warnings;
  std::vector<std::string> files;
  nlohmann::json summary;

  bool pass() const;
  int exit_code() const { return pass() ? kExitOk : kExitInvariantFailed; }
};

/// Commands: simulate, average, verify, action, spectrum. Validates the
/// configuration before anything is written; writes outputs under
/// cfg.out_dir and a summary.json when JSON output is enabled. Progress
/// lines go to `log`. Throws ConfigError for invalid configurations and
/// Error for runtime failures.
CommandResult run_experiment(const std::string& command, const ExperimentConfig& cfg,
                             std::ostream& log);

/// Wraps run_experiment and maps failures to exit codes, printing errors
/// to `err`.
int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log,
                std::ostream& err);

}  // namespace nelson
