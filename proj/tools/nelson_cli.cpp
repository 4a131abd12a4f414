#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "nelson/config.hpp"
#include "nelson/errors.hpp"
#include "nelson/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::string> format;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment configuration (key = value file)")->required();
  cmd->add_option("--seed", o.seed, "Override run.seed");
  cmd->add_option("--out", o.out, "Override output.dir");
  cmd->add_option("--threads", o.threads, "Override run.threads")->check(CLI::PositiveNumber);
  cmd->add_option("--format", o.format, "Output formats, e.g. csv,json,svg or csv+svg");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic oscillator experiments: simulate, average, verify, action, spectrum"};
  app.require_subcommand(1);
  Overrides o;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "Run the configured ensemble and write trajectories"},
      {"average", "Averaged (E, theta) coefficients on a set of energies"},
      {"verify", "Check the stochastic-mechanics invariants on an ensemble"},
      {"action", "Period, action and frequency over an energy sweep"},
      {"spectrum", "Periodogram of synthesized colored forcing against its target"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nelson::kExitConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  nelson::ExperimentConfig cfg;
  try {
    cfg = nelson::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out_dir = *o.out;
    if (o.threads) cfg.threads = *o.threads;
    if (o.format) cfg.formats = nelson::parse_formats(*o.format);
  } catch (const nelson::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return nelson::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nelson::kExitConfigError;
  }
  return nelson::run_command(command, cfg, std::cout, std::cerr);
}
