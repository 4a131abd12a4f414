#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nelson/config.hpp"
#include "nelson/errors.hpp"
#include "nelson/experiment.hpp"

using namespace nelson;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nelson_test_experiment" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig config(const std::string& text, const fs::path& out) {
  auto cfg = parse_config(text);
  cfg.out_dir = out.string();
  return cfg;
}

const char* kSmallHarmonic = R"(
model = harmonic
params.hbar = 1e-4
run.dt = 0.15707963267948966
run.steps = 400
run.stride = 10
run.n_traj = 200
run.seed = 5
verify.estimators = none
)";

}  // namespace

TEST_CASE("action sweep on the harmonic well") {
  const auto out = scratch("action");
  std::ostringstream log;
  const auto result =
      run_experiment("action", config(std::string(kSmallHarmonic) + "action.energies = 0.5, 2\n", out), log);
  CHECK(result.pass());
  CHECK(result.exit_code() == kExitOk);
  CHECK(fs::exists(out / "action.csv"));
  CHECK(fs::exists(out / "action.svg"));
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["schema"] == 1);
  CHECK(summary["command"] == "action");
  CHECK(summary["pass"] == true);
  CHECK(summary["provenance"]["seed"] == 5);
  CHECK(summary["provenance"]["n_traj"] == 200);
  CHECK(summary["provenance"].contains("version"));
  CHECK(summary["meta"].contains("generated_at"));
  for (const auto& inv : summary["invariants"]) {
    CHECK(inv.contains("estimator"));
    CHECK(inv.contains("target"));
    CHECK(inv.contains("parameters"));
  }
  CHECK(log.str().find("PASS") != std::string::npos);
}

TEST_CASE("average reproduces the harmonic closed forms") {
  const auto out = scratch("average");
  std::ostringstream log;
  const auto result = run_experiment(
      "average", config(std::string(kSmallHarmonic) + "average.energies = 0.1, 0.5, 2\n", out), log);
  CHECK(result.pass());
  bool saw_G = false;
  for (const auto& inv : result.invariants) saw_G |= inv.name == "harmonic_G";
  CHECK(saw_G);
  CHECK(fs::exists(out / "average.csv"));
}

TEST_CASE("simulate output is byte-identical across repeats and thread counts") {
  const std::string text = std::string(kSmallHarmonic) + "output.format = csv\n";
  std::ostringstream log;
  auto one = config(text + "run.threads = 1\n", scratch("sim1"));
  auto two = config(text + "run.threads = 1\n", scratch("sim2"));
  auto three = config(text + "run.threads = 3\n", scratch("sim3"));
  run_experiment("simulate", one, log);
  run_experiment("simulate", two, log);
  run_experiment("simulate", three, log);
  for (const char* file : {"ensemble_x.csv", "ensemble_v.csv", "energy.csv"}) {
    CAPTURE(file);
    const auto a = slurp(fs::path(one.out_dir) / file);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(fs::path(two.out_dir) / file));
    CHECK(a == slurp(fs::path(three.out_dir) / file));
  }
  // Only the requested formats are written.
  CHECK_FALSE(fs::exists(fs::path(one.out_dir) / "summary.json"));
  CHECK_FALSE(fs::exists(fs::path(one.out_dir) / "energy.svg"));
}

TEST_CASE("summaries differ only in the timestamp") {
  std::ostringstream log;
  const auto a = scratch("sum1"), b = scratch("sum2");
  run_experiment("action", config(kSmallHarmonic, a), log);
  run_experiment("action", config(kSmallHarmonic, b), log);
  auto ja = nlohmann::json::parse(slurp(a / "summary.json"));
  auto jb = nlohmann::json::parse(slurp(b / "summary.json"));
  ja.erase("meta");
  jb.erase("meta");
  CHECK(ja == jb);
}

TEST_CASE("invalid configurations write nothing") {
  const auto out = scratch("invalid");
  std::ostringstream log, err;
  auto cfg = config(std::string(kSmallHarmonic) + "params.E0 = -1\n", out);
  CHECK_THROWS_AS(run_experiment("simulate", cfg, log), ConfigError);
  CHECK(run_command("simulate", cfg, log, err) == kExitConfigError);
  CHECK_FALSE(fs::exists(out));
  CHECK(err.str().find("params.E0") != std::string::npos);
  CHECK(run_command("teleport", config(kSmallHarmonic, out), log, err) == kExitConfigError);
}

TEST_CASE("runtime failures map to their exit code") {
  const auto out = scratch("runtime");
  std::ostringstream log, err;
  auto cfg = config(std::string(kSmallHarmonic) + "verify.ensemble = /nonexistent/ensemble.json\n", out);
  CHECK(run_command("verify", cfg, log, err) == kExitRuntimeError);
}

TEST_CASE("verify on a small ensemble writes estimate tables") {
  const auto out = scratch("verify");
  std::ostringstream log;
  const std::string text = R"(
model = harmonic
params.hbar = 1e-4
run.dt = 0.015707963267948967
run.steps = 2020
run.stride = 10
run.n_traj = 4000
run.seed = 3
verify.estimators = newton_nelson, drift_symmetry
verify.t = 15.707963267948966
verify.bins = 10
)";
  const auto result = run_experiment("verify", config(text, out), log);
  CHECK(result.invariants.size() >= 2);
  for (const auto& inv : result.invariants) {
    CAPTURE(inv.name);
    CHECK(inv.pass);
    for (const auto& f : inv.files) CHECK(fs::exists(out / f));
  }
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["pass"] == result.pass());
}

TEST_CASE("spectrum command compares the periodogram with the target") {
  const auto out = scratch("spectrum");
  std::ostringstream log;
  const std::string text = R"(
model = harmonic_colored
params.hbar = 1e-4
run.dt = 0.05
run.steps = 100
run.n_traj = 2
verify.estimators = none
spectrum.paths = 64
spectrum.steps = 4096
spectrum.group = 32
)";
  const auto result = run_experiment("spectrum", config(text, out), log);
  CHECK(result.pass());
  CHECK(fs::exists(out / "spectrum.csv"));
}

TEST_CASE("derived seeds are distinct and stable") {
  CHECK(derived_seed(1, 1) == derived_seed(1, 1));
  CHECK(derived_seed(1, 1) != derived_seed(1, 2));
  CHECK(derived_seed(1, 1) != derived_seed(2, 1));
}
