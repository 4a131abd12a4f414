#include "nelson/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "nelson/errors.hpp"

namespace nelson {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::string normalized = text;
  std::replace(normalized.begin(), normalized.end(), '+', ',');
  std::istringstream in(normalized);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0;
  const char* first = value.data();
  const char* last = first + value.size();
  const auto r = std::from_chars(first, last, out);
  if (r.ec != std::errc() || r.ptr != last || !std::isfinite(out))
    throw ConfigError(key, "'" + value + "' is not a finite number");
  return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* first = value.data();
  const char* last = first + value.size();
  const auto r = std::from_chars(first, last, out);
  if (r.ec != std::errc() || r.ptr != last)
    throw ConfigError(key, "'" + value + "' is not a non-negative integer");
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(to_double(key, item));
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where, "empty key");
    if (!out.emplace(key, value).second) throw ConfigError(key, "duplicate key at " + where);
  }
  return out;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Harmonic:
      return "harmonic";
    case ModelKind::HarmonicColored:
      return "harmonic_colored";
    case ModelKind::Perturbed:
      return "perturbed";
    case ModelKind::General:
      return "general";
  }
  return "unknown";
}

const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> names{"newton_nelson",   "drift_symmetry",
                                              "osmotic",         "energy_window",
                                              "first_postulate", "averaging_fidelity"};
  return names;
}

std::vector<std::string> default_estimators(ModelKind model) {
  switch (model) {
    case ModelKind::Harmonic:
      return known_estimators();
    case ModelKind::HarmonicColored:
      return {"newton_nelson", "drift_symmetry", "osmotic", "energy_window"};
    case ModelKind::Perturbed:
    case ModelKind::General:
      return {"newton_nelson", "drift_symmetry", "osmotic", "first_postulate"};
  }
  return {};
}

std::set<std::string> parse_formats(const std::string& text) {
  std::set<std::string> out;
  for (const auto& f : split_list(text)) {
    if (f != "csv" && f != "json" && f != "svg")
      throw ConfigError("output.format", "unknown format '" + f + "' (csv, json, svg)");
    out.insert(f);
  }
  if (out.empty()) throw ConfigError("output.format", "no formats given");
  return out;
}

double ExperimentConfig::effective_eps() const {
  if (hbar) return std::sqrt(2.0 * *hbar / m);
  return eps.value_or(0.0);
}

double ExperimentConfig::effective_hbar() const {
  if (hbar) return *hbar;
  const double e = eps.value_or(0.0);
  return 0.5 * m * e * e;
}

OscillatorParams ExperimentConfig::oscillator() const {
  if (hbar) return OscillatorParams::nelson(m, omega, *hbar);
  return OscillatorParams::with_eps(m, omega, eps.value_or(0.0));
}

PotentialSpec ExperimentConfig::total_potential() const {
  switch (model) {
    case ModelKind::Harmonic:
    case ModelKind::HarmonicColored:
      return potentials::harmonic(m, omega);
    case ModelKind::Perturbed:
      return potentials::perturbed_harmonic(m, omega, potentials::by_name(potential, m, omega), eta);
    case ModelKind::General:
      return potentials::by_name(potential, m, omega);
  }
  return potentials::harmonic(m, omega);
}

NoiseSpectrum ExperimentConfig::noise_spectrum() const {
  const double cutoff = cutoff_factor * omega;
  NoiseSpectrum s;
  if (spectrum == "nelson") {
    s = NoiseSpectrum::nelson(effective_hbar(), m, omega, cutoff_factor, resolution);
  } else if (spectrum == "power_law") {
    s = NoiseSpectrum::power_law(noise_level, cutoff, resolution);
  } else if (spectrum == "flat") {
    s = NoiseSpectrum::tabulated({{0.0, noise_level}, {cutoff, noise_level}}, cutoff, resolution);
  } else if (spectrum.rfind("table:", 0) == 0) {
    s = NoiseSpectrum::tabulated(read_spectrum_csv(spectrum.substr(6)), cutoff, resolution);
  } else {
    throw ConfigError("noise.spectrum", "unknown spectrum '" + spectrum +
                                            "' (nelson, power_law, flat, table:<path>)");
  }
  if (notch_lo || notch_hi) {
    if (!notch_lo || !notch_hi) throw ConfigError("noise.notch_lo", "give both notch_lo and notch_hi");
    s = notched(s, *notch_lo * omega, *notch_hi * omega);
  }
  return s;
}

double ExperimentConfig::initial_energy() const {
  if (E0) return *E0;
  const auto pot = total_potential();
  return pot.U(well_minimum(pot) + r0);
}

bool ExperimentConfig::wants(const std::string& estimator) const {
  return std::find(estimators.begin(), estimators.end(), estimator) != estimators.end();
}

void ExperimentConfig::validate() const {
  const auto positive = [](const char* field, double v) {
    if (!(v > 0)) throw ConfigError(field, "must be positive");
  };
  positive("params.m", m);
  positive("params.omega", omega);
  positive("params.r0", r0);
  if (hbar.has_value() == eps.has_value())
    throw ConfigError("params.hbar", "set exactly one of params.hbar (Nelson scaling) or params.eps");
  if (hbar && !(*hbar > 0)) throw ConfigError("params.hbar", "must be positive");
  if (eps && !(*eps >= 0)) throw ConfigError("params.eps", "must be non-negative");
  if (!(eta >= 0)) throw ConfigError("params.eta", "must be non-negative");

  PotentialSpec pot;
  try {
    pot = total_potential();
  } catch (const Error& e) {
    throw ConfigError("params.potential", e.what());
  }
  if (model != ModelKind::Harmonic && model != ModelKind::HarmonicColored) {
    try {
      well_minimum(pot);
    } catch (const Error& e) {
      throw ConfigError("params.potential", e.what());
    }
  }
  {
    const double xmin = well_minimum(pot);
    const double e0 = initial_energy();
    if (!(e0 > pot.U(xmin)))
      throw ConfigError("params.E0", "initial energy " + std::to_string(e0) +
                                         " is not above the potential minimum " +
                                         std::to_string(pot.U(xmin)));
  }

  positive("run.dt", dt);
  if (steps == 0) throw ConfigError("run.steps", "must be positive");
  if (n_traj == 0) throw ConfigError("run.n_traj", "must be positive");
  positive("run.horizon_c", horizon_c);
  if (stride == 0 || stride > steps) throw ConfigError("run.stride", "must be in [1, run.steps]");
  if (integrator != "auto" && integrator != "exact" && integrator != "em")
    throw ConfigError("run.integrator", "must be auto, exact or em");
  if (integrator == "exact" && model != ModelKind::Harmonic && model != ModelKind::HarmonicColored)
    throw ConfigError("run.integrator", "the exact integrator needs a harmonic model");
  if (threads == 0) throw ConfigError("run.threads", "must be at least 1");

  if (model == ModelKind::HarmonicColored) {
    NoiseSpectrum s;
    try {
      s = noise_spectrum();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("noise.spectrum", e.what());
    }
    if (!(dt < std::numbers::pi / s.cutoff))
      throw ConfigError("run.dt", "must be below pi / cutoff = " + std::to_string(std::numbers::pi / s.cutoff) +
                                      " to resolve the spectrum");
  }

  for (const auto& name : estimators)
    if (std::find(known_estimators().begin(), known_estimators().end(), name) ==
        known_estimators().end())
      throw ConfigError("verify.estimators", "unknown estimator '" + name + "'");
  if (delta_steps % stride != 0)
    throw ConfigError("verify.delta_steps", "must be a multiple of run.stride");
  if (delta_steps == 0) throw ConfigError("verify.delta_steps", "must be positive");
  if (bins < 1) throw ConfigError("verify.bins", "must be at least 1");
  if (verify_t) {
    const double total = dt * static_cast<double>(steps);
    if (!(*verify_t >= 0 && *verify_t <= total))
      throw ConfigError("verify.t", "must lie within the run [0, run.dt * run.steps]");
  }
  if (wants("averaging_fidelity")) {
    if (model != ModelKind::Harmonic)
      throw ConfigError("verify.estimators", "averaging_fidelity needs the harmonic model");
    if (!(effective_eps() > 0))
      throw ConfigError("params.eps", "averaging_fidelity needs a positive noise scale");
    const double horizon = horizon_c / effective_eps();
    if (horizon > dt * static_cast<double>(steps) * (1 + 1e-12))
      throw ConfigError("run.steps", "horizon c / eps = " + std::to_string(horizon) +
                                         " exceeds run.dt * run.steps");
  }
  if (wants("energy_window") && model != ModelKind::Harmonic && model != ModelKind::HarmonicColored)
    throw ConfigError("verify.estimators", "energy_window needs a harmonic model");

  for (double e : average_energies)
    if (!(e > 0)) throw ConfigError("average.energies", "energies must be positive");
  for (double e : action_energies)
    if (!(e > 0)) throw ConfigError("action.energies", "energies must be positive");
  if (spectrum_paths == 0) throw ConfigError("spectrum.paths", "must be positive");
  if (spectrum_steps < 16) throw ConfigError("spectrum.steps", "must be at least 16");
  if (spectrum_group == 0) throw ConfigError("spectrum.group", "must be positive");
  if (output_thin == 0) throw ConfigError("output.thin", "must be positive");
  if (out_dir.empty()) throw ConfigError("output.dir", "must not be empty");
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  cfg.raw = parse_key_values(text, origin);

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const auto number = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = to_double(k, v); };
  };
  const auto optional_number = [](std::optional<double>& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = to_double(k, v); };
  };
  const auto count = [](std::size_t& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) {
      field = static_cast<std::size_t>(to_unsigned(k, v));
    };
  };
  const auto text_field = [](std::string& field) -> Setter {
    return [&field](const std::string&, const std::string& v) { field = v; };
  };

  const std::map<std::string, Setter> setters{
      {"model",
       [&cfg](const std::string& k, const std::string& v) {
         if (v == "harmonic") cfg.model = ModelKind::Harmonic;
         else if (v == "harmonic_colored") cfg.model = ModelKind::HarmonicColored;
         else if (v == "perturbed") cfg.model = ModelKind::Perturbed;
         else if (v == "general") cfg.model = ModelKind::General;
         else throw ConfigError(k, "unknown model '" + v + "' (harmonic, harmonic_colored, perturbed, general)");
       }},
      {"params.m", number(cfg.m)},
      {"params.omega", number(cfg.omega)},
      {"params.hbar", optional_number(cfg.hbar)},
      {"params.eps", optional_number(cfg.eps)},
      {"params.eta", number(cfg.eta)},
      {"params.potential", text_field(cfg.potential)},
      {"params.r0", number(cfg.r0)},
      {"params.E0", optional_number(cfg.E0)},
      {"noise.spectrum", text_field(cfg.spectrum)},
      {"noise.level", number(cfg.noise_level)},
      {"noise.cutoff_factor", number(cfg.cutoff_factor)},
      {"noise.resolution", number(cfg.resolution)},
      {"noise.notch_lo", optional_number(cfg.notch_lo)},
      {"noise.notch_hi", optional_number(cfg.notch_hi)},
      {"run.dt", number(cfg.dt)},
      {"run.steps", count(cfg.steps)},
      {"run.n_traj", count(cfg.n_traj)},
      {"run.seed", [&cfg](const std::string& k, const std::string& v) { cfg.seed = to_unsigned(k, v); }},
      {"run.horizon_c", number(cfg.horizon_c)},
      {"run.stride", count(cfg.stride)},
      {"run.integrator", text_field(cfg.integrator)},
      {"run.threads",
       [&cfg](const std::string& k, const std::string& v) {
         cfg.threads = static_cast<unsigned>(to_unsigned(k, v));
       }},
      {"verify.estimators",
       [&cfg](const std::string&, const std::string& v) {
         cfg.estimators = split_list(v);
         if (cfg.estimators.empty()) cfg.estimators = {"none"};
       }},
      {"verify.t", optional_number(cfg.verify_t)},
      {"verify.delta_steps", count(cfg.delta_steps)},
      {"verify.bins",
       [&cfg](const std::string& k, const std::string& v) { cfg.bins = static_cast<int>(to_unsigned(k, v)); }},
      {"verify.min_count", count(cfg.min_count)},
      {"verify.ensemble", text_field(cfg.ensemble_path)},
      {"verify.aux_traj", count(cfg.aux_traj)},
      {"average.energies",
       [&cfg](const std::string& k, const std::string& v) { cfg.average_energies = to_doubles(k, v); }},
      {"action.energies",
       [&cfg](const std::string& k, const std::string& v) { cfg.action_energies = to_doubles(k, v); }},
      {"spectrum.paths", count(cfg.spectrum_paths)},
      {"spectrum.steps", count(cfg.spectrum_steps)},
      {"spectrum.group", count(cfg.spectrum_group)},
      {"output.dir", text_field(cfg.out_dir)},
      {"output.format",
       [&cfg](const std::string&, const std::string& v) { cfg.formats = parse_formats(v); }},
      {"output.thin", count(cfg.output_thin)},
      {"output.max_trajectories", count(cfg.max_trajectories)},
  };

  for (const auto& [key, value] : cfg.raw) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    it->second(key, value);
  }
  if (cfg.estimators.empty() || (cfg.estimators.size() == 1 && cfg.estimators[0] == "all"))
    cfg.estimators = default_estimators(cfg.model);
  else if (cfg.estimators.size() == 1 && cfg.estimators[0] == "none")
    cfg.estimators.clear();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

}  // namespace nelson
