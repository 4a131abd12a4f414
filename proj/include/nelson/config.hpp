#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nelson/models.hpp"
#include "nelson/noise.hpp"

namespace nelson {

/// Flat `key = value` text, one entry per line, dotted section names,
/// '#' comments. Duplicate keys are an error.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin = "<config>");

enum class ModelKind { Harmonic, HarmonicColored, Perturbed, General };

std::string to_string(ModelKind kind);

struct ExperimentConfig {
  ModelKind model = ModelKind::Harmonic;

  // params.*
  double m = 1.0;
  double omega = 1.0;
  /// Exactly one of hbar (Nelson scaling) and eps is set.
  std::optional<double> hbar;
  std::optional<double> eps;
  double eta = 0.0;
  /// Potential of the general model, or the perturbation of the perturbed model.
  std::string potential = "quartic";
  double r0 = 1.0;
  /// Initial energy; defaults to U(x_min + r0).
  std::optional<double> E0;

  // noise.*
  std::string spectrum = "nelson";
  double noise_level = 0.0;
  double cutoff_factor = 10.0;
  double resolution = 1e-2;
  std::optional<double> notch_lo;
  std::optional<double> notch_hi;

  // run.*
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t n_traj = 0;
  std::uint64_t seed = 1;
  double horizon_c = 1.0;
  std::size_t stride = 1;
  /// auto, exact or em.
  std::string integrator = "auto";
  unsigned threads = 1;

  // verify.*
  std::vector<std::string> estimators;
  std::optional<double> verify_t;
  std::size_t delta_steps = 10;
  int bins = 20;
  std::size_t min_count = 200;
  std::string ensemble_path;
  /// Trajectories of the auxiliary ensembles (reconstructed x, averaged);
  /// defaults to run.n_traj.
  std::size_t aux_traj = 0;

  // average.* / action.*
  std::vector<double> average_energies;
  std::vector<double> action_energies;

  // spectrum.*
  std::size_t spectrum_paths = 64;
  std::size_t spectrum_steps = 16384;
  std::size_t spectrum_group = 32;

  // output.*
  std::string out_dir = "out";
  std::set<std::string> formats{"csv", "json", "svg"};
  std::size_t output_thin = 1;
  std::size_t max_trajectories = 0;

  /// Every key as read, for provenance.
  std::map<std::string, std::string> raw;

  bool nelson_scaling() const { return hbar.has_value(); }
  /// eps = sqrt(2 hbar / m) under Nelson scaling, otherwise the explicit eps.
  double effective_eps() const;
  /// hbar = m eps^2 / 2 when eps is explicit.
  double effective_hbar() const;
  OscillatorParams oscillator() const;
  /// Total potential of the model (harmonic well plus eta * perturbation
  /// for the perturbed model).
  PotentialSpec total_potential() const;
  /// Spectrum from the noise.* keys (colored model only).
  NoiseSpectrum noise_spectrum() const;
  double initial_energy() const;
  bool wants(const std::string& estimator) const;
  bool emits(const std::string& format) const { return formats.count(format) > 0; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Known estimator names for verify.estimators.
const std::vector<std::string>& known_estimators();
/// Estimators run when verify.estimators is absent or "all"; "none" runs none.
std::vector<std::string> default_estimators(ModelKind model);

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Splits "csv,json" or "csv+svg" into a format set; throws ConfigError on
/// unknown names.
std::set<std::string> parse_formats(const std::string& text);

}  // namespace nelson
