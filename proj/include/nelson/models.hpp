#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nelson/noise.hpp"
#include "nelson/sde.hpp"

namespace nelson {

/// Forced harmonic oscillator parameters. eps is the dimensionless-in-time
/// noise scale: the velocity noise amplitude is eps * omega.
struct OscillatorParams {
  double m = 1.0;
  double omega = 1.0;
  double hbar = 1e-4;
  double eps = 0.0;
  bool nelson_scaling = false;

  /// eps = sqrt(2 hbar / m).
  static OscillatorParams nelson(double m, double omega, double hbar);
  static OscillatorParams with_eps(double m, double omega, double eps);

  void validate() const;
  double velocity_noise() const { return eps * omega; }
  double period() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

/// One-dimensional potential given as a callable pair (U, U').
struct PotentialSpec {
  std::function<double(double)> U;
  std::function<double(double)> dU;
  Interval domain{-1e3, 1e3};
  /// Perturbation strength when this potential is added to a harmonic well.
  double eta = 0.0;
  std::optional<double> base_omega;
  std::string name;

  double operator()(double x) const { return U(x); }
};

namespace potentials {

/// 1/2 m omega^2 x^2.
PotentialSpec harmonic(double m, double omega);
/// x^4 / 4.
PotentialSpec quartic();
/// 1 - cos x on (-pi, pi).
PotentialSpec pendulum_well();
/// Zero potential (free particle); not a well.
PotentialSpec free();
/// 1/2 m omega^2 x^2 + eta * pert(x).
PotentialSpec perturbed_harmonic(double m, double omega, const PotentialSpec& pert, double eta);
/// Natural cubic spline through (x, U) knots; U' from the spline.
PotentialSpec tabulated(std::vector<double> xs, std::vector<double> us);
/// Reads a two-column (x, U) CSV and builds `tabulated`.
PotentialSpec from_csv(const std::string& path);
/// harmonic (needs m, omega), quartic, pendulum, free.
PotentialSpec by_name(const std::string& name, double m = 1.0, double omega = 1.0);

}  // namespace potentials

/// Largest |U' - centered difference of U| on a uniform probe grid.
double derivative_mismatch(const PotentialSpec& pot, double step, std::size_t probes = 257);

/// True when U' changes sign exactly once (from negative to positive) on the
/// probe grid over the domain.
bool has_single_well(const PotentialSpec& pot, std::size_t probes = 2001);

/// Location of the well minimum (root of U' by bisection). Throws
/// DomainError when U has no single well on the domain.
double well_minimum(const PotentialSpec& pot);

/// (x, v): drift (v, -omega^2 x), diffusion column (0, eps omega).
SdeSystemd harmonic_forced_system(const OscillatorParams& p);

/// Same drift, v driven by a colored path.
///
/// `spectrum` uses the normalization of the resonant averaged equations
/// (averaged_colored_system); with it, S = 4 pi hbar Omega^2 / m reproduces the
/// white-noise oscillator with eps = sqrt(2 hbar / m). That normalization is
/// 2 pi times the Fourier-convention density of the forcing, so the path is
/// synthesized from S / (2 pi).
SdeSystemd harmonic_colored_system(const OscillatorParams& p, const NoiseSpectrum& spectrum);

/// Forcing spectrum (Fourier convention) used by harmonic_colored_system.
NoiseSpectrum forcing_spectrum(const NoiseSpectrum& averaged_normalization);

/// (x, v): drift (v, -omega^2 x - (eta / m) U'(x)), diffusion (0, eps omega).
/// Adds a warning when eta exceeds `warn_eta`.
SdeSystemd perturbed_oscillator_system(const OscillatorParams& p, const PotentialSpec& pert,
                                       double warn_eta = 0.1);

/// (x, p): drift (p / m, -U'(x)), diffusion (0, eps7).
SdeSystemd general_potential_system(double m, const PotentialSpec& pot, double eps7);

/// Free particle with velocity noise sigma: (x, v), drift (v, 0), diffusion (0, sigma).
SdeSystemd free_particle_system(double sigma);

/// 1/2 m (v^2 + omega^2 x^2).
double energy(double x, double v, const OscillatorParams& p);
/// p^2 / 2m + U(x).
double energy(double x, double p, double m, const PotentialSpec& pot);

/// branch * sqrt((2/m)(E0 - U(x))); branch is +1 or -1. Throws DomainError
/// when E0 < U(x).
double classical_velocity(double x, double E0, double m, const PotentialSpec& pot, int branch);

}  // namespace nelson
