#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nelson/random.hpp"

namespace nelson {

enum class SpectrumKind { White, PowerLaw, Tabulated };

/// Power spectrum of a stationary Gaussian forcing.
///
/// Convention: S(Omega) = integral of c(tau) exp(-i Omega tau) over all tau,
/// with S even in Omega. The process variance is therefore
/// (1/2pi) * integral of S over [-cutoff, cutoff].
struct NoiseSpectrum {
  SpectrumKind kind = SpectrumKind::White;
  /// White: constant density. PowerLaw: coefficient c in S = c * Omega^2.
  double level = 0.0;
  /// Largest angular frequency retained in synthesis.
  double cutoff = 1.0;
  /// Requested spectral grid spacing (an upper bound, see synthesize_colored_noise).
  double resolution = 1e-2;
  /// (Omega, S) pairs, sorted by Omega; linear interpolation between them,
  /// zero outside the table.
  std::vector<std::pair<double, double>> table;

  static NoiseSpectrum white(double level);
  static NoiseSpectrum power_law(double coefficient, double cutoff, double resolution);
  static NoiseSpectrum tabulated(std::vector<std::pair<double, double>> table, double cutoff,
                                 double resolution);
  /// Omega^2 spectrum with coefficient 4 pi hbar / m, cut off at cutoff_factor * omega.
  static NoiseSpectrum nelson(double hbar, double m, double omega, double cutoff_factor = 10.0,
                              double resolution = 1e-2);

  /// S(|omega|); zero above the cutoff.
  double operator()(double omega) const;

  /// Throws ParameterError when an invariant is violated.
  void validate() const;

  NoiseSpectrum scaled(double factor) const;
};

/// Tabulates `spectrum` on a grid of spacing `resolution` and zeroes [lo, hi].
NoiseSpectrum notched(const NoiseSpectrum& spectrum, double lo, double hi);

/// (1/2pi) * integral of S over [-cutoff, cutoff] by the trapezoid rule on the
/// table knots (Tabulated) or in closed form (PowerLaw).
double spectral_variance(const NoiseSpectrum& spectrum);

/// n i.i.d. N(0, dt) increments of a Wiener process.
Eigen::VectorXd sample_wiener_increments(double dt, std::size_t n, RandomStream& stream);

/// Stationary Gaussian path xi(k dt), k = 0..n-1, with spectrum S.
///
/// Harmonic superposition with independent uniform phases:
///   xi(t) = sum_k sqrt(2 S(Omega_k) dOmega / pi) cos(Omega_k t + psi_k),
/// Omega_k = k dOmega on (0, cutoff]. The sum is evaluated by an inverse FFT of
/// length N >= n, so dOmega = 2 pi / (N dt) is at most `spectrum.resolution`
/// and the path does not repeat within n samples.
Eigen::VectorXd synthesize_colored_noise(const NoiseSpectrum& spectrum, double dt, std::size_t n,
                                         RandomStream& stream);

/// FFT length and effective grid spacing used by synthesize_colored_noise.
struct SynthesisGrid {
  std::size_t fft_size = 0;
  double spacing = 0.0;
};
SynthesisGrid synthesis_grid(const NoiseSpectrum& spectrum, double dt, std::size_t n);

struct Periodogram {
  Eigen::VectorXd omega;
  Eigen::VectorXd power;
};

/// Periodogram S_hat(Omega_k) = (dt / n) |sum_j x_j exp(-i Omega_k t_j)|^2 at
/// Omega_k = 2 pi k / (n dt), k = 1..n/2. Its ensemble mean reproduces S.
Periodogram estimate_spectrum(const Eigen::Ref<const Eigen::VectorXd>& path, double dt);

/// Two-column (Omega, S) CSV, optional header line.
std::vector<std::pair<double, double>> read_spectrum_csv(const std::string& path);

}  // namespace nelson
