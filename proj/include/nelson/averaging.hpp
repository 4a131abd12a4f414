#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "nelson/coords.hpp"
#include "nelson/models.hpp"
#include "nelson/noise.hpp"
#include "nelson/sde.hpp"

namespace nelson {

/// Averaged amplitude-phase system of the white-noise oscillator, state (r, phi):
/// dr = eps^2 / (4 r) dt + eps / sqrt(2) dW1, dphi = eps / (sqrt(2) r) dW2.
/// r is reflected at r_min = 1e-6 * r0.
SdeSystemd averaged_harmonic_system(double eps, double r0 = 1.0);

/// Resonant averaged system for a colored forcing with spectrum S:
/// drift S(omega) / (8 pi omega^2 r), diffusion sqrt(S(omega) / 4 pi) / omega
/// and sqrt(S(omega) / 4 pi) / (omega r).
SdeSystemd averaged_colored_system(const NoiseSpectrum& spectrum, double omega, double r0 = 1.0);

/// Frozen-energy position process, state (x, branch):
/// dx = branch * sqrt((2/m)(E0 - U(x))) dt + sqrt(hbar / m) dW. The branch
/// flips and x is reflected when x crosses a turning point.
SdeSystemd reconstructed_x_system(const OscillatorParams& params, double E0);
SdeSystemd reconstructed_x_system(double m, const PotentialSpec& pot, double E0, double hbar);

/// Maps an (r, phi) ensemble to (x, v) = (r cos(omega t + phi), -r omega sin(omega t + phi)).
Ensemble reconstruct_position(const Ensemble& amplitude_phase, double omega);

/// (1/T) times the integral of g(x, p) over one period of the chart's orbit.
double period_average(const std::function<double(double, double)>& g, const ActionAngleChart& chart);

struct AveragingOptions {
  /// Momentum step for angle derivatives, relative to the largest |p| on the orbit.
  double p_step = 1e-2;
  /// Energy step for inverse-chart derivatives, relative to the energy
  /// above the well minimum.
  double e_step = 1e-3;
  /// Energy step for the derivatives of omega(E) = 2 pi / T(E).
  double omega_step = 1e-2;
  /// Uniform angles used for the x-equation averages.
  int angles = 128;
  QuadratureOptions quadrature{};
};

/// Averaged coefficients of the (E, theta) system of a particle in a
/// potential well with momentum noise eps7:
///   dE = eps7^2 / (2m) dt + eps7 (sigma_11 dW1 + sigma_12 dW2)
///   dtheta = eps7^2 F / 2 dt + eps7 (sigma_21 dW1 + sigma_22 dW2)
/// with D = sigma sigma^T, and of the induced position equation
///   dx = (p/m) dt + eps7^2 Kbar dt + eps7 G dW.
struct AveragedCoefficients {
  double E = 0.0;
  double T = 0.0;
  double omega = 0.0;
  double domega_dE = 0.0;
  double F = 0.0;
  Eigen::Matrix2d D = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
  double G1 = 0.0;
  double G2 = 0.0;
  double G = 0.0;
  double Kbar = 0.0;
  double eps7 = 0.0;
  std::vector<std::string> warnings;

  /// Noise amplitude of the induced position equation, eps7 * G.
  double x_noise() const { return eps7 * G; }
};

/// Numeric averaging pipeline on one orbit. Angle derivatives are taken in
/// p at fixed x, omega(E) = 2 pi / T(E) is differentiated in E, and the
/// position-equation coefficients come from Ito transport through the
/// inverse chart x = X(phi, E). G1, G2 are root-mean-square averages over
/// the angle and G^2 = G1^2 + G2^2.
AveragedCoefficients compute_averaged_coefficients(const ActionAngleChart& chart, double eps7,
                                                   const AveragingOptions& options = {});

/// eps7 = sqrt(hbar / m) / G(E). Throws ParameterError when G = 0.
double nelson_noise_choice(const AveragedCoefficients& coeffs, double hbar, double m);

/// sigma with sigma sigma^T = D: Cholesky after clipping eigenvalues in
/// (-1e-12 trace, 0) to zero (recorded in `warnings`), symmetric square
/// root when D is singular. Throws DomainError for larger negativity.
Eigen::Matrix2d psd_factor(const Eigen::Matrix2d& D, std::vector<std::string>* warnings = nullptr);

/// Averaged (E, theta) system with coefficients linearly interpolated in E
/// from `table` (sorted by E; clamped at the ends). `rotation` replaces
/// sigma by sigma * rotation.
SdeSystemd averaged_energy_angle_system(std::vector<AveragedCoefficients> table, double m,
                                        double eps7,
                                        const Eigen::Matrix2d& rotation = Eigen::Matrix2d::Identity());

}  // namespace nelson
