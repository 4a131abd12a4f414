#pragma once

#include <functional>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "nelson/models.hpp"

namespace nelson {

/// x = r cos(omega t + phi), v = -r omega sin(omega t + phi).
struct AmplitudePhase {
  double r = 0.0;
  double phi = 0.0;
};

/// Reduces an angle to (-pi, pi].
double wrap_pi(double angle);
/// Reduces an angle to [0, 2 pi).
double wrap_two_pi(double angle);

/// Throws DomainError at the origin, where the phase is undefined.
AmplitudePhase to_amplitude_phase(double x, double v, double omega, double t = 0.0);
std::pair<double, double> from_amplitude_phase(double r, double phi, double omega, double t = 0.0);

/// Quadrature resolution for orbit integrals: composite Gauss-Legendre with
/// `nodes` points on each of `panels` sub-intervals of each half-orbit.
struct QuadratureOptions {
  int nodes = 24;
  int panels = 8;
};

/// Roots of U(x) = E on either side of the well minimum, to machine
/// precision. Throws DomainError when E is not above the minimum or a root
/// lies outside the potential's domain.
std::pair<double, double> turning_points(const PotentialSpec& pot, double m, double E);
/// Same, with the well minimum already known.
std::pair<double, double> turning_points(const PotentialSpec& pot, double m, double E,
                                         double well_min);

double period(const PotentialSpec& pot, double m, double E, QuadratureOptions q = {});
/// (1/2 pi) times the closed-orbit integral of p dx.
double action(const PotentialSpec& pot, double m, double E, QuadratureOptions q = {});
/// Integral of 1/p from x0 to x on the positive-momentum branch.
double f_integral(const PotentialSpec& pot, double m, double E, double x, double x0,
                  QuadratureOptions q = {});

/// Action-angle description of the closed orbit at energy E.
///
/// The angle is m omega f(x, E) on the positive-momentum branch, continued
/// along the orbit onto the negative branch, and reduced to [0, 2 pi). It is
/// zero at x0 on the positive branch and grows at rate omega(E) along
/// deterministic motion.
class ActionAngleChart {
 public:
  /// x0 defaults to the well minimum. Passing `well_min` skips its search.
  ActionAngleChart(PotentialSpec pot, double m, double E, std::optional<double> x0 = {},
                   QuadratureOptions q = {}, std::optional<double> well_min = {});

  const PotentialSpec& potential() const { return pot_; }
  double m() const { return m_; }
  double E() const { return E_; }
  double x_minus() const { return x_minus_; }
  double x_plus() const { return x_plus_; }
  double x0() const { return x0_; }
  double T() const { return T_; }
  double I() const { return I_; }
  double omega() const { return 2.0 * std::numbers::pi / T_; }
  QuadratureOptions quadrature() const { return q_; }

  /// |p| on the orbit; zero at (and outside) the turning points.
  double momentum(double x) const;
  /// Integral of 1/p from x0 to x on the positive branch.
  double f(double x) const;
  /// Angle in [0, 2 pi); branch is the sign of p (+1 or -1).
  double angle(double x, int branch) const;
  /// angle - omega t, reduced to [0, 2 pi).
  double shifted_angle(double x, int branch, double t) const;
  /// Time since the orbit last passed x0 with positive momentum, in [0, T).
  double orbit_time(double x, int branch) const;

  struct Point {
    double x = 0.0;
    double p = 0.0;
  };
  /// Phase-space point on the orbit at the given angle.
  Point invert(double phi) const;

  /// Integral of g(x) / p(x) over [a, b] within [x_minus, x_plus], with the
  /// turning-point singularities absorbed by x = x_t -/+ s^2.
  double integrate_over_p(const std::function<double(double)>& g, double a, double b) const;
  /// (1/T) times the integral of g(x(t), p(t)) over one period.
  double period_average(const std::function<double(double, double)>& g) const;

  /// Quadrature nodes of the half orbit: the integral of h(x) / p(x) over
  /// [x_minus, x_plus] is the sum of weight * h(x). Each node also carries
  /// p(x) > 0, so the period average of g is
  /// (m / T) * sum weight * (g(x, p) + g(x, -p)).
  struct OrbitNode {
    double x = 0.0;
    double p = 0.0;
    double weight = 0.0;
  };
  std::vector<OrbitNode> orbit_nodes() const;

 private:
  /// Integral of 1/p from x_minus to x.
  double cumulative(double x) const;
  void check_on_orbit(double x) const;

  PotentialSpec pot_;
  double m_;
  double E_;
  double x_minus_ = 0.0;
  double x_plus_ = 0.0;
  double x0_ = 0.0;
  double T_ = 0.0;
  double I_ = 0.0;
  double cumulative_x0_ = 0.0;
  QuadratureOptions q_;
};

/// Rows of an energy sweep of chart quantities.
struct ChartRow {
  double E = 0.0;
  double T = 0.0;
  double I = 0.0;
  double omega = 0.0;
};

std::vector<ChartRow> energy_sweep(const PotentialSpec& pot, double m,
                                   const std::vector<double>& energies, QuadratureOptions q = {});

}  // namespace nelson
