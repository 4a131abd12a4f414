#include "nelson/coords.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nelson/errors.hpp"
#include "nelson/quadrature.hpp"

namespace nelson {

using std::numbers::pi;

namespace {

const GaussLegendre<double>& rule(int nodes) {
  thread_local int cached_nodes = 0;
  thread_local std::optional<GaussLegendre<double>> cached;
  if (!cached || cached_nodes != nodes) {
    cached.emplace(nodes);
    cached_nodes = nodes;
  }
  return *cached;
}

/// Root of h on [lo, hi] where h(lo), h(hi) have opposite signs.
template <typename F>
double solve_bracketed(F&& h, double lo, double hi) {
  const double hlo = h(lo), hhi = h(hi);
  if (hlo == 0) return lo;
  if (hhi == 0) return hi;
  std::uintmax_t iterations = 200;
  boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 1);
  const auto [a, b] = boost::math::tools::toms748_solve(h, lo, hi, hlo, hhi, tol, iterations);
  return 0.5 * (a + b);
}

/// Walks outward from the minimum in direction `dir` until U exceeds E,
/// then solves U(x) = E.
double find_turning_point(const PotentialSpec& pot, double xmin, double E, int dir) {
  const double edge = dir > 0 ? pot.domain.hi : pot.domain.lo;
  const double reach = std::abs(edge - xmin);
  double step = 1e-3 * std::max(1.0, std::abs(xmin));
  double inner = xmin;
  while (true) {
    const bool last = step >= reach;
    const double x = last ? edge : xmin + dir * step;
    if (pot.U(x) >= E) {
      const auto h = [&](double y) { return pot.U(y) - E; };
      return dir > 0 ? solve_bracketed(h, inner, x) : solve_bracketed(h, x, inner);
    }
    if (last)
      throw DomainError("energy " + std::to_string(E) + " is not bounded by the potential '" +
                        pot.name + "' on its domain");
    inner = x;
    step *= 2.0;
  }
}

}  // namespace

double wrap_pi(double angle) {
  double r = std::remainder(angle, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

double wrap_two_pi(double angle) {
  double r = std::fmod(angle, 2.0 * pi);
  if (r < 0) r += 2.0 * pi;
  if (r >= 2.0 * pi) r = 0.0;
  return r;
}

AmplitudePhase to_amplitude_phase(double x, double v, double omega, double t) {
  if (!(omega > 0)) throw ParameterError("amplitude-phase map needs omega > 0");
  if (x == 0.0 && v == 0.0) throw DomainError("phase is undefined at the origin");
  const double y = v / omega;
  return {std::hypot(x, y), wrap_pi(std::atan2(-y, x) - omega * t)};
}

std::pair<double, double> from_amplitude_phase(double r, double phi, double omega, double t) {
  const double a = omega * t + phi;
  return {r * std::cos(a), -r * omega * std::sin(a)};
}

std::pair<double, double> turning_points(const PotentialSpec& pot, double m, double E) {
  return turning_points(pot, m, E, well_minimum(pot));
}

std::pair<double, double> turning_points(const PotentialSpec& pot, double m, double E,
                                         double xmin) {
  if (!(m > 0)) throw ParameterError("mass must be positive");
  if (!(E > pot.U(xmin)))
    throw DomainError("no motion: energy " + std::to_string(E) + " is not above the well minimum " +
                      std::to_string(pot.U(xmin)));
  return {find_turning_point(pot, xmin, E, -1), find_turning_point(pot, xmin, E, +1)};
}

double period(const PotentialSpec& pot, double m, double E, QuadratureOptions q) {
  return ActionAngleChart(pot, m, E, std::nullopt, q).T();
}

double action(const PotentialSpec& pot, double m, double E, QuadratureOptions q) {
  return ActionAngleChart(pot, m, E, std::nullopt, q).I();
}

double f_integral(const PotentialSpec& pot, double m, double E, double x, double x0,
                  QuadratureOptions q) {
  const ActionAngleChart chart(pot, m, E, x0, q);
  return chart.f(x);
}

ActionAngleChart::ActionAngleChart(PotentialSpec pot, double m, double E, std::optional<double> x0,
                                   QuadratureOptions q, std::optional<double> well_min)
    : pot_(std::move(pot)), m_(m), E_(E), q_(q) {
  if (q_.nodes < 2 || q_.panels < 1) throw ParameterError("quadrature needs >= 2 nodes, >= 1 panel");
  const double xmin = well_min ? *well_min : well_minimum(pot_);
  std::tie(x_minus_, x_plus_) = turning_points(pot_, m_, E_, xmin);
  x0_ = x0 ? *x0 : xmin;
  check_on_orbit(x0_);
  T_ = 2.0 * m_ * cumulative(x_plus_);
  // p = p^2 / p keeps the endpoint behaviour inside the substitution.
  I_ = integrate_over_p([this](double x) { return std::max(0.0, 2.0 * m_ * (E_ - pot_.U(x))); },
                        x_minus_, x_plus_) /
       pi;
  cumulative_x0_ = cumulative(x0_);
  if (!(T_ > 0) || !std::isfinite(T_)) throw QuadratureError("period quadrature failed");
}

void ActionAngleChart::check_on_orbit(double x) const {
  if (!(x >= x_minus_ && x <= x_plus_))
    throw DomainError("x = " + std::to_string(x) + " is outside the orbit [" +
                      std::to_string(x_minus_) + ", " + std::to_string(x_plus_) + "]");
}

double ActionAngleChart::momentum(double x) const {
  return std::sqrt(std::max(0.0, 2.0 * m_ * (E_ - pot_.U(x))));
}

double ActionAngleChart::integrate_over_p(const std::function<double(double)>& g, double a,
                                          double b) const {
  a = std::max(a, x_minus_);
  b = std::min(b, x_plus_);
  if (!(b > a)) return 0.0;
  const auto& gl = rule(q_.nodes);
  const double mid = 0.5 * (x_minus_ + x_plus_);
  const double slope_lo = std::abs(pot_.dU(x_minus_)), slope_hi = std::abs(pot_.dU(x_plus_));

  // With x = x_t + dir s^2, dx = 2 s ds and p ~ s near the turning point.
  const auto integrand = [&](double turning, int dir, double slope) {
    return [&, turning, dir, slope](double s) {
      const double x = turning + dir * s * s;
      double kinetic = E_ - pot_.U(x);
      if (!(kinetic > 0)) kinetic = slope * s * s;
      if (!(kinetic > 0)) return 0.0;
      return g(x) * 2.0 * s / std::sqrt(2.0 * m_ * kinetic);
    };
  };

  double total = 0.0;
  if (a < mid) {
    const double hi = std::min(b, mid);
    total += gl.integrate(integrand(x_minus_, +1, slope_lo), std::sqrt(a - x_minus_),
                          std::sqrt(hi - x_minus_), q_.panels);
  }
  if (b > mid) {
    const double lo = std::max(a, mid);
    total += gl.integrate(integrand(x_plus_, -1, slope_hi), std::sqrt(x_plus_ - b),
                          std::sqrt(x_plus_ - lo), q_.panels);
  }
  if (!std::isfinite(total)) throw QuadratureError("orbit integral diverged");
  return total;
}

double ActionAngleChart::cumulative(double x) const {
  return integrate_over_p([](double) { return 1.0; }, x_minus_, x);
}

double ActionAngleChart::f(double x) const {
  check_on_orbit(x);
  return cumulative(x) - cumulative_x0_;
}

double ActionAngleChart::orbit_time(double x, int branch) const {
  check_on_orbit(x);
  const double c = cumulative(x);
  // Positive branch: m (F(x) - F(x0)); negative branch continues from x_plus.
  const double t = branch >= 0 ? m_ * (c - cumulative_x0_)
                               : T_ - m_ * (c + cumulative_x0_);
  double r = std::fmod(t, T_);
  if (r < 0) r += T_;
  return r >= T_ ? 0.0 : r;
}

double ActionAngleChart::angle(double x, int branch) const {
  return wrap_two_pi(omega() * orbit_time(x, branch));
}

double ActionAngleChart::shifted_angle(double x, int branch, double t) const {
  return wrap_two_pi(angle(x, branch) - omega() * t);
}

ActionAngleChart::Point ActionAngleChart::invert(double phi) const {
  // Time along the orbit measured from x_minus (start of the positive branch).
  const double half = 0.5 * T_;
  double tau = std::fmod(wrap_two_pi(phi) / omega() + m_ * cumulative_x0_, T_);
  if (tau < 0) tau += T_;
  const bool positive = tau <= half;
  const double target = (positive ? tau : T_ - tau) / m_;
  double x;
  if (target <= 0) {
    x = x_minus_;
  } else if (target >= half / m_) {
    x = x_plus_;
  } else {
    x = solve_bracketed([&](double y) { return cumulative(y) - target; }, x_minus_, x_plus_);
  }
  const double p = momentum(x);
  return {x, positive ? p : -p};
}

double ActionAngleChart::period_average(const std::function<double(double, double)>& g) const {
  double total = 0.0;
  for (const auto& node : orbit_nodes()) total += node.weight * (g(node.x, node.p) + g(node.x, -node.p));
  if (!std::isfinite(total)) throw QuadratureError("period average diverged");
  return m_ * total / T_;
}

std::vector<ActionAngleChart::OrbitNode> ActionAngleChart::orbit_nodes() const {
  const auto& gl = rule(q_.nodes);
  const double mid = 0.5 * (x_minus_ + x_plus_);
  std::vector<OrbitNode> nodes;
  nodes.reserve(static_cast<std::size_t>(2 * q_.panels * q_.nodes));
  const auto add_half = [&](double turning, int dir, double length) {
    const double slope = std::abs(pot_.dU(turning));
    const double width = std::sqrt(length) / q_.panels;
    for (int k = 0; k < q_.panels; ++k) {
      const double half = width / 2, centre = k * width + half;
      for (int i = 0; i < gl.size(); ++i) {
        const double s = centre + half * gl.nodes()(i);
        const double x = turning + dir * s * s;
        double kinetic = E_ - pot_.U(x);
        if (!(kinetic > 0)) kinetic = slope * s * s;
        if (!(kinetic > 0)) continue;
        const double p = std::sqrt(2.0 * m_ * kinetic);
        nodes.push_back({x, p, half * gl.weights()(i) * 2.0 * s / p});
      }
    }
  };
  add_half(x_minus_, +1, mid - x_minus_);
  add_half(x_plus_, -1, x_plus_ - mid);
  return nodes;
}

std::vector<ChartRow> energy_sweep(const PotentialSpec& pot, double m,
                                   const std::vector<double>& energies, QuadratureOptions q) {
  std::vector<ChartRow> rows;
  rows.reserve(energies.size());
  for (double E : energies) {
    const ActionAngleChart chart(pot, m, E, std::nullopt, q);
    rows.push_back({E, chart.T(), chart.I(), chart.omega()});
  }
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].E > rows[i - 1].E && !(rows[i].I > rows[i - 1].I))
      throw DomainError("action is not increasing in energy; the E-I map is not one-to-one");
  return rows;
}

}  // namespace nelson
