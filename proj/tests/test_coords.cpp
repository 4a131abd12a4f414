#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nelson/coords.hpp"
#include "nelson/errors.hpp"

using namespace nelson;
using std::numbers::pi;

TEST_CASE("amplitude-phase map examples") {
  auto a = to_amplitude_phase(1.0, 0.0, 1.0);
  CHECK(a.r == doctest::Approx(1.0));
  CHECK(a.phi == doctest::Approx(0.0));
  a = to_amplitude_phase(0.0, -2.0, 2.0);
  CHECK(a.r == doctest::Approx(1.0));
  CHECK(a.phi == doctest::Approx(pi / 2));
  CHECK_THROWS_AS(to_amplitude_phase(0.0, 0.0, 1.0), DomainError);
  CHECK(wrap_pi(3 * pi) == doctest::Approx(pi));
  CHECK(wrap_pi(-pi) == doctest::Approx(pi));
  CHECK(wrap_two_pi(-0.5) == doctest::Approx(2 * pi - 0.5));
}

TEST_CASE("amplitude-phase map round-trips to machine precision") {
  RandomStream s(3, 0);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = 4 * s.uniform() - 2, v = 4 * s.uniform() - 2;
    const double omega = 0.2 + 3 * s.uniform(), t = 10 * s.uniform();
    const auto a = to_amplitude_phase(x, v, omega, t);
    CHECK((a.phi > -pi && a.phi <= pi));
    const auto [x2, v2] = from_amplitude_phase(a.r, a.phi, omega, t);
    worst = std::max({worst, std::abs(x2 - x), std::abs(v2 - v)});
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("turning points") {
  auto [a, b] = turning_points(potentials::harmonic(1.0, 1.0), 1.0, 0.5);
  CHECK(a == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(b == doctest::Approx(1.0).epsilon(1e-14));
  std::tie(a, b) = turning_points(potentials::quartic(), 1.0, 0.25);
  CHECK(a == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(b == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(turning_points(potentials::quartic(), 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(turning_points(potentials::quartic(), 1.0, -1.0), DomainError);
  // The pendulum well only reaches U = 2 at the domain edge.
  CHECK_THROWS_AS(turning_points(potentials::pendulum_well(), 1.0, 2.5), DomainError);
}

TEST_CASE("harmonic period is 2 pi / omega at every energy") {
  for (double omega : {0.5, 1.0, 3.0})
    for (double E : {1e-3, 0.5, 40.0})
      CHECK(period(potentials::harmonic(1.0, omega), 1.0, E) ==
            doctest::Approx(2 * pi / omega).epsilon(1e-8));
}

TEST_CASE("quartic period scales as E^(-1/4)") {
  const auto q = potentials::quartic();
  for (double E : {0.01, 0.25, 3.0})
    CHECK(period(q, 1.0, 16 * E) / period(q, 1.0, E) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("small oscillations of the pendulum well have period 2 pi") {
  const auto p = potentials::pendulum_well();
  CHECK(period(p, 1.0, 1e-6) == doctest::Approx(2 * pi).epsilon(1e-6));
  CHECK(period(p, 1.0, 0.5) > period(p, 1.0, 0.1));
}

TEST_CASE("harmonic action equals E / omega") {
  for (double E : {0.1, 0.5, 2.0})
    CHECK(action(potentials::harmonic(2.0, 1.5), 2.0, E) == doctest::Approx(E / 1.5).epsilon(1e-8));
}

TEST_CASE("dI/dE equals T / 2 pi and I increases with E") {
  for (const auto& pot : {potentials::quartic(), potentials::pendulum_well(),
                          potentials::perturbed_harmonic(1.0, 1.0, potentials::quartic(), 0.05)}) {
    CAPTURE(pot.name);
    double previous = 0;
    for (double E : {0.05, 0.3, 1.0}) {
      const double h = 1e-4 * E;
      const double dIdE = (action(pot, 1.0, E + h) - action(pot, 1.0, E - h)) / (2 * h);
      CHECK(dIdE == doctest::Approx(period(pot, 1.0, E) / (2 * pi)).epsilon(1e-6));
      const double I = action(pot, 1.0, E);
      CHECK(I > previous);
      previous = I;
    }
  }
}

TEST_CASE("quadratures are converged") {
  const QuadratureOptions doubled{48, 16};
  for (const auto& pot : {potentials::quartic(), potentials::pendulum_well()}) {
    CHECK(std::abs(period(pot, 1.0, 0.7) - period(pot, 1.0, 0.7, doubled)) < 1e-9);
    CHECK(std::abs(action(pot, 1.0, 0.7) - action(pot, 1.0, 0.7, doubled)) < 1e-9);
    CHECK(std::abs(f_integral(pot, 1.0, 0.7, 0.4, 0.0) - f_integral(pot, 1.0, 0.7, 0.4, 0.0, doubled)) <
          1e-9);
  }
}

TEST_CASE("f integral") {
  const auto h = potentials::harmonic(1.0, 1.0);
  CHECK(f_integral(h, 1.0, 0.5, 0.3, 0.3) == doctest::Approx(0.0));
  CHECK(1.0 * f_integral(h, 1.0, 0.5, 1.0, 0.0) == doctest::Approx(2 * pi / 4).epsilon(1e-6));
  // Closed form for the harmonic well: f = asin(x / r) / (m omega).
  CHECK(f_integral(h, 1.0, 0.5, 0.5, 0.0) == doctest::Approx(std::asin(0.5)).epsilon(1e-9));
  double previous = -1e9;
  for (double x = -0.99; x <= 0.99; x += 0.11) {
    const double f = f_integral(potentials::quartic(), 1.0, 0.25, x, 0.0);
    CHECK(f > previous);
    previous = f;
  }
  CHECK_THROWS_AS(f_integral(h, 1.0, 0.5, 1.2, 0.0), DomainError);
  // Full circuit: 2 (f(x+) - f(x-)) = T / m.
  const auto q = potentials::quartic();
  const auto [a, b] = turning_points(q, 2.0, 0.3);
  CHECK(2 * (f_integral(q, 2.0, 0.3, b, 0.0) - f_integral(q, 2.0, 0.3, a, 0.0)) ==
        doctest::Approx(period(q, 2.0, 0.3) / 2.0).epsilon(1e-9));
}

TEST_CASE("chart quantities") {
  const ActionAngleChart chart(potentials::quartic(), 1.0, 0.25);
  CHECK(chart.x_minus() == doctest::Approx(-1.0));
  CHECK(chart.x_plus() == doctest::Approx(1.0));
  CHECK(chart.omega() * chart.T() == doctest::Approx(2 * pi).epsilon(1e-15));
  CHECK(chart.momentum(0.0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(chart.momentum(1.0) == 0.0);
  CHECK(chart.x0() == doctest::Approx(0.0));
  CHECK(chart.angle(0.0, +1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(chart.angle(0.0, -1) == doctest::Approx(pi).epsilon(1e-9));
  CHECK(chart.angle(1.0, +1) == doctest::Approx(pi / 2).epsilon(1e-9));
  CHECK(chart.angle(-1.0, -1) == doctest::Approx(3 * pi / 2).epsilon(1e-9));
  CHECK_THROWS_AS(ActionAngleChart(potentials::quartic(), 1.0, 0.25, 1.5), DomainError);
}

TEST_CASE("harmonic angle matches the amplitude-phase phase up to a constant") {
  const double omega = 1.0;
  const ActionAngleChart chart(potentials::harmonic(1.0, omega), 1.0, 0.5, 0.999999);
  double offset = 0;
  double worst = 0;
  for (int k = 0; k < 200; ++k) {
    const double t = 2 * pi * (k + 0.5) / 200;
    const double x = std::cos(t), v = -std::sin(t);
    const double phase = to_amplitude_phase(x, v, omega).phi;  // t, reduced
    const double angle = chart.angle(x, v >= 0 ? +1 : -1);
    const double d = wrap_pi(angle - phase);  // both advance with t
    if (k == 0) offset = d;
    worst = std::max(worst, std::abs(wrap_pi(d - offset)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("angle advances uniformly along the deterministic orbit") {
  const auto q = potentials::quartic();
  const ActionAngleChart chart(q, 1.0, 0.6);
  // Integrate the orbit with a fine RK4 and compare the angle with omega t.
  double x = chart.x0(), p = chart.momentum(x);
  const double dt = chart.T() / 20000;
  const double theta0 = chart.shifted_angle(x, +1, 0.0);
  double worst = 0;
  for (int n = 1; n <= 20000; ++n) {
    auto f = [&](double xx, double pp) { return std::pair{pp, -q.dU(xx)}; };
    const auto [k1x, k1p] = f(x, p);
    const auto [k2x, k2p] = f(x + dt / 2 * k1x, p + dt / 2 * k1p);
    const auto [k3x, k3p] = f(x + dt / 2 * k2x, p + dt / 2 * k2p);
    const auto [k4x, k4p] = f(x + dt * k3x, p + dt * k3p);
    x += dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    p += dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
    if (n % 500 == 0 && std::abs(p) > 1e-3) {
      const double theta = chart.shifted_angle(std::clamp(x, chart.x_minus(), chart.x_plus()),
                                               p > 0 ? +1 : -1, n * dt);
      worst = std::max(worst, std::abs(wrap_pi(theta - theta0)));
    }
  }
  CHECK(worst < 1e-6);
  CHECK(chart.shifted_angle(0.3, +1, 0.0) == doctest::Approx(chart.angle(0.3, +1)));
}

TEST_CASE("shifted angle of a uniform-phase ensemble stays uniform") {
  const ActionAngleChart chart(potentials::quartic(), 1.0, 0.4);
  RandomStream s(5, 0);
  std::vector<int> histogram(8, 0);
  const int n = 8000;
  for (int i = 0; i < n; ++i) {
    const auto pt = chart.invert(2 * pi * s.uniform());
    const double theta = chart.shifted_angle(pt.x, pt.p >= 0 ? +1 : -1, 3.7);
    ++histogram[static_cast<std::size_t>(theta / (2 * pi) * 8) % 8];
  }
  for (int c : histogram) CHECK(std::abs(c - n / 8) < 4 * std::sqrt(n / 8.0));
}

TEST_CASE("inverse chart round-trips") {
  const ActionAngleChart chart(potentials::pendulum_well(), 1.0, 0.8);
  for (double phi = 0.05; phi < 2 * pi; phi += 0.3) {
    const auto pt = chart.invert(phi);
    CHECK(energy(pt.x, pt.p, 1.0, chart.potential()) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(chart.angle(pt.x, pt.p >= 0 ? +1 : -1) == doctest::Approx(phi).epsilon(1e-8));
  }
}

TEST_CASE("energy sweep rows") {
  const auto rows = energy_sweep(potentials::harmonic(1.0, 2.0), 1.0, {0.5, 1.0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].T == doctest::Approx(pi));
  CHECK(rows[1].I == doctest::Approx(0.5));
  CHECK(rows[1].omega == doctest::Approx(2.0));
}
