#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nelson/averaging.hpp"
#include "nelson/errors.hpp"
#include "nelson/verify.hpp"

using namespace nelson;
using std::numbers::pi;

namespace {

StateVector<double> vec(double a, double b) {
  StateVector<double> x(2);
  x << a, b;
  return x;
}

InitSampler<double> uniform_phase(double r0) {
  return [r0](RandomStream& s) { return vec(r0, 2 * pi * s.uniform() - pi); };
}

}  // namespace

TEST_CASE("averaged harmonic coefficients") {
  const double eps = 0.2;
  const auto s = averaged_harmonic_system(eps);
  for (double r : {0.5, 1.0, 2.0}) {
    const auto f = s.drift(vec(r, 0.3), 0);
    const auto g = s.diffusion(vec(r, 0.3), 0);
    CHECK(f(0) == doctest::Approx(eps * eps / (4 * r)));
    CHECK(f(1) == 0.0);
    CHECK(g(0, 0) == doctest::Approx(eps / std::sqrt(2.0)));
    CHECK(g(1, 1) == doctest::Approx(eps / (std::sqrt(2.0) * r)));
    CHECK(g(0, 1) == 0.0);
    CHECK(g(1, 0) == 0.0);
  }
}

TEST_CASE("averaged amplitude: E[r^2] grows at rate eps^2") {
  const double eps = std::sqrt(2e-4);
  const auto s = averaged_harmonic_system(eps);
  const std::size_t n = 10000;
  const double t = 1.0 / eps;
  const auto ens = run_ensemble(s, uniform_phase(1.0), n, t / 200, 200, 17, RunOptions{.stride = 200});
  const Eigen::ArrayXd r2 = ens.slice(0, 1).array().square();
  // Var(r^2) ~ 2 eps^2 t at r ~ 1, so the slope carries ~1.4% noise at N = 1e4.
  CHECK((r2.mean() - 1.0) / t == doctest::Approx(eps * eps).epsilon(0.05));
  // Mean energy slope 1/2 m omega^2 eps^2 with m = omega = 1.
  CHECK(0.5 * (r2.mean() - 1.0) / t == doctest::Approx(0.5 * eps * eps).epsilon(0.05));
}

TEST_CASE("averaged systems without noise are frozen") {
  const auto s = averaged_harmonic_system(0.0);
  const auto ens = run_ensemble(s, uniform_phase(1.3), 5, 0.1, 100, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(ens.at(i, ens.samples() - 1, 0) == 1.3);
    CHECK(ens.at(i, ens.samples() - 1, 1) == ens.at(i, 0, 1));
  }
  const auto notch = notched(NoiseSpectrum::nelson(1e-4, 1.0, 1.0), 0.9, 1.1);
  const auto c = averaged_colored_system(notch, 1.0);
  CHECK(c.drift(vec(1.0, 0.0), 0).norm() == 0.0);
  CHECK(c.diffusion(vec(1.0, 0.0), 0).norm() == 0.0);
}

TEST_CASE("colored averaging with the Nelson spectrum equals white averaging") {
  const double hbar = 1e-4, m = 1.0;
  for (double omega : {0.7, 1.0, 2.5}) {
    const auto colored = averaged_colored_system(NoiseSpectrum::nelson(hbar, m, omega), omega);
    const auto white = averaged_harmonic_system(std::sqrt(2 * hbar / m));
    for (double r : {0.3, 1.0, 4.0}) {
      const auto x = vec(r, 0.1);
      CHECK((colored.drift(x, 0) - white.drift(x, 0)).norm() <= 1e-15 * white.drift(x, 0).norm());
      CHECK((colored.diffusion(x, 0) - white.diffusion(x, 0)).norm() <=
            1e-15 * white.diffusion(x, 0).norm());
    }
  }
}

TEST_CASE("colored averaged drift over squared diffusion is 1 / (2 r)") {
  const auto spec = NoiseSpectrum::power_law(0.37, 10.0, 0.01);
  const auto s = averaged_colored_system(spec, 1.3);
  for (double r : {0.5, 2.0}) {
    const double g = s.diffusion(vec(r, 0), 0)(0, 0);
    CHECK(s.drift(vec(r, 0), 0)(0) / (g * g) == doctest::Approx(1 / (2 * r)));
  }
}

TEST_CASE("reconstructed position process") {
  const auto p = OscillatorParams::nelson(1.0, 1.0, 1e-4);
  const auto s = reconstructed_x_system(p, 0.5);
  CHECK(s.diffusion(vec(0.2, 1.0), 0)(0, 0) == doctest::Approx(std::sqrt(1e-4)));
  CHECK(s.diffusion(vec(0.2, 1.0), 0)(0, 0) == doctest::Approx(p.eps / std::sqrt(2.0)));
  CHECK(s.drift(vec(0.0, 1.0), 0)(0) == doctest::Approx(1.0));
  CHECK(s.drift(vec(0.0, -1.0), 0)(0) == doctest::Approx(-1.0));
  CHECK(s.drift(vec(0.6, 1.0), 0)(0) == doctest::Approx(0.8));
  // Crossing a turning point reflects x and flips the branch.
  auto state = vec(1.01, 1.0);
  s.constrain(state);
  CHECK(state(0) <= 1.0);
  CHECK(state(1) == -1.0);
}

TEST_CASE("classical limit of the reconstructed process follows the arcsine law") {
  const auto s = reconstructed_x_system(1.0, potentials::harmonic(1.0, 1.0), 0.5, 0.0);
  RandomStream stream(1, 0);
  const std::size_t steps = 400000;
  const auto path = integrate_em(s, vec(0.0, 1.0), 2 * pi / 4000, steps, stream);
  // Occupation fractions in [-1, 1] quarters: arcsine law gives 1/3, 1/6, 1/6, 1/3
  // for |x| in [0.5, 1] on each side and [0, 0.5] on each side.
  int outer = 0;
  for (Eigen::Index k = 0; k < path.cols(); ++k) outer += std::abs(path(0, k)) > 0.5;
  CHECK(outer / static_cast<double>(path.cols()) == doctest::Approx(2.0 / 3.0).epsilon(0.01));
}

TEST_CASE("period averages on the harmonic orbit") {
  const double omega = 1.5, r = 0.8, m = 1.0;
  const ActionAngleChart chart(potentials::harmonic(m, omega), m, 0.5 * m * omega * omega * r * r);
  CHECK(period_average([](double x, double) { return x * x; }, chart) ==
        doctest::Approx(r * r / 2).epsilon(1e-9));
  CHECK(period_average([m](double, double p) { return p * p / (m * m); }, chart) ==
        doctest::Approx(omega * omega * r * r / 2).epsilon(1e-9));
  CHECK(std::abs(period_average([](double x, double p) { return x * p; }, chart)) < 1e-12);
  CHECK(period_average([](double, double) { return 1.0; }, chart) == doctest::Approx(1.0));
}

TEST_CASE("general pipeline reduces to the harmonic closed forms") {
  const double m = 1.0, omega = 1.0, hbar = 1e-4;
  for (double E : {0.1, 0.5, 2.0}) {
    const ActionAngleChart chart(potentials::harmonic(m, omega), m, E);
    const auto c = compute_averaged_coefficients(chart, omega * std::sqrt(2 * hbar * m));
    CAPTURE(E);
    CHECK(c.G == doctest::Approx(1 / (std::sqrt(2.0) * m * omega)).epsilon(0.02));
    CHECK(c.D(0, 0) == doctest::Approx(E / m).epsilon(1e-6));
    CHECK(c.T == doctest::Approx(2 * pi).epsilon(1e-9));
    CHECK(std::abs(c.domega_dE) < 1e-6);
    CHECK((c.sigma * c.sigma.transpose() - c.D).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(c.D(0, 1) == doctest::Approx(c.D(1, 0)));
    CHECK(nelson_noise_choice(c, hbar, m) ==
          doctest::Approx(omega * std::sqrt(2 * hbar * m)).epsilon(0.02));
  }
}

TEST_CASE("quartic noise choice varies monotonically with energy") {
  std::vector<double> eps7;
  for (double E : {0.1, 0.25, 1.0}) {
    const ActionAngleChart chart(potentials::quartic(), 1.0, E);
    const auto c = compute_averaged_coefficients(chart, 0.0);
    CHECK(std::isfinite(c.F));
    CHECK(c.D.allFinite());
    CHECK(c.G > 0);
    eps7.push_back(nelson_noise_choice(c, 1e-4, 1.0));
  }
  CHECK(eps7[0] != doctest::Approx(eps7[1]));
  const bool increasing = eps7[0] < eps7[1] && eps7[1] < eps7[2];
  const bool decreasing = eps7[0] > eps7[1] && eps7[1] > eps7[2];
  CHECK((increasing || decreasing));
}

TEST_CASE("coefficients do not depend on the noise scale") {
  const ActionAngleChart chart(potentials::quartic(), 1.0, 0.4);
  const auto a = compute_averaged_coefficients(chart, 0.0);
  const auto b = compute_averaged_coefficients(chart, 0.3);
  CHECK(a.F == b.F);
  CHECK(a.D == b.D);
  CHECK(a.G == b.G);
  CHECK(b.x_noise() == doctest::Approx(0.3 * b.G));
  auto zero = a;
  zero.G = 0.0;
  CHECK_THROWS_AS(nelson_noise_choice(zero, 1e-4, 1.0), ParameterError);
}

TEST_CASE("PSD factor repairs tiny negativity and rejects large negativity") {
  Eigen::Matrix2d D;
  D << 2.0, 0.6, 0.6, 1.0;
  const auto s = psd_factor(D);
  CHECK((s * s.transpose() - D).norm() < 1e-12);

  Eigen::Matrix2d singular;
  singular << 1.0, 1.0, 1.0, 1.0 - 1e-14;
  std::vector<std::string> warnings;
  const auto t = psd_factor(singular, &warnings);
  CHECK((t * t.transpose() - singular).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_FALSE(warnings.empty());

  Eigen::Matrix2d bad;
  bad << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(psd_factor(bad), DomainError);
}

TEST_CASE("rotating sigma leaves the (E, theta) law unchanged") {
  std::vector<AveragedCoefficients> table;
  for (double E : {0.2, 0.3, 0.4})
    table.push_back(compute_averaged_coefficients(ActionAngleChart(potentials::quartic(), 1.0, E), 0.0));
  const double eps7 = 0.02, angle = 0.9;
  Eigen::Matrix2d R;
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const auto plain = averaged_energy_angle_system(table, 1.0, eps7);
  const auto rotated = averaged_energy_angle_system(table, 1.0, eps7, R);
  auto init = [](RandomStream&) { return vec(0.3, 0.0); };
  const std::size_t n = 10000;
  const auto a = run_ensemble(plain, InitSampler<double>(init), n, 0.5, 100, 41, RunOptions{.stride = 100});
  const auto b = run_ensemble(rotated, InitSampler<double>(init), n, 0.5, 100, 42, RunOptions{.stride = 100});
  const auto E = [](const StateVector<double>& s) { return s(0); };
  const auto theta = [](const StateVector<double>& s) { return s(1); };
  CHECK(distribution_distance(a, b, E, a.time(1)) < 0.02);
  CHECK(distribution_distance(a, b, theta, a.time(1)) < 0.02);
}

TEST_CASE("full and averaged harmonic systems agree at t = 1 / eps") {
  const auto params = OscillatorParams::nelson(1.0, 1.0, 1e-4);
  const double t = 1.0 / params.eps;
  const std::size_t steps = 1000, n = 10000;
  const double dt = t / steps;
  auto shell = [](RandomStream& s) {
    const double phi = 2 * pi * s.uniform();
    return vec(std::cos(phi), -std::sin(phi));
  };
  const auto full = run_ensemble(harmonic_forced_system(params), InitSampler<double>(shell), n, dt,
                                 steps, 51, RunOptions{.stride = steps, .integrator = Integrator::ExactLinear});
  const auto avg = run_ensemble(averaged_harmonic_system(params.eps), uniform_phase(1.0), n, dt, steps,
                                52, RunOptions{.stride = steps});
  const Ensemble rebuilt = reconstruct_position(avg, 1.0);
  const auto r = [](const StateVector<double>& s) { return std::hypot(s(0), s(1)); };
  CHECK(distribution_distance(full, rebuilt, r, full.time(1)) < 0.02);
}
