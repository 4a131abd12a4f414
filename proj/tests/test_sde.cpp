#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nelson/models.hpp"
#include "nelson/noise.hpp"
#include "nelson/sde.hpp"
#include "nelson/verify.hpp"

using namespace nelson;
using std::numbers::pi;

namespace {

SdeSystemd scalar_system(std::function<double(double)> drift, double sigma) {
  SdeSystemd s;
  s.dimension = 1;
  s.drift = [drift](const StateVector<double>& x, double) {
    StateVector<double> f(1);
    f(0) = drift(x(0));
    return f;
  };
  s.diffusion = [sigma](const StateVector<double>&, double) {
    DiffusionMatrix<double> g(1, 1);
    g(0, 0) = sigma;
    return g;
  };
  return s;
}

InitSampler<double> constant_init(StateVector<double> x) {
  return [x](RandomStream&) { return x; };
}

StateVector<double> vec(std::initializer_list<double> values) {
  StateVector<double> x(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) x(i++) = v;
  return x;
}

double sample_variance(const Eigen::VectorXd& x) {
  return (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_CASE("noise-free EM oscillator follows the explicit-Euler energy law") {
  // Explicit Euler multiplies the oscillator energy by exactly 1 + (omega dt)^2
  // per step; at dt = T / 1e4 over 10 periods that is a 4% gain.
  const auto params = OscillatorParams::with_eps(1.0, 1.0, 0.0);
  const auto system = harmonic_forced_system(params);
  RandomStream s(1, 0);
  const double T = 2 * pi, dt = T / 1e4;
  const std::size_t steps = 100000;
  const auto path = integrate_em(system, vec({1.0, 0.0}), dt, steps, s, 0.0, 1000);
  const double E = energy(path(0, path.cols() - 1), path(1, path.cols() - 1), params);
  const double predicted = 0.5 * std::pow(1 + dt * dt, static_cast<double>(steps));
  CHECK(E == doctest::Approx(predicted).epsilon(1e-9));
  // One period at dt = T / 1e5 stays within 1e-3.
  const auto fine = integrate_em(system, vec({1.0, 0.0}), T / 1e5, 100000, s, 0.0, 100000);
  CHECK(std::abs(energy(fine(0, 1), fine(1, 1), params) - 0.5) / 0.5 < 1e-3);
}

TEST_CASE("EM Wiener process has terminal variance t") {
  const auto system = scalar_system([](double) { return 0.0; }, 1.0);
  const auto ens = run_ensemble(system, constant_init(vec({0.0})), 20000, 0.01, 200, 3);
  const auto w = ens.slice(0, ens.samples() - 1);
  CHECK(sample_variance(w) == doctest::Approx(2.0).epsilon(4 * std::sqrt(2.0 / 20000)));
}

TEST_CASE("EM Ornstein-Uhlenbeck reaches stationary variance one half") {
  const auto system = scalar_system([](double x) { return -x; }, 1.0);
  const auto ens = run_ensemble(system, constant_init(vec({0.0})), 20000, 0.005, 2000, 4,
                                RunOptions{.stride = 100});
  // EM stationary variance is 1 / (2 - dt).
  CHECK(sample_variance(ens.slice(0, ens.samples() - 1)) ==
        doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("EM second moment follows the Euler recursion, not the exact law") {
  // dx = -x dt + dW with dt = 0.25: E x^2 obeys v' = (1 - dt)^2 v + dt exactly
  // under Euler-Maruyama, which differs from the exact value by O(dt).
  const double dt = 0.25;
  const std::size_t steps = 4;
  const auto system = scalar_system([](double x) { return -x; }, 1.0);
  const auto ens = run_ensemble(system, constant_init(vec({1.0})), 100000, dt, steps, 9);
  const auto x = ens.slice(0, ens.samples() - 1);
  double em = 1.0;
  for (std::size_t n = 0; n < steps; ++n) em = (1 - dt) * (1 - dt) * em + dt;
  const double exact = std::exp(-2.0) + (1 - std::exp(-2.0)) / 2;
  const double m2 = x.array().square().mean();
  const double se = std::sqrt((x.array().pow(4).mean() - m2 * m2) / x.size());
  CHECK(std::abs(m2 - em) < 3 * se);
  CHECK(std::abs(m2 - exact) > 3 * se);
  // Halving dt halves the weak error of the recursion.
  auto recursion = [](double h, int n) {
    double v = 1.0;
    for (int i = 0; i < n; ++i) v = (1 - h) * (1 - h) * v + h;
    return v;
  };
  const double e1 = std::abs(recursion(0.01, 100) - exact);
  const double e2 = std::abs(recursion(0.005, 200) - exact);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("EM and exact integrator agree in law at fine steps") {
  // The EM energy gain t * dt / 2 per unit energy must be small against the
  // noise spread of r, so the comparison uses eps = 1.
  const auto params = OscillatorParams::with_eps(1.0, 1.0, 1.0);
  const auto system = harmonic_forced_system(params);
  const double T = 2 * pi, dt = T / 1000;
  auto init = [](RandomStream& s) {
    const double phi = 2 * pi * s.uniform();
    return vec({std::cos(phi), -std::sin(phi)});
  };
  const std::size_t n = 10000, steps = 1000;
  const auto em = run_ensemble(system, InitSampler<double>(init), n, dt, steps, 100,
                               RunOptions{.stride = 500});
  const auto ex = run_ensemble(system, InitSampler<double>(init), n, dt, steps, 200,
                               RunOptions{.stride = 500, .integrator = Integrator::ExactLinear});
  const auto r = [](const StateVector<double>& s) { return std::hypot(s(0), s(1)); };
  const auto x = [](const StateVector<double>& s) { return s(0); };
  CHECK(distribution_distance(em, ex, r, em.time(2)) < 0.02);
  CHECK(distribution_distance(em, ex, x, em.time(2)) < 0.02);
}

TEST_CASE("exact integrator without noise is a rotation") {
  RandomStream s(1, 0);
  const double omega = 2.0, dt = 0.01;
  const Eigen::Vector2d init(1.0, 0.5);
  const auto path = integrate_exact_linear(omega, 0.0, init, dt, 300, s);
  for (Eigen::Index k = 0; k < path.cols(); k += 50) {
    const double t = k * dt;
    const double x = init(0) * std::cos(omega * t) + init(1) / omega * std::sin(omega * t);
    const double v = -init(0) * omega * std::sin(omega * t) + init(1) * std::cos(omega * t);
    CHECK(path(0, k) == doctest::Approx(x).epsilon(1e-12));
    CHECK(path(1, k) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("exact transition law composes: one step equals two half steps") {
  const double omega = 1.3, sigma = 0.7, h = 0.4;
  const ExactOscillatorStep<double> full(omega, sigma, h), half(omega, sigma, h / 2);
  const Eigen::Matrix2d rot = half.rotation * half.rotation;
  const Eigen::Matrix2d cov =
      half.rotation * half.covariance * half.rotation.transpose() + half.covariance;
  CHECK((rot - full.rotation).norm() < 1e-13);
  CHECK((cov - full.covariance).norm() < 1e-13);
  CHECK((full.cholesky * full.cholesky.transpose() - full.covariance).norm() < 1e-13);
}

TEST_CASE("exact transition adds energy at rate (eps omega)^2 m / 2") {
  const double omega = 1.7, eps = 0.05, h = 0.3;
  const ExactOscillatorStep<double> step(omega, eps * omega, h);
  // Mean energy gain over one step from a zero-mean-preserving rotation.
  const double gain = 0.5 * (step.covariance(1, 1) + omega * omega * step.covariance(0, 0));
  CHECK(gain == doctest::Approx(0.5 * eps * eps * omega * omega * h).epsilon(1e-12));
}

TEST_CASE("single-trajectory ensemble equals integrate_em on stream 0") {
  const auto system = harmonic_forced_system(OscillatorParams::nelson(1.0, 1.0, 1e-2));
  const auto init = vec({1.0, 0.0});
  const auto ens = run_ensemble(system, constant_init(init), 1, 0.01, 100, 77,
                                RunOptions{.stride = 10});
  RandomStream s(77, 0);
  const auto path = integrate_em(system, init, 0.01, 100, s, 0.0, 10);
  for (Eigen::Index k = 0; k < path.cols(); ++k) {
    CHECK(ens.at(0, static_cast<std::size_t>(k), 0) == path(0, k));
    CHECK(ens.at(0, static_cast<std::size_t>(k), 1) == path(1, k));
  }
}

TEST_CASE("ensembles do not depend on the thread count") {
  const auto system = harmonic_forced_system(OscillatorParams::nelson(1.0, 1.0, 1e-3));
  auto init = [](RandomStream& s) { return vec({s.normal(), s.normal()}); };
  const auto a = run_ensemble(system, InitSampler<double>(init), 37, 0.01, 200, 5,
                              RunOptions{.stride = 20, .threads = 1});
  const auto b = run_ensemble(system, InitSampler<double>(init), 37, 0.01, 200, 5,
                              RunOptions{.stride = 20, .threads = 4});
  CHECK(a.component(0) == b.component(0));
  CHECK(a.component(1) == b.component(1));
}

TEST_CASE("deterministic system from a point mass stays a point mass") {
  const auto system = harmonic_forced_system(OscillatorParams::with_eps(1.0, 1.0, 0.0));
  const auto ens = run_ensemble(system, constant_init(vec({0.3, 0.1})), 16, 0.01, 100, 1);
  for (std::size_t k = 0; k < ens.samples(); ++k) {
    const auto x = ens.slice(0, k);
    CHECK(x.maxCoeff() == x.minCoeff());
  }
}

TEST_CASE("Wiener increments over disjoint intervals are uncorrelated") {
  const auto system = scalar_system([](double) { return 0.0; }, 1.0);
  const std::size_t n = 20000;
  const auto ens = run_ensemble(system, constant_init(vec({0.0})), n, 0.1, 20, 8,
                                RunOptions{.stride = 10});
  const Eigen::VectorXd a = ens.slice(0, 1) - ens.slice(0, 0);
  const Eigen::VectorXd b = ens.slice(0, 2) - ens.slice(0, 1);
  const double corr = (a.array() * b.array()).mean() /
                      std::sqrt(a.array().square().mean() * b.array().square().mean());
  CHECK(std::abs(corr) < 4 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("externally driven path carries the spectral variance") {
  const double S0 = 0.2, cutoff = 5.0;
  const auto spec = NoiseSpectrum::tabulated({{0.0, S0}, {cutoff, S0}}, cutoff, 0.01);
  SdeSystemd s;
  s.dimension = 1;
  s.drift = [](const StateVector<double>&, double) { return StateVector<double>::Zero(1); };
  s.diffusion = [](const StateVector<double>&, double) {
    return DiffusionMatrix<double>::Identity(1, 1);
  };
  s.driving = ExternalPath{spec};
  // x_{n+1} - x_n = xi(t_n) dt, so the increments recover xi.
  const double dt = 0.05;
  const auto ens = run_ensemble(s, constant_init(vec({0.0})), 64, dt, 4096, 12);
  double var = 0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Eigen::VectorXd x = ens.component(0).col(static_cast<Eigen::Index>(i));
    const Eigen::VectorXd xi = (x.tail(x.size() - 1) - x.head(x.size() - 1)) / dt;
    var += sample_variance(xi);
  }
  var /= static_cast<double>(ens.size());
  CHECK(var == doctest::Approx(spectral_variance(spec)).epsilon(0.05));
}

TEST_CASE("divergence names the failing trajectory and step") {
  const auto system = scalar_system([](double x) { return x * x * x; }, 0.0);
  auto init = [](RandomStream& s) {
    StateVector<double> x(1);
    x(0) = s.index() == 3 ? 10.0 : 0.0;
    return x;
  };
  try {
    run_ensemble(system, InitSampler<double>(init), 6, 0.1, 100, 1, RunOptions{.threads = 2});
    FAIL("expected divergence");
  } catch (const IntegrationDiverged& e) {
    CHECK(e.trajectory() == 3);
    CHECK(e.step() > 0);
  }
}

TEST_CASE("ensemble grid lookups") {
  const auto system = scalar_system([](double) { return 0.0; }, 1.0);
  const auto ens = run_ensemble(system, constant_init(vec({0.0})), 2, 0.1, 100, 1,
                                RunOptions{.stride = 10});
  CHECK(ens.samples() == 11);
  CHECK(ens.sample_dt() == doctest::Approx(1.0));
  CHECK(ens.index_of(5.0) == 5);
  CHECK(ens.lag_of(2.0) == 2);
  CHECK_THROWS_AS(ens.index_of(5.5), GridError);
  CHECK_THROWS_AS(ens.index_of(11.0), GridError);
  CHECK_THROWS_AS(ens.lag_of(0.5), GridError);
}

TEST_CASE("integrators reject invalid arguments") {
  const auto system = harmonic_forced_system(OscillatorParams::with_eps(1.0, 1.0, 0.1));
  RandomStream s(1, 0);
  CHECK_THROWS_AS(integrate_em(system, vec({1.0, 0.0}), 0.0, 10, s), ParameterError);
  CHECK_THROWS_AS(integrate_em(system, vec({1.0}), 0.1, 10, s), ParameterError);
  CHECK_THROWS_AS(integrate_exact_linear(0.0, 0.1, Eigen::Vector2d(1, 0), 0.1, 10, s),
                  ParameterError);
  const auto scalar = scalar_system([](double) { return 0.0; }, 1.0);
  CHECK_THROWS_AS(run_ensemble(scalar, constant_init(vec({0.0})), 2, 0.1, 10, 1,
                               RunOptions{.integrator = Integrator::ExactLinear}),
                  ParameterError);
  CHECK_THROWS_AS(run_ensemble(scalar, constant_init(vec({0.0})), 0, 0.1, 10, 1), ParameterError);
}
