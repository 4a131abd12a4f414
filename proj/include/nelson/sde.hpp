#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "nelson/errors.hpp"
#include "nelson/noise.hpp"
#include "nelson/random.hpp"

namespace nelson {

/// Upper bound on the state dimension and on the number of driving noises.
/// Fixed-capacity Eigen storage keeps the per-step drift/diffusion calls
/// allocation free.
inline constexpr int kMaxDimension = 4;

template <typename Scalar>
using StateVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxDimension, 1>;

template <typename Scalar>
using DiffusionMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDimension, kMaxDimension>;

/// k independent Wiener processes.
struct IndependentWiener {
  int count = 1;
};

/// One pre-synthesized colored forcing path per trajectory; the diffusion
/// matrix (d x 1) multiplies xi(t_n) dt, held constant over each step.
struct ExternalPath {
  NoiseSpectrum spectrum;
};

using Driving = std::variant<IndependentWiener, ExternalPath>;

/// dv = -omega^2 x dt + noise, dx = v dt: enables the exact linear integrator.
struct LinearOscillatorForm {
  double omega = 1.0;
  /// Amplitude of the white velocity noise (zero for ExternalPath driving).
  double velocity_noise = 0.0;
};

/// Ito SDE dX = drift(X, t) dt + diffusion(X, t) dW.
template <typename Scalar = double>
struct SdeSystem {
  using State = StateVector<Scalar>;
  using Matrix = DiffusionMatrix<Scalar>;

  int dimension = 1;
  std::function<State(const State&, Scalar)> drift;
  std::function<Matrix(const State&, Scalar)> diffusion;
  Driving driving = IndependentWiener{1};
  /// Optional map applied after every step (reflections, branch flips).
  std::function<void(State&)> constrain;
  std::optional<LinearOscillatorForm> linear_form;

  std::string model;
  std::map<std::string, double> parameters;
  std::vector<std::string> warnings;

  int noise_count() const {
    if (const auto* w = std::get_if<IndependentWiener>(&driving)) return w->count;
    return 1;
  }

  void validate() const {
    if (dimension < 1 || dimension > kMaxDimension)
      throw ParameterError("state dimension must be in [1, " + std::to_string(kMaxDimension) + "]");
    if (!drift || !diffusion) throw ParameterError("system needs drift and diffusion");
    if (const auto* w = std::get_if<IndependentWiener>(&driving);
        w && (w->count < 1 || w->count > kMaxDimension))
      throw ParameterError("number of Wiener processes must be in [1, 4]");
  }
};

using SdeSystemd = SdeSystem<double>;

/// One sampled path: column j is the state at t0 + j * stride * dt.
template <typename Scalar>
using Path = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

inline std::size_t stored_count(std::size_t steps, std::size_t stride) {
  return steps / stride + 1;
}

template <typename Scalar>
bool finite(const StateVector<Scalar>& x) {
  return x.allFinite();
}

}  // namespace detail

/// Euler-Maruyama: x_{n+1} = x_n + f(x_n, t_n) dt + g(x_n, t_n) dW_n, with g
/// evaluated at the left endpoint (Ito). Keeps every `stride`-th state.
template <typename Scalar>
Path<Scalar> integrate_em(const SdeSystem<Scalar>& system, const StateVector<Scalar>& init,
                          Scalar dt, std::size_t steps, RandomStream& stream, Scalar t0 = 0,
                          std::size_t stride = 1) {
  system.validate();
  if (!(dt > 0)) throw ParameterError("integrate_em needs dt > 0");
  if (stride == 0) throw ParameterError("stride must be positive");
  if (init.size() != system.dimension) throw ParameterError("initial state has wrong dimension");

  const int k = system.noise_count();
  Eigen::VectorXd forcing;
  if (const auto* ext = std::get_if<ExternalPath>(&system.driving))
    forcing = synthesize_colored_noise(ext->spectrum, static_cast<double>(dt), std::max<std::size_t>(steps, 1),
                                       stream);
  const bool external = forcing.size() > 0;
  const Scalar sqrt_dt = std::sqrt(dt);

  Path<Scalar> path(system.dimension, static_cast<Eigen::Index>(detail::stored_count(steps, stride)));
  StateVector<Scalar> x = init;
  StateVector<Scalar> noise(k);
  path.col(0) = x;
  for (std::size_t n = 0; n < steps; ++n) {
    const Scalar t = t0 + static_cast<Scalar>(n) * dt;
    if (external) {
      noise(0) = static_cast<Scalar>(forcing[static_cast<Eigen::Index>(n)]) * dt;
    } else {
      for (int j = 0; j < k; ++j) noise(j) = sqrt_dt * static_cast<Scalar>(stream.normal());
    }
    // Diffusion is evaluated before x moves: Ito, never midpoint.
    const auto g = system.diffusion(x, t);
    x += system.drift(x, t) * dt + g * noise;
    if (system.constrain) system.constrain(x);
    if (!detail::finite(x)) throw IntegrationDiverged(n + 1);
    if ((n + 1) % stride == 0) path.col(static_cast<Eigen::Index>((n + 1) / stride)) = x;
  }
  return path;
}

/// Exact one-step transition of dx = v dt, dv = -omega^2 x dt + sigma dW
/// (+ a forcing xi held constant over the step).
template <typename Scalar>
struct ExactOscillatorStep {
  Eigen::Matrix<Scalar, 2, 2> rotation;
  Eigen::Matrix<Scalar, 2, 2> covariance;
  Eigen::Matrix<Scalar, 2, 2> cholesky;
  /// Response of (x, v) to a unit constant forcing over the step.
  Eigen::Matrix<Scalar, 2, 1> forcing_response;

  ExactOscillatorStep(Scalar omega, Scalar sigma, Scalar h) {
    using std::cos;
    using std::sin;
    const Scalar c = cos(omega * h), s = sin(omega * h);
    rotation << c, s / omega, -omega * s, c;
    const Scalar s2 = sin(2 * omega * h) / (4 * omega);
    const Scalar var = sigma * sigma;
    covariance(0, 0) = var / (omega * omega) * (h / 2 - s2);
    covariance(1, 1) = var * (h / 2 + s2);
    covariance(0, 1) = covariance(1, 0) = var * s * s / (2 * omega * omega);
    cholesky.setZero();
    if (covariance(0, 0) > 0) {
      cholesky(0, 0) = std::sqrt(covariance(0, 0));
      cholesky(1, 0) = covariance(1, 0) / cholesky(0, 0);
      cholesky(1, 1) = std::sqrt(std::max(Scalar(0), covariance(1, 1) - cholesky(1, 0) * cholesky(1, 0)));
    }
    forcing_response << (1 - c) / (omega * omega), s / omega;
  }

  Eigen::Matrix<Scalar, 2, 1> mean(const Eigen::Matrix<Scalar, 2, 1>& state, Scalar xi = 0) const {
    return rotation * state + forcing_response * xi;
  }
};

/// Reference integrator for the forced oscillator dx = v dt,
/// dv = -omega^2 x dt + eps * omega dW: samples the exact Gaussian transition
/// law, so the result is exact in distribution for any dt. When `forcing` is
/// non-empty it replaces the white noise (held constant over each step).
template <typename Scalar>
Path<Scalar> integrate_exact_linear(Scalar omega, Scalar eps_force,
                                    const Eigen::Matrix<Scalar, 2, 1>& init, Scalar dt,
                                    std::size_t steps, RandomStream& stream,
                                    std::size_t stride = 1,
                                    const Eigen::VectorXd& forcing = Eigen::VectorXd()) {
  if (!(omega > 0)) throw ParameterError("exact integrator needs omega > 0");
  if (!(eps_force >= 0)) throw ParameterError("noise scale must be non-negative");
  if (!(dt > 0)) throw ParameterError("exact integrator needs dt > 0");
  if (stride == 0) throw ParameterError("stride must be positive");
  const bool external = forcing.size() > 0;
  if (external && static_cast<std::size_t>(forcing.size()) < steps)
    throw ParameterError("forcing path shorter than the integration");

  const ExactOscillatorStep<Scalar> step(omega, external ? Scalar(0) : eps_force * omega, dt);
  Path<Scalar> path(2, static_cast<Eigen::Index>(detail::stored_count(steps, stride)));
  Eigen::Matrix<Scalar, 2, 1> x = init;
  path.col(0) = x;
  for (std::size_t n = 0; n < steps; ++n) {
    if (external) {
      x = step.mean(x, static_cast<Scalar>(forcing[static_cast<Eigen::Index>(n)]));
    } else {
      Eigen::Matrix<Scalar, 2, 1> z(static_cast<Scalar>(stream.normal()),
                                    static_cast<Scalar>(stream.normal()));
      x = step.rotation * x + step.cholesky * z;
    }
    if (!x.allFinite()) throw IntegrationDiverged(n + 1);
    if ((n + 1) % stride == 0) path.col(static_cast<Eigen::Index>((n + 1) / stride)) = x;
  }
  return path;
}

enum class Integrator { EulerMaruyama, ExactLinear };

struct EnsembleMeta {
  std::uint64_t seed = 0;
  std::string model;
  std::string integrator;
  std::map<std::string, double> parameters;
  std::size_t stride = 1;
};

/// N sampled paths on one uniform time grid. Component c is stored as a
/// (samples x N) matrix, so each trajectory is a contiguous column.
template <typename Scalar = double>
class TrajectoryEnsemble {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  TrajectoryEnsemble() = default;
  TrajectoryEnsemble(int dimension, std::size_t trajectories, std::size_t samples, Scalar t0,
                     Scalar dt, std::size_t steps, EnsembleMeta meta)
      : t0_(t0), dt_(dt), steps_(steps), meta_(std::move(meta)) {
    components_.assign(static_cast<std::size_t>(dimension),
                       Matrix::Zero(static_cast<Eigen::Index>(samples),
                                    static_cast<Eigen::Index>(trajectories)));
  }

  int dimension() const { return static_cast<int>(components_.size()); }
  std::size_t size() const {
    return components_.empty() ? 0 : static_cast<std::size_t>(components_[0].cols());
  }
  std::size_t samples() const {
    return components_.empty() ? 0 : static_cast<std::size_t>(components_[0].rows());
  }
  Scalar t0() const { return t0_; }
  /// Integration step.
  Scalar dt() const { return dt_; }
  std::size_t steps() const { return steps_; }
  std::size_t stride() const { return meta_.stride; }
  /// Spacing of stored samples.
  Scalar sample_dt() const { return dt_ * static_cast<Scalar>(meta_.stride); }
  Scalar time(std::size_t k) const { return t0_ + static_cast<Scalar>(k) * sample_dt(); }
  const EnsembleMeta& meta() const { return meta_; }

  const Matrix& component(int c) const { return components_.at(static_cast<std::size_t>(c)); }
  Matrix& component(int c) { return components_.at(static_cast<std::size_t>(c)); }

  Scalar at(std::size_t trajectory, std::size_t sample, int c) const {
    return component(c)(static_cast<Eigen::Index>(sample), static_cast<Eigen::Index>(trajectory));
  }

  StateVector<Scalar> state(std::size_t trajectory, std::size_t sample) const {
    StateVector<Scalar> x(dimension());
    for (int c = 0; c < dimension(); ++c) x(c) = at(trajectory, sample, c);
    return x;
  }

  /// Sample index of time t; throws GridError when t is not a stored time.
  std::size_t index_of(Scalar t) const {
    const Scalar u = (t - t0_) / sample_dt();
    const Scalar k = std::round(u);
    if (std::abs(u - k) > Scalar(1e-6) || k < 0 || k >= static_cast<Scalar>(samples()))
      throw GridError("time " + std::to_string(static_cast<double>(t)) + " is not on the grid");
    return static_cast<std::size_t>(k);
  }

  /// Number of stored samples spanned by a lag; throws GridError when the
  /// lag is not a positive multiple of the sample spacing.
  std::size_t lag_of(Scalar delta) const {
    const Scalar u = delta / sample_dt();
    const Scalar k = std::round(u);
    if (std::abs(u - k) > Scalar(1e-6) || k < 1)
      throw GridError("lag " + std::to_string(static_cast<double>(delta)) +
                      " is not a positive multiple of the sample spacing");
    return static_cast<std::size_t>(k);
  }

  /// Values of component c at sample k across trajectories.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> slice(int c, std::size_t k) const {
    return component(c).row(static_cast<Eigen::Index>(k)).transpose();
  }

 private:
  Scalar t0_ = 0;
  Scalar dt_ = 1;
  std::size_t steps_ = 0;
  EnsembleMeta meta_;
  std::vector<Matrix> components_;
};

using Ensemble = TrajectoryEnsemble<double>;

template <typename Scalar>
using InitSampler = std::function<StateVector<Scalar>(RandomStream&)>;

struct RunOptions {
  std::size_t stride = 1;
  unsigned threads = 1;
  Integrator integrator = Integrator::EulerMaruyama;
  double t0 = 0.0;
};

/// N independent trajectories; trajectory i draws its initial state and its
/// noise from RandomStream(master_seed, i), so the result does not depend on
/// the thread count. Divergence is reported for the lowest failing index.
template <typename Scalar>
TrajectoryEnsemble<Scalar> run_ensemble(const SdeSystem<Scalar>& system,
                                        const InitSampler<Scalar>& init_sampler,
                                        std::size_t n_traj, Scalar dt, std::size_t steps,
                                        std::uint64_t master_seed, const RunOptions& options = {}) {
  system.validate();
  if (n_traj == 0) throw ParameterError("run_ensemble needs n_traj >= 1");
  if (options.stride == 0 || options.stride > std::max<std::size_t>(steps, 1))
    throw ParameterError("stride must be in [1, steps]");
  const bool exact = options.integrator == Integrator::ExactLinear;
  if (exact && (!system.linear_form || system.dimension != 2))
    throw ParameterError("exact linear integration needs a linear oscillator system");

  EnsembleMeta meta{master_seed, system.model, exact ? "exact_linear" : "euler_maruyama",
                    system.parameters, options.stride};
  const std::size_t samples = detail::stored_count(steps, options.stride);
  TrajectoryEnsemble<Scalar> ensemble(system.dimension, n_traj, samples,
                                      static_cast<Scalar>(options.t0), dt, steps, meta);

  auto run_one = [&](std::size_t i) {
    RandomStream stream(master_seed, i);
    const StateVector<Scalar> init = init_sampler(stream);
    Path<Scalar> path;
    if (exact) {
      const auto& form = *system.linear_form;
      Eigen::VectorXd forcing;
      if (const auto* ext = std::get_if<ExternalPath>(&system.driving))
        forcing = synthesize_colored_noise(ext->spectrum, static_cast<double>(dt),
                                           std::max<std::size_t>(steps, 1), stream);
      const Eigen::Matrix<Scalar, 2, 1> start = init.template head<2>();
      path = integrate_exact_linear<Scalar>(static_cast<Scalar>(form.omega),
                                            static_cast<Scalar>(form.velocity_noise / form.omega),
                                            start, dt, steps, stream, options.stride, forcing);
    } else {
      path = integrate_em(system, init, dt, steps, stream, static_cast<Scalar>(options.t0),
                          options.stride);
    }
    for (int c = 0; c < system.dimension; ++c)
      ensemble.component(c).col(static_cast<Eigen::Index>(i)) = path.row(c).transpose();
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_traj)));
  std::vector<std::exception_ptr> errors(threads);
  std::vector<long> failed(threads, -1);
  auto worker = [&](unsigned w) {
    for (std::size_t i = w; i < n_traj; i += threads) {
      try {
        run_one(i);
      } catch (...) {
        errors[w] = std::current_exception();
        failed[w] = static_cast<long>(i);
        return;
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
  }

  long first = -1;
  std::exception_ptr error;
  for (unsigned w = 0; w < threads; ++w)
    if (failed[w] >= 0 && (first < 0 || failed[w] < first)) {
      first = failed[w];
      error = errors[w];
    }
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const IntegrationDiverged& e) {
      throw e.with_trajectory(first);
    }
  }
  return ensemble;
}

}  // namespace nelson
