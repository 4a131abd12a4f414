#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nelson/models.hpp"
#include "nelson/sde.hpp"

namespace nelson {

/// Per-bin statistics of a quantity conditioned on a position-like variable,
/// binned at equal counts (quantiles).
struct ConditionalEstimate {
  std::string name;
  double t = 0.0;
  double delta = 0.0;
  std::size_t min_count = 200;
  std::vector<double> bin_edges;  // bins + 1
  std::vector<double> centers;    // mean conditioning value in each bin
  std::vector<std::size_t> counts;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> std_error;
  /// Bin average of the target function; empty when no target was given.
  std::vector<double> target;
  /// Kernel bandwidth per bin (osmotic check only).
  std::vector<double> bandwidth;

  std::size_t bins() const { return counts.size(); }
  bool usable(std::size_t b) const { return counts[b] >= min_count; }
};

struct EstimatorOptions {
  int bins = 20;
  std::size_t min_count = 200;
  /// Expected value as a function of the conditioning variable; averaged
  /// over the samples of each bin.
  std::function<double(double)> target;
  /// Keeps only trajectories for which this returns true.
  std::function<bool(std::size_t)> select;
  /// Drift estimators only. 1: plain one-sided difference over delta.
  /// 2: one-sided second-order difference over delta and 2 delta, which
  /// removes the O(delta) bias from the curvature of the paths.
  int difference_order = 1;
};

/// Equal-count binning of `value` by `condition`. `target` (optional) is
/// averaged over each bin's conditioning values.
ConditionalEstimate bin_by_quantile(const Eigen::VectorXd& condition, const Eigen::VectorXd& value,
                                    const EstimatorOptions& options);

/// E[(x(t + delta) - x(t)) / delta | x(t)] for component `component`
/// (order 2: E[(-x(t + 2 delta) + 4 x(t + delta) - 3 x(t)) / (2 delta) | x(t)]).
ConditionalEstimate forward_drift(const Ensemble& ens, int component, double t, double delta,
                                  const EstimatorOptions& options = {});
/// E[(x(t) - x(t - delta)) / delta | x(t)]; needs t - delta >= t0
/// (order 2: E[(3 x(t) - 4 x(t - delta) + x(t - 2 delta)) / (2 delta) | x(t)]).
ConditionalEstimate backward_drift(const Ensemble& ens, int component, double t, double delta,
                                   const EstimatorOptions& options = {});
/// E[(x(t + delta) - 2 x(t) + x(t - delta)) / delta^2 | x(t)].
ConditionalEstimate mean_acceleration(const Ensemble& ens, double t, double delta,
                                      const EstimatorOptions& options = {}, int component = 0);
/// Conditional variance of the forward increment divided by delta, after
/// removing a within-bin linear trend of the increment in x(t).
ConditionalEstimate diffusion_coefficient(const Ensemble& ens, int component, double t,
                                          double delta, const EstimatorOptions& options = {});
/// Same estimator on increments pooled over every stored time in
/// [t_begin, t_end] (for time-homogeneous processes). `select_at(i, k)`
/// keeps the pair of trajectory i at sample k.
ConditionalEstimate diffusion_coefficient_pooled(
    const Ensemble& ens, int component, double t_begin, double t_end, double delta,
    const EstimatorOptions& options = {},
    const std::function<bool(std::size_t, std::size_t)>& select_at = {});

/// Mean of the kernel-density score d/dv log rho(v | x) in each x-bin.
/// Gaussian kernel with bandwidth 1.06 s n^(-1/5) per bin, where s is the
/// pooled standard deviation within each sign of v (the overall one when a
/// sign has fewer than two samples). Standard errors by delete-a-group
/// jackknife.
ConditionalEstimate osmotic_term_check(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                       const EstimatorOptions& options = {});
/// Same on components (0, 1) of an ensemble at time t.
ConditionalEstimate osmotic_term_check(const Ensemble& ens, double t,
                                       const EstimatorOptions& options = {});

/// Negative control for the osmotic check: within each x-bin, samples of
/// the positive-v mode below that mode's median are discarded, leaving a
/// hard edge in rho(v | x). The estimate should then be clearly non-zero.
ConditionalEstimate truncated_osmotic_control(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                              const EstimatorOptions& options = {});

/// Trajectory indices whose component c has the given sign at time t.
std::function<bool(std::size_t)> select_sign(const Ensemble& ens, int component, double t, int sign);

struct EnergyWindowReport {
  double E0 = 0.0;
  double measured_slope = 0.0;
  double slope_stderr = 0.0;
  double predicted_slope = 0.0;
  double measured_std_coefficient = 0.0;
  double predicted_std_coefficient = 0.0;
  /// Time window used for the std fit.
  double std_fit_horizon = 0.0;
  /// |mean E - E0| / E0 at t = 1/eps (or the last sample if earlier).
  double relative_drift = 0.0;
  double drift_time = 0.0;
  std::vector<double> times;
  std::vector<double> mean_energy;
  std::vector<double> std_energy;
};

/// Energy drift of an (x, v) oscillator ensemble: slope of the mean energy
/// (least squares over the whole run; stderr from per-trajectory slopes)
/// and the coefficient c of std E(t) ~ c sqrt(t) fitted for t <= std_horizon
/// (default: whole run).
EnergyWindowReport energy_window(const Ensemble& ens, const OscillatorParams& params, double E0,
                                 double std_horizon = 0.0);

/// Two-sample Kolmogorov-Smirnov statistic.
double distribution_distance(Eigen::VectorXd a, Eigen::VectorXd b);
/// KS distance of observable(state) at time t between two ensembles.
double distribution_distance(const Ensemble& a, const Ensemble& b,
                             const std::function<double(const StateVector<double>&)>& observable,
                             double t);

/// Outcome of comparing estimates with targets over selected bins.
struct CheckResult {
  bool pass = false;
  /// Worst statistic over the checked bins (meaning depends on the check).
  double statistic = 0.0;
  double threshold = 0.0;
  std::size_t checked_bins = 0;
  std::vector<bool> bin_pass;  // per bin; false for unchecked bins
  std::string description;
};

/// Usable bins left after dropping the outer (1 - fraction) / 2 of the
/// quantile bins on each side.
std::vector<std::size_t> central_bins(const ConditionalEstimate& est, double fraction = 0.8);

/// |mean - target| <= k stderr in every central bin.
CheckResult check_within_stderr(const ConditionalEstimate& est, double k = 3.0,
                                double fraction = 0.8);
/// max |mean - target| <= tol * max |target| over central bins.
CheckResult check_relative_sup(const ConditionalEstimate& est, double tol, double fraction = 0.8);
/// |mean - target| <= tol * |target| in every central bin.
CheckResult check_relative_per_bin(const ConditionalEstimate& est, double tol,
                                   double fraction = 0.8);
/// |mean - value| <= tol * |value| in every central bin, for a constant value.
CheckResult check_constant(const ConditionalEstimate& est, double value, double tol,
                           double fraction = 0.8);

}  // namespace nelson
