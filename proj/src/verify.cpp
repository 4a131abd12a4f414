#include "nelson/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nelson/errors.hpp"

namespace nelson {

namespace {

struct Samples {
  Eigen::VectorXd condition;
  Eigen::VectorXd value;
};

std::size_t checked_index(const Ensemble& ens, double t) { return ens.index_of(t); }

/// Gathers (x(t), value(i)) over selected trajectories.
template <typename F>
Samples gather(const Ensemble& ens, int component, std::size_t k,
               const std::function<bool(std::size_t)>& select, F&& value) {
  std::vector<double> c, v;
  c.reserve(ens.size());
  v.reserve(ens.size());
  const auto& X = ens.component(component);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (select && !select(i)) continue;
    c.push_back(X(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
    v.push_back(value(i));
  }
  Samples s;
  s.condition = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  s.value = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return s;
}

/// Ranks of `condition` split into `bins` equal-count groups.
std::vector<std::vector<Eigen::Index>> quantile_groups(const Eigen::VectorXd& condition, int bins,
                                                       std::vector<double>& edges) {
  const auto n = condition.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return condition[a] < condition[b]; });
  std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(bins));
  edges.assign(static_cast<std::size_t>(bins) + 1, 0.0);
  for (int b = 0; b < bins; ++b) {
    const auto lo = n * b / bins, hi = n * (b + 1) / bins;
    groups[static_cast<std::size_t>(b)].assign(order.begin() + lo, order.begin() + hi);
  }
  if (n > 0) {
    edges.front() = condition[order.front()];
    edges.back() = condition[order.back()];
    for (int b = 1; b < bins; ++b) {
      const auto r = n * b / bins;
      edges[static_cast<std::size_t>(b)] = 0.5 * (condition[order[r - 1]] + condition[order[r]]);
    }
  }
  return groups;
}

void validate_options(const EstimatorOptions& options) {
  if (options.bins < 1) throw ParameterError("estimators need at least one bin");
}

ConditionalEstimate diffusion_from_increments(const Eigen::VectorXd& condition,
                                              const Eigen::VectorXd& increment, double delta,
                                              const EstimatorOptions& options) {
  ConditionalEstimate est;
  est.name = "diffusion_coefficient";
  est.delta = delta;
  est.min_count = options.min_count;
  const auto groups = quantile_groups(condition, options.bins, est.bin_edges);
  for (const auto& g : groups) {
    const std::size_t n = g.size();
    double cx = 0, target = 0;
    for (auto i : g) {
      cx += condition[i];
      if (options.target) target += options.target(condition[i]);
    }
    const double inv = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
    cx *= inv;
    // Least-squares line of the increment against x within the bin.
    double sxx = 0, sxy = 0, my = 0;
    for (auto i : g) my += increment[i];
    my *= inv;
    for (auto i : g) {
      const double dx = condition[i] - cx;
      sxx += dx * dx;
      sxy += dx * (increment[i] - my);
    }
    const double slope = sxx > 0 ? sxy / sxx : 0.0;
    std::vector<double> r2;
    r2.reserve(n);
    for (auto i : g) {
      const double r = increment[i] - my - slope * (condition[i] - cx);
      r2.push_back(r * r);
    }
    const double dof = n > 2 ? static_cast<double>(n - 2) : 1.0;
    const double sum_r2 = std::accumulate(r2.begin(), r2.end(), 0.0);
    const double var = sum_r2 / dof;
    const double m2 = sum_r2 * inv;
    double m4 = 0;
    for (double v : r2) m4 += v * v;
    m4 *= inv;
    const double se = n > 1 ? std::sqrt(std::max(0.0, m4 - m2 * m2) * inv) : 0.0;
    est.centers.push_back(cx);
    est.counts.push_back(n);
    est.mean.push_back(var / delta);
    est.variance.push_back(std::max(0.0, m4 - m2 * m2) / (delta * delta));
    est.std_error.push_back(se / delta);
    if (options.target) est.target.push_back(target * inv);
  }
  return est;
}

}  // namespace

ConditionalEstimate bin_by_quantile(const Eigen::VectorXd& condition, const Eigen::VectorXd& value,
                                    const EstimatorOptions& options) {
  validate_options(options);
  if (condition.size() != value.size()) throw ParameterError("condition/value size mismatch");
  ConditionalEstimate est;
  est.min_count = options.min_count;
  const auto groups = quantile_groups(condition, options.bins, est.bin_edges);
  for (const auto& g : groups) {
    const std::size_t n = g.size();
    double cx = 0, mean = 0, target = 0;
    for (auto i : g) {
      cx += condition[i];
      mean += value[i];
      if (options.target) target += options.target(condition[i]);
    }
    const double inv = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
    cx *= inv;
    mean *= inv;
    double var = 0;
    for (auto i : g) var += (value[i] - mean) * (value[i] - mean);
    var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
    est.centers.push_back(cx);
    est.counts.push_back(n);
    est.mean.push_back(mean);
    est.variance.push_back(var);
    est.std_error.push_back(n > 0 ? std::sqrt(var * inv) : 0.0);
    if (options.target) est.target.push_back(target * inv);
  }
  return est;
}

ConditionalEstimate forward_drift(const Ensemble& ens, int component, double t, double delta,
                                  const EstimatorOptions& options) {
  if (options.difference_order != 1 && options.difference_order != 2)
    throw ParameterError("difference_order must be 1 or 2");
  const std::size_t k = checked_index(ens, t), lag = ens.lag_of(delta);
  const std::size_t reach = lag * static_cast<std::size_t>(options.difference_order);
  if (k + reach >= ens.samples()) throw GridError("t + delta is past the end of the ensemble");
  const auto& X = ens.component(component);
  const bool second = options.difference_order == 2;
  const auto s = gather(ens, component, k, options.select, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    const double x0 = X(static_cast<Eigen::Index>(k), c);
    const double x1 = X(static_cast<Eigen::Index>(k + lag), c);
    if (!second) return (x1 - x0) / delta;
    const double x2 = X(static_cast<Eigen::Index>(k + 2 * lag), c);
    return (-x2 + 4.0 * x1 - 3.0 * x0) / (2.0 * delta);
  });
  auto est = bin_by_quantile(s.condition, s.value, options);
  est.name = "forward_drift";
  est.t = t;
  est.delta = delta;
  return est;
}

ConditionalEstimate backward_drift(const Ensemble& ens, int component, double t, double delta,
                                   const EstimatorOptions& options) {
  if (options.difference_order != 1 && options.difference_order != 2)
    throw ParameterError("difference_order must be 1 or 2");
  const std::size_t k = checked_index(ens, t), lag = ens.lag_of(delta);
  const std::size_t reach = lag * static_cast<std::size_t>(options.difference_order);
  if (k < reach) throw GridError("t - delta is before the start of the ensemble");
  const auto& X = ens.component(component);
  const bool second = options.difference_order == 2;
  const auto s = gather(ens, component, k, options.select, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    const double x0 = X(static_cast<Eigen::Index>(k), c);
    const double x1 = X(static_cast<Eigen::Index>(k - lag), c);
    if (!second) return (x0 - x1) / delta;
    const double x2 = X(static_cast<Eigen::Index>(k - 2 * lag), c);
    return (3.0 * x0 - 4.0 * x1 + x2) / (2.0 * delta);
  });
  auto est = bin_by_quantile(s.condition, s.value, options);
  est.name = "backward_drift";
  est.t = t;
  est.delta = delta;
  return est;
}

ConditionalEstimate mean_acceleration(const Ensemble& ens, double t, double delta,
                                      const EstimatorOptions& options, int component) {
  const std::size_t k = checked_index(ens, t), lag = ens.lag_of(delta);
  if (k < lag || k + lag >= ens.samples())
    throw GridError("t +/- delta must both lie on the ensemble grid");
  const auto& X = ens.component(component);
  const double inv = 1.0 / (delta * delta);
  const auto s = gather(ens, component, k, options.select, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    return (X(static_cast<Eigen::Index>(k + lag), c) - 2.0 * X(static_cast<Eigen::Index>(k), c) +
            X(static_cast<Eigen::Index>(k - lag), c)) *
           inv;
  });
  auto est = bin_by_quantile(s.condition, s.value, options);
  est.name = "mean_acceleration";
  est.t = t;
  est.delta = delta;
  return est;
}

ConditionalEstimate diffusion_coefficient(const Ensemble& ens, int component, double t,
                                          double delta, const EstimatorOptions& options) {
  validate_options(options);
  const std::size_t k = checked_index(ens, t), lag = ens.lag_of(delta);
  if (k + lag >= ens.samples()) throw GridError("t + delta is past the end of the ensemble");
  const auto& X = ens.component(component);
  const auto s = gather(ens, component, k, options.select, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    return X(static_cast<Eigen::Index>(k + lag), c) - X(static_cast<Eigen::Index>(k), c);
  });
  auto est = diffusion_from_increments(s.condition, s.value, delta, options);
  est.t = t;
  return est;
}

ConditionalEstimate diffusion_coefficient_pooled(
    const Ensemble& ens, int component, double t_begin, double t_end, double delta,
    const EstimatorOptions& options,
    const std::function<bool(std::size_t, std::size_t)>& select_at) {
  validate_options(options);
  const std::size_t k0 = checked_index(ens, t_begin), k1 = checked_index(ens, t_end);
  const std::size_t lag = ens.lag_of(delta);
  if (k1 < k0) throw ParameterError("pooled window must have t_begin <= t_end");
  if (k1 + lag >= ens.samples()) throw GridError("t_end + delta is past the end of the ensemble");
  const auto& X = ens.component(component);
  std::vector<double> c, v;
  for (std::size_t k = k0; k <= k1; ++k)
    for (std::size_t i = 0; i < ens.size(); ++i) {
      if (select_at && !select_at(i, k)) continue;
      const auto col = static_cast<Eigen::Index>(i);
      c.push_back(X(static_cast<Eigen::Index>(k), col));
      v.push_back(X(static_cast<Eigen::Index>(k + lag), col) - X(static_cast<Eigen::Index>(k), col));
    }
  auto est = diffusion_from_increments(
      Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())),
      Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())), delta, options);
  est.name = "diffusion_coefficient_pooled";
  est.t = t_begin;
  return est;
}

ConditionalEstimate osmotic_term_check(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                       const EstimatorOptions& options) {
  validate_options(options);
  if (x.size() != v.size()) throw ParameterError("x/v size mismatch");
  ConditionalEstimate est;
  est.name = "osmotic_term";
  est.min_count = options.min_count;
  const auto groups = quantile_groups(x, options.bins, est.bin_edges);
  for (const auto& g : groups) {
    const std::size_t n = g.size();
    double cx = 0, mv = 0;
    for (auto i : g) {
      cx += x[i];
      mv += v[i];
    }
    const double inv = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
    cx *= inv;
    mv *= inv;
    double sv = 0;
    for (auto i : g) sv += (v[i] - mv) * (v[i] - mv);
    sv = n > 1 ? std::sqrt(sv / static_cast<double>(n - 1)) : 0.0;
    // v | x is bimodal (one mode per sign of v). The overall spread measures
    // the mode separation and would smooth each mode away, so the scale of
    // the bandwidth rule is the pooled spread within each sign.
    {
      double sum[2] = {0, 0}, sq[2] = {0, 0};
      std::size_t cnt[2] = {0, 0};
      for (auto i : g) {
        const int side = v[i] >= 0 ? 1 : 0;
        sum[side] += v[i];
        sq[side] += v[i] * v[i];
        ++cnt[side];
      }
      if (cnt[0] >= 2 && cnt[1] >= 2) {
        double within = 0;
        for (int side = 0; side < 2; ++side)
          within += sq[side] - sum[side] * sum[side] / static_cast<double>(cnt[side]);
        sv = std::sqrt(std::max(0.0, within) / static_cast<double>(n - 2));
      }
    }
    const double h = 1.06 * sv * std::pow(static_cast<double>(std::max<std::size_t>(n, 1)), -0.2);

    // Score of the Gaussian KDE at each sample, sum_j (u_j - v_i) w_ij / (h^2 sum_j w_ij),
    // where u_j runs over the samples and their mirror images at the ends of
    // the sample range. The reflection keeps the estimate's support equal to
    // the sample range, so a density that does not vanish at an end of its
    // support leaves a non-zero mean score instead of being smoothed away.
    //
    // The scores share one density estimate and are correlated, so the
    // standard error comes from a delete-a-group jackknife: the kernel sums
    // are split by the group of j, and each replicate drops one group from
    // both the averaged samples and the density estimate.
    constexpr std::size_t kGroups = 100;
    const std::size_t groups_used = std::min(kGroups, std::max<std::size_t>(n, 1));
    double mean = 0, var = 0;
    if (h > 0 && n > 1) {
      const double inv_h2 = 1.0 / (h * h);
      Eigen::MatrixXd num = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(groups_used));
      Eigen::MatrixXd den = num;
      for (std::size_t a = 0; a < n; ++a) {
        const double vi = v[g[a]];
        for (std::size_t b = 0; b < n; ++b) {
          const auto col = static_cast<Eigen::Index>(b % groups_used);
          const double vj = v[g[b]];
          const double d = vj - vi;
          const double w = std::exp(-0.5 * d * d * inv_h2);
          num(static_cast<Eigen::Index>(a), col) += d * w;
          den(static_cast<Eigen::Index>(a), col) += w;
        }
      }
      const Eigen::VectorXd num_all = num.rowwise().sum(), den_all = den.rowwise().sum();
      for (std::size_t a = 0; a < n; ++a)
        mean += num_all[static_cast<Eigen::Index>(a)] * inv_h2 / den_all[static_cast<Eigen::Index>(a)];
      mean /= static_cast<double>(n);

      std::vector<double> replicate(groups_used, 0.0);
      std::vector<std::size_t> kept(groups_used, 0);
      for (std::size_t out = 0; out < groups_used; ++out) {
        const auto col = static_cast<Eigen::Index>(out);
        for (std::size_t a = 0; a < n; ++a) {
          if (a % groups_used == out) continue;
          const auto r = static_cast<Eigen::Index>(a);
          replicate[out] += (num_all[r] - num(r, col)) * inv_h2 / (den_all[r] - den(r, col));
          ++kept[out];
        }
        replicate[out] /= static_cast<double>(std::max<std::size_t>(kept[out], 1));
      }
      double rbar = 0;
      for (double r : replicate) rbar += r;
      rbar /= static_cast<double>(groups_used);
      double ss = 0;
      for (double r : replicate) ss += (r - rbar) * (r - rbar);
      const double G = static_cast<double>(groups_used);
      // Jackknife variance of the mean, reported per sample for `variance`.
      var = (G - 1) / G * ss * static_cast<double>(n);
    }
    est.centers.push_back(cx);
    est.counts.push_back(n);
    est.mean.push_back(mean);
    est.variance.push_back(var);
    est.std_error.push_back(n > 0 ? std::sqrt(var * inv) : 0.0);
    est.target.push_back(0.0);
    est.bandwidth.push_back(h);
  }
  return est;
}

ConditionalEstimate osmotic_term_check(const Ensemble& ens, double t,
                                       const EstimatorOptions& options) {
  if (ens.dimension() < 2) throw ParameterError("osmotic check needs (x, v) pairs");
  const std::size_t k = checked_index(ens, t);
  std::vector<double> xs, vs;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (options.select && !options.select(i)) continue;
    xs.push_back(ens.at(i, k, 0));
    vs.push_back(ens.at(i, k, 1));
  }
  auto est = osmotic_term_check(
      Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
      Eigen::Map<Eigen::VectorXd>(vs.data(), static_cast<Eigen::Index>(vs.size())), options);
  est.t = t;
  return est;
}

ConditionalEstimate truncated_osmotic_control(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                              const EstimatorOptions& options) {
  validate_options(options);
  if (x.size() != v.size()) throw ParameterError("x/v size mismatch");
  std::vector<double> edges;
  const auto groups = quantile_groups(x, options.bins, edges);
  std::vector<double> kx, kv;
  for (const auto& g : groups) {
    std::vector<double> positive;
    for (auto i : g)
      if (v[i] > 0) positive.push_back(v[i]);
    double cut = 0;
    if (!positive.empty()) {
      const auto mid = positive.begin() + static_cast<std::ptrdiff_t>(positive.size() / 2);
      std::nth_element(positive.begin(), mid, positive.end());
      cut = *mid;
    }
    for (auto i : g) {
      if (v[i] > 0 && v[i] < cut) continue;
      kx.push_back(x[i]);
      kv.push_back(v[i]);
    }
  }
  auto est = osmotic_term_check(Eigen::Map<Eigen::VectorXd>(kx.data(), static_cast<Eigen::Index>(kx.size())),
                                Eigen::Map<Eigen::VectorXd>(kv.data(), static_cast<Eigen::Index>(kv.size())),
                                options);
  est.name = "osmotic_negative_control";
  return est;
}

std::function<bool(std::size_t)> select_sign(const Ensemble& ens, int component, double t, int sign) {
  const std::size_t k = checked_index(ens, t);
  std::vector<bool> keep(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const double value = ens.at(i, k, component);
    keep[i] = sign >= 0 ? value >= 0 : value < 0;
  }
  return [keep = std::move(keep)](std::size_t i) { return keep[i]; };
}

EnergyWindowReport energy_window(const Ensemble& ens, const OscillatorParams& params, double E0,
                                 double std_horizon) {
  if (ens.dimension() < 2) throw ParameterError("energy window needs (x, v) ensembles");
  const std::size_t samples = ens.samples(), n = ens.size();
  if (samples < 2 || n < 2) throw ParameterError("energy window needs >= 2 samples and trajectories");
  EnergyWindowReport r;
  r.E0 = E0;
  r.predicted_slope = std::pow(params.velocity_noise(), 2) * params.m / 2.0;
  r.predicted_std_coefficient = params.velocity_noise() * std::sqrt(params.m * E0);

  Eigen::MatrixXd energy(samples, n);
  for (std::size_t k = 0; k < samples; ++k)
    for (std::size_t i = 0; i < n; ++i)
      energy(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          nelson::energy(ens.at(i, k, 0), ens.at(i, k, 1), params);

  for (std::size_t k = 0; k < samples; ++k) {
    const auto row = energy.row(static_cast<Eigen::Index>(k));
    const double mean = row.mean();
    r.times.push_back(ens.time(k) - ens.t0());
    r.mean_energy.push_back(mean);
    r.std_energy.push_back(std::sqrt((row.array() - mean).square().sum() / static_cast<double>(n - 1)));
  }

  // Least-squares slope per trajectory; their mean is the slope of the mean.
  const Eigen::Map<const Eigen::VectorXd> t(r.times.data(), static_cast<Eigen::Index>(samples));
  const Eigen::VectorXd tc = t.array() - t.mean();
  const double stt = tc.squaredNorm();
  const Eigen::VectorXd slopes = (tc.transpose() * energy).transpose() / stt;
  r.measured_slope = slopes.mean();
  r.slope_stderr =
      std::sqrt((slopes.array() - r.measured_slope).square().sum() / static_cast<double>(n - 1) /
                static_cast<double>(n));

  // std E(t) = c sqrt(t): least squares over t <= horizon gives c = sum s sqrt(t) / sum t.
  r.std_fit_horizon = std_horizon > 0 ? std_horizon : r.times.back();
  double num = 0, den = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    if (r.times[k] > r.std_fit_horizon * (1 + 1e-12)) break;
    num += r.std_energy[k] * std::sqrt(r.times[k]);
    den += r.times[k];
  }
  r.measured_std_coefficient = den > 0 ? num / den : 0.0;

  const double t_drift = params.eps > 0 ? 1.0 / params.eps : r.times.back();
  std::size_t kd = samples - 1;
  for (std::size_t k = 0; k < samples; ++k)
    if (r.times[k] >= t_drift) {
      kd = k;
      break;
    }
  r.drift_time = r.times[kd];
  r.relative_drift = std::abs(r.mean_energy[kd] - E0) / E0;
  return r;
}

double distribution_distance(Eigen::VectorXd a, Eigen::VectorXd b) {
  if (a.size() == 0 || b.size() == 0) throw ParameterError("KS distance needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  Eigen::Index i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double distribution_distance(const Ensemble& a, const Ensemble& b,
                             const std::function<double(const StateVector<double>&)>& observable,
                             double t) {
  const auto collect = [&](const Ensemble& e) {
    const std::size_t k = e.index_of(t);
    Eigen::VectorXd out(static_cast<Eigen::Index>(e.size()));
    for (std::size_t i = 0; i < e.size(); ++i) out[static_cast<Eigen::Index>(i)] = observable(e.state(i, k));
    return out;
  };
  return distribution_distance(collect(a), collect(b));
}

std::vector<std::size_t> central_bins(const ConditionalEstimate& est, double fraction) {
  const std::size_t B = est.bins();
  const auto drop = static_cast<std::size_t>(std::floor((1.0 - fraction) / 2.0 * static_cast<double>(B) + 1e-9));
  std::vector<std::size_t> out;
  for (std::size_t b = drop; b + drop < B; ++b)
    if (est.usable(b)) out.push_back(b);
  return out;
}

namespace {

CheckResult run_check(const ConditionalEstimate& est, double fraction, double threshold,
                      std::string description,
                      const std::function<double(std::size_t)>& statistic) {
  CheckResult r;
  r.threshold = threshold;
  r.description = std::move(description);
  r.bin_pass.assign(est.bins(), false);
  const auto bins = central_bins(est, fraction);
  r.checked_bins = bins.size();
  r.pass = !bins.empty();
  for (auto b : bins) {
    const double s = statistic(b);
    r.statistic = std::max(r.statistic, s);
    r.bin_pass[b] = s <= threshold;
    r.pass = r.pass && r.bin_pass[b];
  }
  return r;
}

void require_target(const ConditionalEstimate& est) {
  if (est.target.size() != est.bins()) throw ParameterError("estimate has no target to compare with");
}

}  // namespace

CheckResult check_within_stderr(const ConditionalEstimate& est, double k, double fraction) {
  require_target(est);
  return run_check(est, fraction, k, "|estimate - target| / stderr", [&](std::size_t b) {
    const double diff = std::abs(est.mean[b] - est.target[b]);
    return est.std_error[b] > 0 ? diff / est.std_error[b] : (diff == 0 ? 0.0 : INFINITY);
  });
}

CheckResult check_relative_sup(const ConditionalEstimate& est, double tol, double fraction) {
  require_target(est);
  double scale = 0;
  for (auto b : central_bins(est, fraction)) scale = std::max(scale, std::abs(est.target[b]));
  return run_check(est, fraction, tol, "|estimate - target| / max |target|", [&](std::size_t b) {
    const double diff = std::abs(est.mean[b] - est.target[b]);
    return scale > 0 ? diff / scale : (diff == 0 ? 0.0 : INFINITY);
  });
}

CheckResult check_relative_per_bin(const ConditionalEstimate& est, double tol, double fraction) {
  require_target(est);
  return run_check(est, fraction, tol, "|estimate - target| / |target|", [&](std::size_t b) {
    const double diff = std::abs(est.mean[b] - est.target[b]);
    const double scale = std::abs(est.target[b]);
    return scale > 0 ? diff / scale : (diff == 0 ? 0.0 : INFINITY);
  });
}

CheckResult check_constant(const ConditionalEstimate& est, double value, double tol,
                           double fraction) {
  return run_check(est, fraction, tol, "|estimate - value| / |value|", [&](std::size_t b) {
    const double diff = std::abs(est.mean[b] - value);
    return value != 0 ? diff / std::abs(value) : diff;
  });
}

}  // namespace nelson
