#include "nelson/averaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>

#include "nelson/errors.hpp"

namespace nelson {

using std::numbers::pi;

namespace {

/// Five-point centred stencils on values f(-2h), f(-h), f(0), f(h), f(2h).
double first_derivative(const std::array<double, 5>& f, double h) {
  return (8.0 * (f[3] - f[1]) - (f[4] - f[0])) / (12.0 * h);
}

double second_derivative(const std::array<double, 5>& f, double h) {
  return (-f[4] + 16.0 * f[3] - 30.0 * f[2] + 16.0 * f[1] - f[0]) / (12.0 * h * h);
}

void reflect_below(double& r, double floor) {
  if (r < floor) r = std::max(2.0 * floor - r, floor);
}

SdeSystemd amplitude_phase_system(double drift_coefficient, double noise, double r0,
                                  std::string model) {
  if (!(r0 > 0)) throw ParameterError("reference amplitude r0 must be positive");
  const double r_min = 1e-6 * r0;
  SdeSystemd sys;
  sys.dimension = 2;
  sys.driving = IndependentWiener{2};
  sys.drift = [drift_coefficient](const SdeSystemd::State& s, double) {
    SdeSystemd::State f(2);
    f << drift_coefficient / s(0), 0.0;
    return f;
  };
  sys.diffusion = [noise](const SdeSystemd::State& s, double) {
    SdeSystemd::Matrix g = SdeSystemd::Matrix::Zero(2, 2);
    g(0, 0) = noise;
    g(1, 1) = noise / s(0);
    return g;
  };
  sys.constrain = [r_min](SdeSystemd::State& s) { reflect_below(s(0), r_min); };
  sys.model = std::move(model);
  sys.parameters = {{"r0", r0}, {"r_min", r_min}};
  return sys;
}

}  // namespace

SdeSystemd averaged_harmonic_system(double eps, double r0) {
  if (!(eps >= 0)) throw ParameterError("eps must be non-negative");
  auto sys = amplitude_phase_system(eps * eps / 4.0, eps / std::sqrt(2.0), r0, "averaged_harmonic");
  sys.parameters["eps"] = eps;
  return sys;
}

SdeSystemd averaged_colored_system(const NoiseSpectrum& spectrum, double omega, double r0) {
  if (!(omega > 0)) throw ParameterError("omega must be positive");
  const double S = spectrum(omega);
  if (!std::isfinite(S) || S < 0) throw ParameterError("spectrum at the resonance must be finite");
  auto sys = amplitude_phase_system(S / (8.0 * pi * omega * omega), std::sqrt(S / (4.0 * pi)) / omega,
                                    r0, "averaged_colored");
  sys.parameters["omega"] = omega;
  sys.parameters["S_resonant"] = S;
  return sys;
}

SdeSystemd reconstructed_x_system(const OscillatorParams& params, double E0) {
  params.validate();
  const double hbar = params.nelson_scaling ? params.hbar : 0.5 * params.m * params.eps * params.eps;
  auto sys = reconstructed_x_system(params.m, potentials::harmonic(params.m, params.omega), E0, hbar);
  sys.parameters["omega"] = params.omega;
  return sys;
}

SdeSystemd reconstructed_x_system(double m, const PotentialSpec& pot, double E0, double hbar) {
  if (!(m > 0)) throw ParameterError("mass must be positive");
  if (!(hbar >= 0)) throw ParameterError("hbar must be non-negative");
  const auto [x_lo, x_hi] = turning_points(pot, m, E0);
  const auto U = pot.U;
  SdeSystemd sys;
  sys.dimension = 2;
  sys.driving = IndependentWiener{1};
  sys.drift = [U, m, E0](const SdeSystemd::State& s, double) {
    SdeSystemd::State f(2);
    f << s(1) * std::sqrt(std::max(0.0, 2.0 / m * (E0 - U(s(0))))), 0.0;
    return f;
  };
  const double noise = std::sqrt(hbar / m);
  sys.diffusion = [noise](const SdeSystemd::State&, double) {
    SdeSystemd::Matrix g = SdeSystemd::Matrix::Zero(2, 1);
    g(0, 0) = noise;
    return g;
  };
  sys.constrain = [lo = x_lo, hi = x_hi](SdeSystemd::State& s) {
    for (int it = 0; it < 8 && (s(0) > hi || s(0) < lo); ++it) {
      if (s(0) > hi) {
        s(0) = 2.0 * hi - s(0);
        s(1) = -1.0;
      } else {
        s(0) = 2.0 * lo - s(0);
        s(1) = 1.0;
      }
    }
    s(0) = std::clamp(s(0), lo, hi);
  };
  sys.model = "reconstructed_x";
  sys.parameters = {{"m", m}, {"E0", E0}, {"hbar", hbar}, {"x_minus", x_lo}, {"x_plus", x_hi}};
  return sys;
}

Ensemble reconstruct_position(const Ensemble& rphi, double omega) {
  if (rphi.dimension() != 2) throw ParameterError("expected an (r, phi) ensemble");
  EnsembleMeta meta = rphi.meta();
  meta.model = meta.model + "/position";
  Ensemble out(2, rphi.size(), rphi.samples(), rphi.t0(), rphi.dt(), rphi.steps(), meta);
  for (std::size_t k = 0; k < rphi.samples(); ++k) {
    const double t = rphi.time(k);
    for (std::size_t i = 0; i < rphi.size(); ++i) {
      const auto [x, v] = from_amplitude_phase(rphi.at(i, k, 0), rphi.at(i, k, 1), omega, t);
      out.component(0)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = x;
      out.component(1)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return out;
}

double period_average(const std::function<double(double, double)>& g, const ActionAngleChart& chart) {
  return chart.period_average(g);
}

Eigen::Matrix2d psd_factor(const Eigen::Matrix2d& D, std::vector<std::string>* warnings) {
  const Eigen::Matrix2d sym = 0.5 * (D + D.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(sym);
  Eigen::Vector2d lambda = eig.eigenvalues();
  const double tol = 1e-12 * std::max(std::abs(sym.trace()), std::numeric_limits<double>::min());
  if (lambda.minCoeff() < -tol)
    throw DomainError("diffusion matrix is not positive semidefinite (eigenvalue " +
                      std::to_string(lambda.minCoeff()) + ")");
  if (lambda.minCoeff() < 0) {
    if (warnings) warnings->push_back("clipped a negative eigenvalue of D to zero");
    lambda = lambda.cwiseMax(0.0);
  }
  if (lambda.minCoeff() > tol) {
    Eigen::LLT<Eigen::Matrix2d> llt(sym);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  const Eigen::Matrix2d V = eig.eigenvectors();
  return V * lambda.cwiseSqrt().asDiagonal() * V.transpose();
}

AveragedCoefficients compute_averaged_coefficients(const ActionAngleChart& chart, double eps7,
                                                   const AveragingOptions& options) {
  if (!(eps7 >= 0)) throw ParameterError("eps7 must be non-negative");
  if (options.angles < 4) throw ParameterError("averaging needs at least 4 angles");
  const PotentialSpec& pot = chart.potential();
  const double m = chart.m(), E = chart.E(), x0 = chart.x0();
  const double xmin = well_minimum(pot);
  if (!(x0 > chart.x_minus() && x0 < chart.x_plus()))
    throw ParameterError("averaging needs the angle reference x0 strictly inside the orbit");
  const auto make = [&](double energy) {
    return ActionAngleChart(pot, m, energy, x0, options.quadrature, xmin);
  };

  AveragedCoefficients out;
  out.E = E;
  out.T = chart.T();
  out.omega = chart.omega();
  out.eps7 = eps7;

  // omega(E) = 2 pi / T(E) and its E-derivatives. A wider step than the
  // chart derivatives keeps quadrature noise out of d2omega/dE2.
  const double depth = E - pot.U(xmin);
  const double hw = options.omega_step * depth;
  std::array<double, 5> omegas{};
  for (int k = -2; k <= 2; ++k)
    omegas[static_cast<std::size_t>(k + 2)] = k == 0 ? chart.omega() : make(E + k * hw).omega();
  const double dw = first_derivative(omegas, hw);
  const double d2w = second_derivative(omegas, hw);
  out.domega_dE = dw;

  // Angle derivatives in p at fixed x, period-averaged.
  const double p_max = std::sqrt(2.0 * m * (E - pot.U(xmin)));
  const double hp = options.p_step * p_max;
  double sum_w = 0, d11 = 0, d12 = 0, d22 = 0, fsum = 0;
  for (const auto& node : chart.orbit_nodes()) {
    // (x, sign * p_node + k hp) has energy set by |p_node + sign * k hp|, so
    // one chart per key = sign * k serves both branches.
    std::map<int, ActionAngleChart> local;
    const auto angle_at = [&](int key, int branch) {
      auto it = local.find(key);
      if (it == local.end()) {
        const double pk = node.p + key * hp;
        it = local.emplace(key, make(pk * pk / (2.0 * m) + pot.U(node.x))).first;
      }
      const auto& c = it->second;
      return c.angle(std::clamp(node.x, c.x_minus(), c.x_plus()), branch);
    };
    for (int sign : {1, -1}) {
      const double p = sign * node.p;
      const double phi0 = chart.angle(node.x, sign);
      std::array<double, 5> d{};
      for (int k = -2; k <= 2; ++k) {
        if (k == 0) continue;
        const double pk = p + k * hp;
        const double phik = angle_at(sign * k, pk >= 0 ? 1 : -1);
        d[static_cast<std::size_t>(k + 2)] = std::remainder(phik - phi0, 2.0 * pi);
      }
      const double phi_p = first_derivative(d, hp);
      const double phi_pp = second_derivative(d, hp);
      const double t = chart.orbit_time(node.x, sign);
      const double g_theta = phi_p - p * dw * t / m;
      const double f_local = phi_pp - (t / m) * (dw + p * p / m * d2w);
      d11 += node.weight * p * p / (m * m);
      d12 += node.weight * (p / m) * g_theta;
      d22 += node.weight * g_theta * g_theta;
      fsum += node.weight * f_local;
    }
    sum_w += 2.0 * node.weight;
  }
  const double scale = m / chart.T();
  out.D << d11 * scale, d12 * scale, d12 * scale, d22 * scale;
  out.F = fsum * scale;
  if (std::abs(sum_w * scale - 1.0) > 1e-6)
    out.warnings.push_back("orbit quadrature weights sum to " + std::to_string(sum_w * scale));
  out.sigma = psd_factor(out.D, &out.warnings);

  // Position equation through the inverse chart x = X(phi, E).
  const double hE = options.e_step * depth;
  std::vector<ActionAngleChart> shifted;
  for (int k : {-2, -1, 1, 2}) shifted.push_back(make(E + k * hE));
  const ActionAngleChart* charts[5] = {&shifted[0], &shifted[1], &chart, &shifted[2], &shifted[3]};
  const auto& s = out.sigma;
  double g1 = 0, g2 = 0, ksum = 0;
  for (int j = 0; j < options.angles; ++j) {
    const double phi = 2.0 * pi * j / options.angles;
    std::array<double, 5> X{}, Xphi{};
    for (std::size_t k = 0; k < 5; ++k) {
      const auto pt = charts[k]->invert(phi);
      X[k] = pt.x;
      Xphi[k] = pt.p / (m * charts[k]->omega());
    }
    const double x_E = first_derivative(X, hE);
    const double x_EE = second_derivative(X, hE);
    const double x_Ephi = first_derivative(Xphi, hE);
    const double x_phi = Xphi[2];
    const double x_phiphi = -pot.dU(X[2]) / (m * out.omega * out.omega);
    const double G1 = x_E * s(0, 0) + x_phi * s(1, 0);
    const double G2 = x_E * s(0, 1) + x_phi * s(1, 1);
    const double K = x_E / (2.0 * m) + x_phi * out.F / 2.0 +
                     0.5 * (x_EE * out.D(0, 0) + 2.0 * x_Ephi * out.D(0, 1) + x_phiphi * out.D(1, 1));
    g1 += G1 * G1;
    g2 += G2 * G2;
    ksum += K;
  }
  out.G1 = std::sqrt(g1 / options.angles);
  out.G2 = std::sqrt(g2 / options.angles);
  out.G = std::hypot(out.G1, out.G2);
  out.Kbar = ksum / options.angles;
  return out;
}

double nelson_noise_choice(const AveragedCoefficients& coeffs, double hbar, double m) {
  if (!(hbar > 0) || !(m > 0)) throw ParameterError("hbar and m must be positive");
  if (!(coeffs.G > 0)) throw ParameterError("degenerate noise: G(E) = 0");
  return std::sqrt(hbar / m) / coeffs.G;
}

SdeSystemd averaged_energy_angle_system(std::vector<AveragedCoefficients> table, double m,
                                        double eps7, const Eigen::Matrix2d& rotation) {
  if (table.empty()) throw ParameterError("coefficient table is empty");
  if (!(m > 0)) throw ParameterError("mass must be positive");
  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a.E < b.E; });
  for (auto& row : table) row.sigma = row.sigma * rotation;

  struct Local {
    double F;
    Eigen::Matrix2d sigma;
  };
  auto lookup = [table](double E) -> Local {
    if (E <= table.front().E) return {table.front().F, table.front().sigma};
    if (E >= table.back().E) return {table.back().F, table.back().sigma};
    const auto hi = std::lower_bound(table.begin(), table.end(), E,
                                     [](const auto& row, double e) { return row.E < e; });
    const auto lo = std::prev(hi);
    const double u = (E - lo->E) / (hi->E - lo->E);
    return {(1 - u) * lo->F + u * hi->F, (1 - u) * lo->sigma + u * hi->sigma};
  };

  SdeSystemd sys;
  sys.dimension = 2;
  sys.driving = IndependentWiener{2};
  const double e2 = eps7 * eps7;
  sys.drift = [lookup, e2, m](const SdeSystemd::State& s, double) {
    SdeSystemd::State f(2);
    f << e2 / (2.0 * m), e2 * lookup(s(0)).F / 2.0;
    return f;
  };
  sys.diffusion = [lookup, eps7](const SdeSystemd::State& s, double) {
    SdeSystemd::Matrix g = eps7 * lookup(s(0)).sigma;
    return g;
  };
  sys.model = "averaged_energy_angle";
  sys.parameters = {{"m", m}, {"eps7", eps7}};
  return sys;
}

}  // namespace nelson
