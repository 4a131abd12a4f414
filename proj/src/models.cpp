#include "nelson/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "nelson/errors.hpp"

namespace nelson {

using std::numbers::pi;

OscillatorParams OscillatorParams::nelson(double m, double omega, double hbar) {
  OscillatorParams p;
  p.m = m;
  p.omega = omega;
  p.hbar = hbar;
  p.eps = std::sqrt(2.0 * hbar / m);
  p.nelson_scaling = true;
  p.validate();
  return p;
}

OscillatorParams OscillatorParams::with_eps(double m, double omega, double eps) {
  OscillatorParams p;
  p.m = m;
  p.omega = omega;
  p.eps = eps;
  p.nelson_scaling = false;
  p.validate();
  return p;
}

void OscillatorParams::validate() const {
  if (!(m > 0)) throw ParameterError("mass must be positive");
  if (!(omega > 0)) throw ParameterError("omega must be positive");
  if (!(hbar > 0)) throw ParameterError("hbar must be positive");
  if (!(eps >= 0)) throw ParameterError("eps must be non-negative");
  if (nelson_scaling && std::abs(eps - std::sqrt(2.0 * hbar / m)) > 1e-15 * std::max(1.0, eps))
    throw ParameterError("nelson_scaling requires eps = sqrt(2 hbar / m)");
}

double OscillatorParams::period() const { return 2.0 * pi / omega; }

namespace potentials {

PotentialSpec harmonic(double m, double omega) {
  const double k = m * omega * omega;
  PotentialSpec pot;
  pot.U = [k](double x) { return 0.5 * k * x * x; };
  pot.dU = [k](double x) { return k * x; };
  pot.base_omega = omega;
  pot.name = "harmonic";
  return pot;
}

PotentialSpec quartic() {
  PotentialSpec pot;
  pot.U = [](double x) { return 0.25 * x * x * x * x; };
  pot.dU = [](double x) { return x * x * x; };
  pot.name = "quartic";
  return pot;
}

PotentialSpec pendulum_well() {
  PotentialSpec pot;
  pot.U = [](double x) { return 1.0 - std::cos(x); };
  pot.dU = [](double x) { return std::sin(x); };
  pot.domain = {-pi, pi};
  pot.name = "pendulum";
  return pot;
}

PotentialSpec free() {
  PotentialSpec pot;
  pot.U = [](double) { return 0.0; };
  pot.dU = [](double) { return 0.0; };
  pot.name = "free";
  return pot;
}

PotentialSpec perturbed_harmonic(double m, double omega, const PotentialSpec& pert, double eta) {
  const double k = m * omega * omega;
  PotentialSpec pot;
  pot.U = [k, eta, u = pert.U](double x) { return 0.5 * k * x * x + eta * u(x); };
  pot.dU = [k, eta, du = pert.dU](double x) { return k * x + eta * du(x); };
  pot.domain = pert.domain;
  pot.eta = eta;
  pot.base_omega = omega;
  pot.name = "harmonic+" + pert.name;
  return pot;
}

namespace {

/// Natural cubic spline; second derivatives from the tridiagonal system.
struct CubicSpline {
  std::vector<double> x, y, y2;

  CubicSpline(std::vector<double> xs, std::vector<double> ys) : x(std::move(xs)), y(std::move(ys)) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    a(0, 0) = a(n - 1, n - 1) = 1.0;
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
      const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
      a(i, i - 1) = h0 / 6;
      a(i, i) = (h0 + h1) / 3;
      a(i, i + 1) = h1 / 6;
      rhs(i) = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    const Eigen::VectorXd m = a.partialPivLu().solve(rhs);
    y2.assign(m.data(), m.data() + n);
  }

  std::size_t segment(double t) const {
    auto it = std::upper_bound(x.begin(), x.end(), t);
    const auto i = static_cast<std::size_t>(std::distance(x.begin(), it));
    return std::clamp<std::size_t>(i, 1, x.size() - 1) - 1;
  }

  double value(double t) const {
    const auto i = segment(t);
    const double h = x[i + 1] - x[i], a = (x[i + 1] - t) / h, b = (t - x[i]) / h;
    return a * y[i] + b * y[i + 1] + ((a * a * a - a) * y2[i] + (b * b * b - b) * y2[i + 1]) * h * h / 6;
  }

  double derivative(double t) const {
    const auto i = segment(t);
    const double h = x[i + 1] - x[i], a = (x[i + 1] - t) / h, b = (t - x[i]) / h;
    return (y[i + 1] - y[i]) / h - (3 * a * a - 1) / 6 * h * y2[i] + (3 * b * b - 1) / 6 * h * y2[i + 1];
  }
};

}  // namespace

PotentialSpec tabulated(std::vector<double> xs, std::vector<double> us) {
  if (xs.size() != us.size() || xs.size() < 4)
    throw ParameterError("tabulated potential needs at least four (x, U) rows");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw ParameterError("tabulated potential x must increase strictly");
  auto spline = std::make_shared<CubicSpline>(xs, us);
  PotentialSpec pot;
  pot.U = [spline](double x) { return spline->value(x); };
  pot.dU = [spline](double x) { return spline->derivative(x); };
  pot.domain = {xs.front(), xs.back()};
  pot.name = "tabulated";
  return pot;
}

PotentialSpec from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open potential table " + path);
  std::vector<double> xs, us;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double x = 0, u = 0;
    if (!(fields >> x >> u)) {
      if (line_no == 1) continue;
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected two numbers");
    }
    xs.push_back(x);
    us.push_back(u);
  }
  return tabulated(std::move(xs), std::move(us));
}

PotentialSpec by_name(const std::string& name, double m, double omega) {
  if (name == "harmonic") return harmonic(m, omega);
  if (name == "quartic") return quartic();
  if (name == "pendulum") return pendulum_well();
  if (name == "free") return free();
  if (name.rfind("table:", 0) == 0) return from_csv(name.substr(6));
  throw ParameterError("unknown potential '" + name + "'");
}

}  // namespace potentials

double derivative_mismatch(const PotentialSpec& pot, double step, std::size_t probes) {
  const Interval d = pot.domain;
  const double lo = std::max(d.lo, -10.0) + step, hi = std::min(d.hi, 10.0) - step;
  double worst = 0.0;
  for (std::size_t i = 0; i < probes; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(probes - 1);
    const double fd = (pot.U(x + step) - pot.U(x - step)) / (2 * step);
    worst = std::max(worst, std::abs(fd - pot.dU(x)));
  }
  return worst;
}

namespace {

// Probing the whole of a wide default domain wastes resolution; finite wells
// of interest sit well inside +-50.
Interval probe_range(const PotentialSpec& pot) {
  return {std::max(pot.domain.lo, -50.0), std::min(pot.domain.hi, 50.0)};
}

}  // namespace

bool has_single_well(const PotentialSpec& pot, std::size_t probes) {
  const Interval r = probe_range(pot);
  int changes = 0;
  int last = 0;
  for (std::size_t i = 0; i < probes; ++i) {
    const double x = r.lo + r.width() * static_cast<double>(i) / static_cast<double>(probes - 1);
    const double g = pot.dU(x);
    const int sign = g > 0 ? 1 : (g < 0 ? -1 : 0);
    if (sign == 0) continue;
    if (last != 0 && sign != last) {
      if (last > 0) return false;  // a maximum
      ++changes;
    }
    last = sign;
  }
  return changes == 1;
}

double well_minimum(const PotentialSpec& pot) {
  if (!has_single_well(pot)) throw DomainError("potential '" + pot.name + "' is not a single well");
  const Interval r = probe_range(pot);
  const std::size_t probes = 2001;
  double lo = r.lo, hi = r.hi;
  for (std::size_t i = 0; i + 1 < probes; ++i) {
    const double a = r.lo + r.width() * static_cast<double>(i) / static_cast<double>(probes - 1);
    const double b = r.lo + r.width() * static_cast<double>(i + 1) / static_cast<double>(probes - 1);
    if (pot.dU(a) <= 0 && pot.dU(b) >= 0) {
      lo = a;
      hi = b;
      break;
    }
  }
  if (pot.dU(lo) == 0) return lo;
  if (pot.dU(hi) == 0) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (pot.dU(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SdeSystemd harmonic_forced_system(const OscillatorParams& p) {
  p.validate();
  const double w2 = p.omega * p.omega, noise = p.velocity_noise();
  SdeSystemd sys;
  sys.dimension = 2;
  sys.drift = [w2](const SdeSystemd::State& s, double) {
    SdeSystemd::State f(2);
    f << s(1), -w2 * s(0);
    return f;
  };
  sys.diffusion = [noise](const SdeSystemd::State&, double) {
    SdeSystemd::Matrix g(2, 1);
    g << 0.0, noise;
    return g;
  };
  sys.driving = IndependentWiener{1};
  sys.linear_form = LinearOscillatorForm{p.omega, noise};
  sys.model = "harmonic";
  sys.parameters = {{"m", p.m}, {"omega", p.omega}, {"hbar", p.hbar}, {"eps", p.eps}};
  return sys;
}

NoiseSpectrum forcing_spectrum(const NoiseSpectrum& averaged_normalization) {
  return averaged_normalization.scaled(1.0 / (2.0 * pi));
}

SdeSystemd harmonic_colored_system(const OscillatorParams& p, const NoiseSpectrum& spectrum) {
  if (spectrum.kind == SpectrumKind::White)
    throw ParameterError("colored oscillator needs a PowerLaw or Tabulated spectrum");
  spectrum.validate();
  SdeSystemd sys = harmonic_forced_system(p);
  sys.diffusion = [](const SdeSystemd::State&, double) {
    SdeSystemd::Matrix g(2, 1);
    g << 0.0, 1.0;
    return g;
  };
  sys.driving = ExternalPath{forcing_spectrum(spectrum)};
  sys.linear_form = LinearOscillatorForm{p.omega, 0.0};
  sys.model = "harmonic_colored";
  sys.parameters["spectrum_level"] = spectrum.level;
  sys.parameters["spectrum_cutoff"] = spectrum.cutoff;
  sys.parameters["spectrum_resolution"] = spectrum.resolution;
  sys.parameters.erase("eps");
  return sys;
}

SdeSystemd perturbed_oscillator_system(const OscillatorParams& p, const PotentialSpec& pert,
                                       double warn_eta) {
  p.validate();
  if (!(pert.eta >= 0)) throw ParameterError("perturbation eta must be non-negative");
  const double w2 = p.omega * p.omega, scale = pert.eta / p.m;
  SdeSystemd sys = harmonic_forced_system(p);
  sys.drift = [w2, scale, du = pert.dU](const SdeSystemd::State& s, double) {
    SdeSystemd::State f(2);
    f << s(1), -w2 * s(0) - scale * du(s(0));
    return f;
  };
  if (pert.eta != 0.0) sys.linear_form.reset();
  if (pert.eta > warn_eta)
    sys.warnings.push_back("perturbation eta = " + std::to_string(pert.eta) +
                           " exceeds the small-perturbation threshold " + std::to_string(warn_eta));
  sys.model = "perturbed";
  sys.parameters["eta"] = pert.eta;
  return sys;
}

SdeSystemd general_potential_system(double m, const PotentialSpec& pot, double eps7) {
  if (!(m > 0)) throw ParameterError("mass must be positive");
  if (!(eps7 >= 0)) throw ParameterError("noise amplitude must be non-negative");
  if (!pot.U || !pot.dU) throw ParameterError("potential needs U and U'");
  SdeSystemd sys;
  sys.dimension = 2;
  sys.drift = [m, du = pot.dU](const SdeSystemd::State& s, double) {
    SdeSystemd::State f(2);
    f << s(1) / m, -du(s(0));
    return f;
  };
  sys.diffusion = [eps7](const SdeSystemd::State&, double) {
    SdeSystemd::Matrix g(2, 1);
    g << 0.0, eps7;
    return g;
  };
  sys.model = "general:" + pot.name;
  sys.parameters = {{"m", m}, {"eps7", eps7}};
  return sys;
}

SdeSystemd free_particle_system(double sigma) {
  if (!(sigma >= 0)) throw ParameterError("noise amplitude must be non-negative");
  SdeSystemd sys;
  sys.dimension = 2;
  sys.drift = [](const SdeSystemd::State& s, double) {
    SdeSystemd::State f(2);
    f << s(1), 0.0;
    return f;
  };
  sys.diffusion = [sigma](const SdeSystemd::State&, double) {
    SdeSystemd::Matrix g(2, 1);
    g << 0.0, sigma;
    return g;
  };
  sys.model = "free";
  sys.parameters = {{"sigma", sigma}};
  return sys;
}

double energy(double x, double v, const OscillatorParams& p) {
  return 0.5 * p.m * (v * v + p.omega * p.omega * x * x);
}

double energy(double x, double p, double m, const PotentialSpec& pot) {
  return p * p / (2.0 * m) + pot.U(x);
}

double classical_velocity(double x, double E0, double m, const PotentialSpec& pot, int branch) {
  if (branch != 1 && branch != -1) throw ParameterError("branch must be +1 or -1");
  const double kinetic = E0 - pot.U(x);
  if (kinetic < 0)
    throw DomainError("x = " + std::to_string(x) + " is classically forbidden at E0 = " +
                      std::to_string(E0));
  return branch * std::sqrt(2.0 / m * kinetic);
}

}  // namespace nelson
