#include "nelson/noise.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nelson/errors.hpp"

namespace nelson {

using std::numbers::pi;

NoiseSpectrum NoiseSpectrum::white(double level) {
  NoiseSpectrum s;
  s.kind = SpectrumKind::White;
  s.level = level;
  s.cutoff = std::numeric_limits<double>::infinity();
  s.validate();
  return s;
}

NoiseSpectrum NoiseSpectrum::power_law(double coefficient, double cutoff, double resolution) {
  NoiseSpectrum s;
  s.kind = SpectrumKind::PowerLaw;
  s.level = coefficient;
  s.cutoff = cutoff;
  s.resolution = resolution;
  s.validate();
  return s;
}

NoiseSpectrum NoiseSpectrum::tabulated(std::vector<std::pair<double, double>> table, double cutoff,
                                       double resolution) {
  NoiseSpectrum s;
  s.kind = SpectrumKind::Tabulated;
  s.table = std::move(table);
  s.cutoff = cutoff;
  s.resolution = resolution;
  s.validate();
  return s;
}

NoiseSpectrum NoiseSpectrum::nelson(double hbar, double m, double omega, double cutoff_factor,
                                    double resolution) {
  if (!(hbar > 0) || !(m > 0) || !(omega > 0))
    throw ParameterError("nelson spectrum needs positive hbar, m and omega");
  return power_law(4.0 * pi * hbar / m, cutoff_factor * omega, resolution);
}

double NoiseSpectrum::operator()(double omega) const {
  omega = std::abs(omega);
  if (omega > cutoff) return 0.0;
  switch (kind) {
    case SpectrumKind::White:
      return level;
    case SpectrumKind::PowerLaw:
      return level * omega * omega;
    case SpectrumKind::Tabulated: {
      if (table.empty() || omega < table.front().first || omega > table.back().first) return 0.0;
      auto hi = std::lower_bound(table.begin(), table.end(), omega,
                                 [](const auto& row, double w) { return row.first < w; });
      if (hi == table.begin()) return hi->second;
      auto lo = std::prev(hi);
      const double span = hi->first - lo->first;
      if (span <= 0) return hi->second;
      const double u = (omega - lo->first) / span;
      return (1 - u) * lo->second + u * hi->second;
    }
  }
  return 0.0;
}

void NoiseSpectrum::validate() const {
  if (!(level >= 0)) throw ParameterError("spectrum level must be non-negative");
  if (kind == SpectrumKind::White) return;
  if (!(resolution > 0)) throw ParameterError("spectrum resolution must be positive");
  if (!(cutoff > resolution)) throw ParameterError("spectrum cutoff must exceed resolution");
  if (kind == SpectrumKind::Tabulated) {
    if (table.size() < 2) throw ParameterError("tabulated spectrum needs at least two rows");
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (!(table[i].second >= 0)) throw ParameterError("tabulated spectrum has S < 0");
      if (i > 0 && !(table[i].first >= table[i - 1].first))
        throw ParameterError("tabulated spectrum frequencies must be sorted");
    }
  }
}

NoiseSpectrum NoiseSpectrum::scaled(double factor) const {
  if (!(factor >= 0)) throw ParameterError("spectrum scale factor must be non-negative");
  NoiseSpectrum s = *this;
  s.level *= factor;
  for (auto& row : s.table) row.second *= factor;
  return s;
}

NoiseSpectrum notched(const NoiseSpectrum& spectrum, double lo, double hi) {
  if (spectrum.kind == SpectrumKind::White)
    throw ParameterError("notched spectra need a finite cutoff");
  if (!(hi > lo)) throw ParameterError("notch needs lo < hi");
  std::vector<std::pair<double, double>> table;
  const auto count = static_cast<std::size_t>(std::ceil(spectrum.cutoff / spectrum.resolution));
  for (std::size_t k = 0; k <= count; ++k) {
    const double w = std::min(spectrum.cutoff, static_cast<double>(k) * spectrum.resolution);
    if (w >= lo && w <= hi) continue;
    table.emplace_back(w, spectrum(w));
  }
  // Zero knots at the edges keep linear interpolation out of the notch.
  table.emplace_back(lo, 0.0);
  table.emplace_back(hi, 0.0);
  std::sort(table.begin(), table.end());
  return NoiseSpectrum::tabulated(std::move(table), spectrum.cutoff, spectrum.resolution);
}

double spectral_variance(const NoiseSpectrum& spectrum) {
  switch (spectrum.kind) {
    case SpectrumKind::White:
      return std::numeric_limits<double>::infinity();
    case SpectrumKind::PowerLaw:
      return spectrum.level * std::pow(spectrum.cutoff, 3) / (3.0 * pi);
    case SpectrumKind::Tabulated: {
      double integral = 0.0;
      const auto& t = spectrum.table;
      for (std::size_t i = 1; i < t.size(); ++i) {
        const double a = std::min(t[i - 1].first, spectrum.cutoff);
        const double b = std::min(t[i].first, spectrum.cutoff);
        integral += 0.5 * (spectrum(a) + spectrum(b)) * (b - a);
      }
      return integral / pi;  // both signs of Omega, divided by 2 pi
    }
  }
  return 0.0;
}

Eigen::VectorXd sample_wiener_increments(double dt, std::size_t n, RandomStream& stream) {
  if (!(dt > 0)) throw ParameterError("wiener increments need dt > 0");
  if (n == 0) throw ParameterError("wiener increments need n >= 1");
  const double scale = std::sqrt(dt);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (auto& w : out) w = scale * stream.normal();
  return out;
}

SynthesisGrid synthesis_grid(const NoiseSpectrum& spectrum, double dt, std::size_t n) {
  const double needed = std::ceil(2.0 * pi / (spectrum.resolution * dt));
  std::size_t size = 2;
  while (static_cast<double>(size) < std::max(needed, static_cast<double>(n))) size *= 2;
  return {size, 2.0 * pi / (static_cast<double>(size) * dt)};
}

Eigen::VectorXd synthesize_colored_noise(const NoiseSpectrum& spectrum, double dt, std::size_t n,
                                         RandomStream& stream) {
  if (spectrum.kind == SpectrumKind::White)
    throw ParameterError("white spectra are sampled with sample_wiener_increments");
  spectrum.validate();
  if (!(dt > 0) || n == 0) throw ParameterError("colored noise needs dt > 0 and n >= 1");
  if (!(dt < pi / spectrum.cutoff))
    throw AliasingError("dt = " + std::to_string(dt) + " does not resolve cutoff " +
                        std::to_string(spectrum.cutoff) + " (need dt < pi / cutoff)");

  const auto grid = synthesis_grid(spectrum, dt, n);
  const auto size = grid.fft_size;
  std::vector<std::complex<double>> coefficients(size, {0.0, 0.0});
  const double norm = static_cast<double>(size);
  for (std::size_t k = 1; k < size / 2; ++k) {
    const double w = static_cast<double>(k) * grid.spacing;
    if (w > spectrum.cutoff) break;
    const double amplitude = std::sqrt(2.0 * spectrum(w) * grid.spacing / pi);
    const double phase = 2.0 * pi * stream.uniform();
    coefficients[k] = norm * std::polar(amplitude, phase);
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> series;
  fft.inv(series, coefficients);

  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) out[static_cast<Eigen::Index>(j)] = series[j].real();
  return out;
}

Periodogram estimate_spectrum(const Eigen::Ref<const Eigen::VectorXd>& path, double dt) {
  const auto n = static_cast<std::size_t>(path.size());
  if (n < 2) throw ParameterError("periodogram needs at least two samples");
  if (!(dt > 0)) throw ParameterError("periodogram needs dt > 0");

  std::vector<double> samples(path.data(), path.data() + n);
  std::vector<std::complex<double>> transform;
  Eigen::FFT<double> fft;
  fft.fwd(transform, samples);

  const std::size_t half = n / 2;
  Periodogram out;
  out.omega.resize(static_cast<Eigen::Index>(half));
  out.power.resize(static_cast<Eigen::Index>(half));
  const double scale = dt / static_cast<double>(n);
  for (std::size_t k = 1; k <= half; ++k) {
    const auto i = static_cast<Eigen::Index>(k - 1);
    out.omega[i] = 2.0 * pi * static_cast<double>(k) / (static_cast<double>(n) * dt);
    out.power[i] = scale * std::norm(transform[k]);
  }
  return out;
}

std::vector<std::pair<double, double>> read_spectrum_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open spectrum table " + path);
  std::vector<std::pair<double, double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double w = 0, s = 0;
    if (!(fields >> w >> s)) {
      if (line_no == 1) continue;  // header
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected two numbers");
    }
    rows.emplace_back(w, s);
  }
  return rows;
}

}  // namespace nelson
