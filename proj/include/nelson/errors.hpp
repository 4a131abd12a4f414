#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nelson {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or model parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A point or energy outside the region where a quantity is defined
/// (classically forbidden region, energy below the well, off-orbit x).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Time step too coarse for the requested spectral cutoff.
class AliasingError : public Error {
 public:
  using Error::Error;
};

/// Requested time is not on the ensemble grid.
class GridError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IntegrationDiverged : public Error {
 public:
  IntegrationDiverged(std::size_t step, long trajectory = -1)
      : Error(message(step, trajectory)), step_(step), trajectory_(trajectory) {}

  std::size_t step() const { return step_; }
  /// -1 when raised from a single-path integration.
  long trajectory() const { return trajectory_; }

  IntegrationDiverged with_trajectory(long trajectory) const { return {step_, trajectory}; }

 private:
  static std::string message(std::size_t step, long trajectory) {
    std::string text = "integration diverged at step " + std::to_string(step);
    if (trajectory >= 0) text += " of trajectory " + std::to_string(trajectory);
    return text;
  }

  std::size_t step_;
  long trajectory_;
};

/// Configuration validation failure; names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace nelson
