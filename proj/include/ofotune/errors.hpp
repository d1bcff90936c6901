#pragma once

#include <stdexcept>
#include <string>

namespace ofotune {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A plant or controller evaluation produced a non-finite value.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

/// The compressor map evaluated to a non-positive pressure ratio.
class MapDomainError : public Error {
 public:
  using Error::Error;
};

/// A linearization has an eigenvalue with non-negative real part.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class QpInfeasible : public Error {
 public:
  using Error::Error;
};

class QpStalled : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The closed-loop run could not be completed. Carries the simulation time
/// at which it stopped.
class SimulationFault : public Error {
 public:
  SimulationFault(double time, const std::string& what)
      : Error("t=" + std::to_string(time) + " s: " + what), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace ofotune
