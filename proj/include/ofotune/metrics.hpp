#pragma once

// Tracking performance of a closed-loop trace: scaled integrated squared
// error and the number of residual sign changes.

#include <span>

#include <json.hpp>

#include "ofotune/simloop.hpp"

namespace ofotune {

struct MetricConfig {
  double gamma1 = 1e-8;
  double deadband = 10.0;  // Pa
  double t_final = 200.0;

  void validate() const;
};

/// gamma1 * integral of (ps - ysp)^2 over [0, t_final], trapezoidal rule on
/// the trace grid. Residual in Pa.
double ise(const Trace& trace, const MetricConfig& cfg);

/// Trapezoidal integral of gamma1 * r^2 over samples (t, r) up to t_final.
double ise(std::span<const double> t, std::span<const double> residual,
           const MetricConfig& cfg);

/// Sign changes of the residual with hysteresis: the residual must have been
/// above +deadband (below -deadband) before reaching -deadband (+deadband)
/// counts as a crossing. The starting value never counts.
int oscillations(const Trace& trace, const MetricConfig& cfg);
int oscillations(std::span<const double> residual, double deadband);

/// Error of a plant frozen at ps0 against `setpoint`, on the grid
/// 0, dt_out, ..., t_final.
double beta1_baseline(double ps0, const Setpoint& setpoint,
                      const MetricConfig& cfg, double dt_out = 0.01);

struct Metrics {
  double epsilon = 0.0;
  int oscillations = 0;
  double beta1_baseline = 0.0;
};

void to_json(nlohmann::json& j, const Metrics& m);

}  // namespace ofotune
