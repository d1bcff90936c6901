#include "ofotune/metrics.hpp"

#include <cmath>
#include <vector>

#include <json.hpp>

#include "ofotune/errors.hpp"

namespace ofotune {

void MetricConfig::validate() const {
  if (!(gamma1 > 0.0)) throw ConfigError("gamma1 must be positive");
  if (!(deadband >= 0.0)) throw ConfigError("deadband must be >= 0");
  if (!(t_final > 0.0)) throw ConfigError("metric t_final must be positive");
}

double ise(std::span<const double> t, std::span<const double> r,
           const MetricConfig& cfg) {
  const double t_end = cfg.t_final * (1.0 + 1e-12);
  double sum = 0.0;
  for (std::size_t i = 1; i < t.size() && t[i] <= t_end; ++i) {
    sum += 0.5 * (t[i] - t[i - 1]) * (r[i] * r[i] + r[i - 1] * r[i - 1]);
  }
  return cfg.gamma1 * sum;
}

namespace {

std::vector<double> residual(const Trace& tr) {
  std::vector<double> r(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) r[i] = tr.ps[i] - tr.ysp[i];
  return r;
}

}  // namespace

double ise(const Trace& trace, const MetricConfig& cfg) {
  const std::vector<double> r = residual(trace);
  return ise(trace.t, r, cfg);
}

int oscillations(std::span<const double> r, double deadband) {
  int side = 0;  // +1 above, -1 below, 0 not yet determined
  int count = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double v = r[i];
    if (side == 0) {
      if (v > deadband) side = 1;
      else if (v < -deadband) side = -1;
    } else if (side > 0 && v <= -deadband && i > 0) {
      ++count;
      side = -1;
    } else if (side < 0 && v >= deadband && i > 0) {
      ++count;
      side = 1;
    }
  }
  return count;
}

int oscillations(const Trace& trace, const MetricConfig& cfg) {
  std::vector<double> r = residual(trace);
  std::size_t n = 0;
  while (n < trace.size() && trace.t[n] <= cfg.t_final * (1.0 + 1e-12)) ++n;
  r.resize(n);
  return oscillations(r, cfg.deadband);
}

double beta1_baseline(double ps0, const Setpoint& setpoint,
                      const MetricConfig& cfg, double dt_out) {
  const auto n = static_cast<std::size_t>(
      std::floor(cfg.t_final / dt_out * (1.0 + 1e-12)));
  std::vector<double> t(n + 1), r(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    t[i] = static_cast<double>(i) * dt_out;
    r[i] = ps0 - setpoint(t[i]);
  }
  return ise(t, r, cfg);
}

void to_json(nlohmann::json& j, const Metrics& m) {
  j = nlohmann::json{{"epsilon", m.epsilon},
                     {"oscillations", m.oscillations},
                     {"beta1_baseline", m.beta1_baseline}};
}

}  // namespace ofotune
