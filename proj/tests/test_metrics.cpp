#include <doctest.h>

#include <cmath>
#include <vector>

#include "ofotune/metrics.hpp"

using namespace ofotune;

namespace {

Trace residual_trace(double t_end, double h, double (*r)(double)) {
  Trace tr;
  const auto n = static_cast<std::size_t>(std::llround(t_end / h));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = i == n ? t_end : static_cast<double>(i) * h;
    tr.push_back(t, PlantState{92500.0 + r(t), 1.8e5, 60.0, 650.0}, 0.0, 92500.0);
  }
  return tr;
}

}  // namespace

TEST_CASE("constant residual of 9000 Pa") {
  const Trace tr = residual_trace(200.0, 0.01, [](double) { return 9000.0; });
  CHECK(ise(tr, MetricConfig{}) == doctest::Approx(162.0).epsilon(1e-3));
  CHECK(oscillations(tr, MetricConfig{}) == 0);
}

TEST_CASE("sinusoidal residual") {
  MetricConfig mc;
  mc.t_final = 2.0 * M_PI;
  mc.deadband = 0.0;
  const Trace tr = residual_trace(2.0 * M_PI, 2.0 * M_PI / 10000, [](double t) { return std::sin(t); });
  CHECK(ise(tr, mc) == doctest::Approx(mc.gamma1 * M_PI).epsilon(1e-3));
  CHECK(oscillations(tr, mc) == 2);
}

TEST_CASE("oscillation hysteresis") {
  const std::vector<double> a{5.0, -5.0, 5.0};
  CHECK(oscillations(a, 10.0) == 0);
  CHECK(oscillations(a, 1.0) == 2);
  const std::vector<double> b{0.0, 20.0, 3.0, -9.0, 15.0, -10.0};
  CHECK(oscillations(b, 10.0) == 1);
  const std::vector<double> c{-20.0};
  CHECK(oscillations(c, 10.0) == 0);
  CHECK(oscillations(std::vector<double>{}, 10.0) == 0);
}

TEST_CASE("metrics ignore samples past the horizon") {
  const Trace tr = residual_trace(300.0, 0.01, [](double t) { return t <= 200.0 ? 9000.0 : -9000.0; });
  const MetricConfig mc;
  CHECK(ise(tr, mc) == doctest::Approx(162.0).epsilon(1e-3));
  CHECK(oscillations(tr, mc) == 0);
}

TEST_CASE("frozen-plant baselines") {
  const MetricConfig mc;
  CHECK(beta1_baseline(101500.0, setpoint_constant(), mc) == doctest::Approx(162.0).epsilon(1e-9));
  // (3500^2 * 75 + 8500^2 * 50 + 3500^2 * 25 + 6500^2 * 50) * 1e-8
  CHECK(beta1_baseline(101500.0, setpoint_step(), mc) == doctest::Approx(69.5).epsilon(1e-3));
}

TEST_CASE("metric configuration validation") {
  MetricConfig mc;
  mc.gamma1 = 0.0;
  CHECK_THROWS(mc.validate());
  mc = MetricConfig{};
  mc.deadband = -1.0;
  CHECK_THROWS(mc.validate());
}
