#include <doctest.h>

#include <cmath>
#include <random>

#include "ofotune/controller.hpp"
#include "ofotune/errors.hpp"

using namespace ofotune;

TEST_CASE("objective gradient agrees with central differences") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(0.8, 1.1);
  for (int i = 0; i < 50; ++i) {
    const double y = U(rng);
    const double ysp = U(rng);
    if (std::abs(y - ysp) < 1e-3) continue;
    const double h = 1e-4;
    const double fd = (objective(y + h, ysp) - objective(y - h, ysp)) / (2 * h);
    const ObjectiveGradient g = objective_gradient(y, ysp);
    CHECK(g.d_u == 0.0);
    CHECK(std::abs(g.d_y - fd) / std::abs(fd) < 1e-8);
  }
}

TEST_CASE("descent increment of a hand-computed case") {
  OfoConfig cfg;
  cfg.nu = 1.0;
  // sens = -2 Pa/Nm, y - ysp = 0.1 bar: -1 * (-2) * 0.02 * 0.1.
  CHECK(descent_direction(300.0, 1.0e5, 0.9e5, -2.0, cfg) == doctest::Approx(0.004));
  CHECK(descent_direction(300.0, 0.9e5, 0.9e5, -2.0, cfg) == 0.0);
}

TEST_CASE("gradient in Pa scales the increment by 1e5") {
  OfoConfig bar;
  OfoConfig pa;
  pa.gradient_unit = PressureUnit::kPascal;
  const double a = descent_direction(0.0, 1.01e5, 0.93e5, -331.0, bar);
  const double b = descent_direction(0.0, 1.01e5, 0.93e5, -331.0, pa);
  CHECK(b == doctest::Approx(1e5 * a));
}

TEST_CASE("QP with scalar G reduces to the nu update") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const SensitivityFn sens = [](double, const Measurement&) { return -331.0; };
  for (int i = 0; i < 50; ++i) {
    OfoConfig qp_cfg;
    qp_cfg.qp = QpConfig{};
    qp_cfg.qp->alpha = 0.1 + 10.0 * U(rng);
    qp_cfg.qp->G(0, 0) = 0.1 + 10.0 * U(rng);
    OfoConfig nu_cfg;
    nu_cfg.nu = qp_cfg.qp->alpha / qp_cfg.qp->G(0, 0);
    const Measurement meas{0.9e5 + 2e4 * U(rng), 1.8e5, 60.0};
    const ControllerState s{300.0, 3};
    const double ysp = 0.925e5;
    const ControllerState a = controller_step(s, meas, ysp, sens, qp_cfg);
    const ControllerState b = controller_step(s, meas, ysp, sens, nu_cfg);
    CHECK(a.u == doctest::Approx(b.u).epsilon(1e-12));
    CHECK(a.k == 4);
  }
}

TEST_CASE("controller output is saturated") {
  OfoConfig cfg;
  cfg.nu = 1e6;
  const SensitivityFn sens = [](double, const Measurement&) { return -331.0; };
  const ControllerState up = controller_step({500.0, 0}, {1.0e5, 1.8e5, 60.0}, 0.9e5, sens, cfg);
  CHECK(up.u == cfg.u_max);
  const ControllerState down =
      controller_step({500.0, 0}, {0.8e5, 1.8e5, 60.0}, 0.9e5, sens, cfg);
  CHECK(down.u == cfg.u_min);
  CHECK(saturate(-1000.0, cfg) == -300.0);
  CHECK(saturate(42.0, cfg) == 42.0);
}

TEST_CASE("non-finite measurements raise a numerical fault") {
  const SensitivityFn sens = [](double, const Measurement&) { return -1.0; };
  CHECK_THROWS_AS(controller_step({0.0, 0}, {std::nan(""), 1.8e5, 60.0}, 0.9e5, sens,
                                  OfoConfig{}),
                  NumericalFault);
}

TEST_CASE("controller configuration validation") {
  OfoConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = OfoConfig{};
  cfg.nu = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = OfoConfig{};
  cfg.u_min = cfg.u_max;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = OfoConfig{};
  cfg.qp = QpConfig{};
  cfg.qp->G(0, 0) = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(OfoConfig{}.validate());
}

TEST_CASE("pressure unit names") {
  CHECK(parse_pressure_unit("bar") == PressureUnit::kBar);
  CHECK(parse_pressure_unit("Pa") == PressureUnit::kPascal);
  CHECK(to_string(PressureUnit::kPascal) == "Pa");
  CHECK_THROWS_AS(parse_pressure_unit("psi"), ConfigError);
}
