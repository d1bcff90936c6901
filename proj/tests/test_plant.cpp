#include <doctest.h>

#include <cmath>

#include "ofotune/errors.hpp"
#include "ofotune/plant.hpp"

using namespace ofotune;

namespace {

// Closed-form map evaluated independently of the library.
double ratio(const CompressorParams& p, double m, double w) {
  const auto& c = p.map_coeffs;
  return c[0] + c[1] * m + c[2] * w + c[3] * m * m + c[4] * m * w + c[5] * w * w;
}

double h_direct(const CompressorParams& p, double tau, double m, double pd) {
  return pd / ratio(p, m, tau / (p.delta * m));
}

}  // namespace

TEST_CASE("sensitivity agrees with central differences at 20 operating points") {
  const CompressorParams& p = default_params();
  for (int i = 0; i < 20; ++i) {
    const double tau = 250.0 + 10.0 * i;
    const double m = 50.0 + 1.25 * i;
    const double pd = 1.7e5 + 2e3 * (i % 7);
    const double step = 1e-4 * tau;
    const double fd =
        (h_direct(p, tau + step, m, pd) - h_direct(p, tau - step, m, pd)) / (2 * step);
    const double s = sensitivity(tau, m, pd, p);
    CAPTURE(i);
    CHECK(std::abs(s - fd) / std::abs(fd) < 1e-4);
  }
}

TEST_CASE("steady_state_map matches the closed form") {
  const CompressorParams& p = default_params();
  CHECK(steady_state_map(323.6, 60.45, 1.868e5, p) ==
        doctest::Approx(h_direct(p, 323.6, 60.45, 1.868e5)).epsilon(1e-14));
}

TEST_CASE("steady_state_map rejects a non-positive pressure ratio") {
  CompressorParams p = default_params();
  p.map_coeffs = {-1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(steady_state_map(300.0, 60.0, 1.8e5, p), MapDomainError);
}

TEST_CASE("derivatives vanish at the calibrated operating point") {
  const CompressorParams& p = default_params();
  const PlantState x = default_initial_state();
  const Eigen::Vector4d f = derivatives(x, p.delta * x.omega * x.m, p);
  const Eigen::Vector4d scale = state_scale(x);
  CHECK(f.cwiseQuotient(scale).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("derivatives follow the balance equations") {
  const CompressorParams& p = default_params();
  const PlantState x{0.95e5, 1.9e5, 62.0, 660.0};
  const double tau = 310.0;
  const Eigen::Vector4d f = derivatives(x, tau, p);
  const double m_in = 0.4 * p.kin * p.Ain * std::sqrt(std::abs(p.pin - x.ps));
  const double m_out = 0.8 * p.kout * p.Aout * std::sqrt(std::abs(x.pd - p.pout));
  CHECK(f[0] == doctest::Approx(p.a01 * p.a01 / p.Vs * (m_in - x.m)));
  CHECK(f[1] == doctest::Approx(p.a01 * p.a01 / p.Vd * (x.m - m_out)));
  CHECK(f[2] == doctest::Approx(p.A1 / p.Lc * (ratio(p, x.m, x.omega) * x.ps - x.pd)));
  CHECK(f[3] == doctest::Approx((tau - p.delta * x.omega * x.m) / p.J));
  const BoundaryFlows flows = external_flows(x.ps, x.pd, p);
  CHECK(flows.m_in == doctest::Approx(m_in));
  CHECK(flows.m_out == doctest::Approx(m_out));
}

TEST_CASE("derivatives report non-finite rates") {
  const PlantState x{std::nan(""), 1.9e5, 62.0, 660.0};
  CHECK_THROWS_AS(derivatives(x, 300.0, default_params()), NumericalFault);
}

TEST_CASE("steady_state recovers the operating point of the default torque") {
  const CompressorParams& p = default_params();
  const PlantState x = steady_state(p, default_initial_torque());
  const PlantState target = default_initial_state();
  CHECK(x.ps == doctest::Approx(target.ps).epsilon(1e-6));
  CHECK(x.pd == doctest::Approx(target.pd).epsilon(1e-6));
  CHECK(x.m == doctest::Approx(target.m).epsilon(1e-6));
  CHECK(x.omega == doctest::Approx(target.omega).epsilon(1e-6));
}

TEST_CASE("linearize gives the torque input column") {
  const CompressorParams& p = default_params();
  const PlantState x = default_initial_state();
  const Linearization lin = linearize(x, default_initial_torque(), p);
  CHECK(lin.B_jac[3] == doctest::Approx(1.0 / p.J).epsilon(1e-6));
  CHECK(std::abs(lin.B_jac[0]) < 1e-9);
  CHECK(lin.A_jac(3, 3) == doctest::Approx(-p.delta * x.m / p.J).epsilon(1e-5));
}

TEST_CASE("settling time of a first-order lag") {
  for (double T : {0.5, 3.0, 20.0}) {
    Eigen::MatrixXd A(1, 1);
    A(0, 0) = -1.0 / T;
    Eigen::VectorXd b(1);
    b[0] = 1.0 / T;
    Eigen::RowVectorXd c(1);
    c[0] = 1.0;
    const double expected = -T * std::log(0.05);
    CHECK(settling_time(A, b, c) == doctest::Approx(expected).epsilon(0.01));
  }
}

TEST_CASE("settling time of an unstable system throws") {
  Eigen::MatrixXd A(1, 1);
  A(0, 0) = 0.1;
  Eigen::VectorXd b = Eigen::VectorXd::Ones(1);
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Ones(1);
  CHECK_THROWS_AS(settling_time(A, b, c), InstabilityError);
}

TEST_CASE("calibrated plant settles near the target") {
  const double ts = settling_time(default_params(), default_initial_torque());
  CHECK(ts == doctest::Approx(47.5).epsilon(10.0 / 47.5));
}

TEST_CASE("calibration reproduces the friction constant from the operating point") {
  const CalibrationResult r = calibrate(CalibrationTargets{});
  const PlantState x = CalibrationTargets{}.state;
  CHECK(r.params.delta == doctest::Approx(323.6 / (x.omega * x.m)).epsilon(1e-12));
  CHECK(compressor_map(x.m, x.omega, r.params) ==
        doctest::Approx(x.pd / x.ps).epsilon(1e-10));
  CHECK(r.scaled_residual.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(r.params == default_params());
}

TEST_CASE("calibration rejects inconsistent fixed valve gains") {
  CalibrationTargets t;
  t.kin = 1.0;
  CHECK_THROWS_AS(calibrate(t), CalibrationError);
}

TEST_CASE("calibration rejects a suction pressure above the inlet pressure") {
  CalibrationTargets t;
  t.state.ps = 1.2e5;
  CHECK_THROWS_AS(calibrate(t), CalibrationError);
}

TEST_CASE("parameter validation") {
  CompressorParams p = default_params();
  p.pin = 2e5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = default_params();
  p.J = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("validation initial state") {
  const PlantState x = validation_initial_state();
  CHECK(x.ps == doctest::Approx(91745.0));
  CHECK(x.pd == doctest::Approx(2e5));
  CHECK(x.m == doctest::Approx(80.0));
  CHECK(x.omega == doctest::Approx(700.5));
}
