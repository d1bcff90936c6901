#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "ofotune/errors.hpp"
#include "ofotune/plant.hpp"
#include "ofotune/units.hpp"

namespace ofotune {

namespace {

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

double settling_at(CompressorParams params, double J, const PlantState& x,
                   double tau) {
  params.J = J;
  const Linearization lin = linearize(x, tau, params);
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(4);
  c(0) = 1.0;
  return settling_time(lin.A_jac, lin.B_jac, c);
}

}  // namespace

CalibrationResult calibrate(const CalibrationTargets& t) {
  const PlantState& x = t.state;
  if (!x.admissible() || !(x.m > 0.0) || !(t.tau > 0.0)) {
    throw CalibrationError(
        "target state needs positive pressures, mass flow, speed and torque");
  }
  if (!(x.ps < t.pin)) {
    throw CalibrationError(fmt::format(
        "suction inflow cannot carry m={} kg/s with ps={} Pa >= pin={} Pa", x.m,
        x.ps, t.pin));
  }
  if (!(x.pd > t.pout)) {
    throw CalibrationError(fmt::format(
        "discharge outflow cannot carry m={} kg/s with pd={} Pa <= pout={} Pa",
        x.m, x.pd, t.pout));
  }

  CompressorParams p;
  p.a01 = t.a01;
  p.Vs = t.Vs;
  p.Vd = t.Vd;
  p.A1 = t.A1;
  p.Lc = t.Lc;
  p.Ain = t.Ain;
  p.Aout = t.Aout;
  p.pin = t.pin;
  p.pout = t.pout;

  const double omega_m = x.omega * x.m;
  if (t.delta) {
    if (!close_rel(*t.delta * omega_m, t.tau, 1e-9)) {
      throw CalibrationError(fmt::format(
          "torque balance fails: delta*omega*m = {} Nm but tau = {} Nm",
          *t.delta * omega_m, t.tau));
    }
    p.delta = *t.delta;
  } else {
    p.delta = t.tau / omega_m;
  }

  const double root_in = std::sqrt(t.pin - x.ps);
  const double root_out = std::sqrt(x.pd - t.pout);
  p.kin = t.kin ? *t.kin : x.m / (0.4 * t.Ain * root_in);
  p.kout = t.kout ? *t.kout : x.m / (0.8 * t.Aout * root_out);
  const auto [m_in, m_out] = external_flows(x.ps, x.pd, p);
  if (!close_rel(m_in, x.m, 1e-9) || !close_rel(m_out, x.m, 1e-9)) {
    throw CalibrationError(fmt::format(
        "mass balance fails at target: m_in={} kg/s, m={} kg/s, m_out={} kg/s",
        m_in, x.m, m_out));
  }

  const double ratio = x.pd / x.ps;
  if (!(ratio > 1.0)) {
    throw CalibrationError(
        fmt::format("target pressure ratio {} is not above 1", ratio));
  }
  auto& c = p.map_coeffs;
  c[3] = t.c4;
  c[4] = t.c5;
  c[5] = t.c6;
  c[1] = t.map_slope_m - 2.0 * t.c4 * x.m - t.c5 * x.omega;
  c[2] = t.map_slope_omega - t.c5 * x.m - 2.0 * t.c6 * x.omega;
  c[0] = 0.0;
  c[0] = ratio - compressor_map(x.m, x.omega, p);

  CalibrationResult result;
  result.scaled_residual =
      derivatives(x, t.tau, p).cwiseQuotient(state_scale(x));
  if (!(result.scaled_residual.cwiseAbs().maxCoeff() < 1e-8)) {
    throw CalibrationError(fmt::format(
        "steady-state residual too large: {}",
        result.scaled_residual.cwiseAbs().maxCoeff()));
  }

  // Settling time grows with shaft inertia; bisect on log J.
  double lo = std::log(t.J_min);
  double hi = std::log(t.J_max);
  double s_lo = 0.0;
  double s_hi = 0.0;
  try {
    s_lo = settling_at(p, t.J_min, x, t.tau);
    s_hi = settling_at(p, t.J_max, x, t.tau);
  } catch (const Error& e) {
    throw CalibrationError(std::string("operating point unusable: ") + e.what());
  }
  if (!(s_lo <= t.settling_goal && t.settling_goal <= s_hi)) {
    throw CalibrationError(fmt::format(
        "settling goal {} s outside reachable range [{}, {}] s for J in [{}, {}]",
        t.settling_goal, s_lo, s_hi, t.J_min, t.J_max));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (settling_at(p, std::exp(mid), x, t.tau) < t.settling_goal) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  p.J = std::exp(0.5 * (lo + hi));
  result.settling_time = settling_at(p, p.J, x, t.tau);
  if (std::abs(result.settling_time - t.settling_goal) > t.settling_tolerance) {
    throw CalibrationError(fmt::format("settling time {} s misses goal {} s",
                                       result.settling_time, t.settling_goal));
  }
  p.validate();
  result.params = p;

  std::ostringstream os;
  os << "Calibration report\n";
  os << fmt::format("  target state: ps={:.6g} bar pd={:.6g} bar m={:.6g} kg/s "
                    "omega={:.6g} rad/s tau={:.6g} Nm\n",
                    pa_to_bar(x.ps), pa_to_bar(x.pd), x.m, x.omega, t.tau);
  os << fmt::format("  delta={:.8g} kin={:.8g} kout={:.8g} J={:.8g}\n", p.delta,
                    p.kin, p.kout, p.J);
  os << fmt::format("  map: c1={:.8g} c2={:.8g} c3={:.8g} c4={:.8g} c5={:.8g} "
                    "c6={:.8g}\n",
                    c[0], c[1], c[2], c[3], c[4], c[5]);
  os << "  scaled residual (dps, dpd, dm, domega):";
  for (int i = 0; i < 4; ++i) os << fmt::format(" {:.3e}", result.scaled_residual[i]);
  os << "\n";
  os << fmt::format("  settling time: {:.4f} s (goal {} s +/- {} s)\n",
                    result.settling_time, t.settling_goal, t.settling_tolerance);
  os << fmt::format("  sensitivity dh/dtau: {:.6g} Pa/Nm\n",
                    sensitivity(t.tau, x.m, x.pd, p));
  result.report = os.str();
  return result;
}

const CompressorParams& default_params() {
  static const CompressorParams params = calibrate(CalibrationTargets{}).params;
  return params;
}

PlantState default_initial_state() { return CalibrationTargets{}.state; }

double default_initial_torque() { return CalibrationTargets{}.tau; }

PlantState validation_initial_state() {
  return {bar_to_pa(0.91745), bar_to_pa(2.0), 80.0, 700.5};
}

}  // namespace ofotune
