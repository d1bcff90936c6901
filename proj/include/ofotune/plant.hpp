#pragma once

// Centrifugal compressor model: shaft, duct and plenum dynamics with
// valve-throttled boundary flows and a quadratic compressor map.
//
// All quantities are SI: Pa, kg/s, rad/s, Nm, s.

#include <array>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace ofotune {

struct CompressorParams {
  double a01 = 340.0;   // sonic velocity constant [m/s]
  double Vs = 20.0;     // suction volume [m^3]
  double Vd = 20.0;     // discharge volume [m^3]
  double A1 = 0.1;      // duct area [m^2]
  double Lc = 10.0;     // duct length [m]
  double J = 1.0;       // shaft inertia [kg m^2]
  double delta = 0.00729;
  double kin = 1.0;
  double kout = 1.0;
  double Ain = 1.0;     // [m^2]
  double Aout = 1.0;    // [m^2]
  double pin = 1.05e5;  // [Pa]
  double pout = 1.55e5; // [Pa]
  // Pi = c1 + c2 m + c3 w + c4 m^2 + c5 m w + c6 w^2
  std::array<double, 6> map_coeffs{2.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  /// Throws ConfigError when a constant is non-positive or pin >= pout.
  void validate() const;

  bool operator==(const CompressorParams&) const = default;
};

struct PlantState {
  double ps = 0.0;     // suction pressure [Pa]
  double pd = 0.0;     // discharge pressure [Pa]
  double m = 0.0;      // compressor mass flow [kg/s]
  double omega = 0.0;  // shaft speed [rad/s]

  Eigen::Vector4d as_vector() const { return {ps, pd, m, omega}; }
  static PlantState from_vector(const Eigen::Vector4d& x) {
    return {x[0], x[1], x[2], x[3]};
  }
  /// Positivity of pressures and shaft speed.
  bool admissible() const { return ps > 0.0 && pd > 0.0 && omega > 0.0; }

  bool operator==(const PlantState&) const = default;
};

/// Per-component magnitudes used for relative tolerances: max(|x_i|, 1).
Eigen::Vector4d state_scale(const PlantState& x);

struct Linearization {
  Eigen::Matrix4d A_jac;
  Eigen::Vector4d B_jac;
  PlantState operating_state;
  double operating_input = 0.0;
};

struct BoundaryFlows {
  double m_in = 0.0;
  double m_out = 0.0;
};

/// Time derivative (ps', pd', m', omega') of the compressor state under
/// shaft torque `tau`. Throws NumericalFault naming the first non-finite rate.
Eigen::Vector4d derivatives(const PlantState& state, double tau,
                            const CompressorParams& params);

BoundaryFlows external_flows(double ps, double pd,
                             const CompressorParams& params);

/// Pressure ratio of the quadratic compressor map.
double compressor_map(double m, double omega, const CompressorParams& params);

/// Steady-state suction pressure h(tau, m) = pd / Pi(m, tau / (delta m)).
/// Throws MapDomainError if the ratio is not positive.
double steady_state_map(double tau, double m, double pd,
                        const CompressorParams& params);

/// d h / d tau at fixed (m, pd), in Pa per Nm.
double sensitivity(double tau, double m, double pd,
                   const CompressorParams& params);

/// Equilibrium of the full dynamics for a constant torque. Picks the
/// stable branch with the largest mass flow. Throws NumericalFault if none.
PlantState steady_state(const CompressorParams& params, double tau);

/// Central finite-difference Jacobians with relative step 1e-6.
Linearization linearize(const PlantState& state, double tau,
                        const CompressorParams& params);

/// 5% settling time of the output y = c x of dx/dt = A x + b u after a unit
/// step in u from x = 0. Throws InstabilityError when A is not Hurwitz.
double settling_time(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     const Eigen::RowVectorXd& c, double band = 0.05);

/// Suction-pressure settling time of the plant linearized at the
/// equilibrium for `tau_op`.
double settling_time(const CompressorParams& params, double tau_op);

// ---------------------------------------------------------------------------
// Calibration

/// Steady operating point plus shape choices used to pin the unknown
/// geometry, valve gains and map coefficients.
struct CalibrationTargets {
  PlantState state{1.015e5, 1.868e5, 60.45, 647.2};
  double tau = 323.6;
  double pin = 1.05e5;
  double pout = 1.55e5;
  double settling_goal = 47.5;
  double settling_tolerance = 10.0;

  // Geometry kept fixed during calibration.
  double a01 = 340.0;
  double Vs = 20.0;
  double Vd = 20.0;
  double A1 = 0.1;
  double Lc = 10.0;
  double Ain = 1.0;
  double Aout = 1.0;

  // Map slopes at the operating point and its second-order coefficients.
  double map_slope_m = -0.002;
  double map_slope_omega = 0.003;
  double c4 = -1e-5;
  double c5 = 0.0;
  double c6 = 1.5e-6;

  // When set these are not fitted and must already be consistent.
  std::optional<double> delta;
  std::optional<double> kin;
  std::optional<double> kout;

  // Bracket for the inertia search [kg m^2].
  double J_min = 1e-2;
  double J_max = 1e4;
};

struct CalibrationResult {
  CompressorParams params;
  Eigen::Vector4d scaled_residual;  // derivatives / state scale at target
  double settling_time = 0.0;
  std::string report;
};

/// Throws CalibrationError when the targets cannot be met.
CalibrationResult calibrate(const CalibrationTargets& targets);

/// Calibrated parameters for the default targets (computed once).
const CompressorParams& default_params();

/// The default operating point and torque used by calibration.
PlantState default_initial_state();
double default_initial_torque();

/// Initial condition of the validation experiments.
PlantState validation_initial_state();

}  // namespace ofotune
