#pragma once

// Online feedback optimization controller for suction-pressure tracking.
//
// Input u is the shaft torque [Nm], output y the suction pressure. Plant-side
// quantities (measurements, setpoints, sensitivities, output constraints) are
// SI. The tracking cost Phi = 0.01 (y - ysp)^2 is evaluated in
// `OfoConfig::gradient_unit`, bar by default.

#include <functional>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace ofotune {

enum class PressureUnit { kBar, kPascal };

PressureUnit parse_pressure_unit(std::string_view text);
std::string_view to_string(PressureUnit unit);

/// Data of the projected-gradient QP. Sizes: G p x p, A q x p, b q,
/// C l x n, d l. Output constraints are in Pa.
struct QpConfig {
  double alpha = 1.0;
  Eigen::MatrixXd G = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd A = Eigen::MatrixXd(0, 1);
  Eigen::VectorXd b = Eigen::VectorXd(0);
  Eigen::MatrixXd C = Eigen::MatrixXd(0, 1);
  Eigen::VectorXd d = Eigen::VectorXd(0);

  /// Throws ConfigError unless alpha > 0, G is symmetric positive definite
  /// and the constraint blocks agree in size.
  void validate() const;
};

struct OfoConfig {
  double nu = 0.1;   // alpha G^-1 of the reduced single-input update
  double dt = 50.0;  // sampling time [s]
  double u_min = -300.0;
  double u_max = 1000.0;
  PressureUnit gradient_unit = PressureUnit::kBar;
  std::optional<QpConfig> qp;

  void validate() const;
};

struct ControllerState {
  double u = 0.0;
  long k = 0;
};

/// Quantities measured at a controller event, SI.
struct Measurement {
  double ps = 0.0;
  double pd = 0.0;
  double m = 0.0;
};

/// dh/du at the current input and measurement [Pa/Nm].
using SensitivityFn = std::function<double(double u, const Measurement&)>;

/// Pressure converted to the unit the cost is written in.
double to_gradient_unit(double pressure_pa, PressureUnit unit);

double objective(double ps, double psd);

struct ObjectiveGradient {
  double d_u = 0.0;
  double d_y = 0.0;
};

ObjectiveGradient objective_gradient(double ps, double psd);

/// Reduced steepest-descent increment u+ - u = -nu (dPhi/du + sens dPhi/dy).
/// `y` and `ysp` are in Pa, `sens` in Pa/Nm.
double descent_direction(double u, double y, double ysp, double sens,
                         const OfoConfig& cfg);

/// Minimizer w of ||w + G^-1 H' grad||_G^2 subject to A (u + alpha w) <= b
/// and C (y + alpha sens w) <= d. `grad` stacks dPhi/du (p) and dPhi/dy (n);
/// `sens` is n x p.
Eigen::VectorXd qp_direction(const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& grad,
                             const Eigen::MatrixXd& sens, const QpConfig& qp);

double saturate(double u, const OfoConfig& cfg);

/// One controller execution: returns the input to hold until the next event.
ControllerState controller_step(const ControllerState& state,
                                const Measurement& meas, double ysp,
                                const SensitivityFn& sens,
                                const OfoConfig& cfg);

}  // namespace ofotune
