#include "ofotune/controller.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ofotune/errors.hpp"
#include "ofotune/qp.hpp"
#include "ofotune/units.hpp"

namespace ofotune {

PressureUnit parse_pressure_unit(std::string_view text) {
  if (text == "bar") return PressureUnit::kBar;
  if (text == "Pa" || text == "pa") return PressureUnit::kPascal;
  throw ConfigError(fmt::format("unknown pressure unit '{}'", text));
}

std::string_view to_string(PressureUnit unit) {
  return unit == PressureUnit::kBar ? "bar" : "Pa";
}

void QpConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("qp alpha must be positive");
  if (G.rows() != G.cols() || G.rows() == 0) {
    throw ConfigError("qp G must be a non-empty square matrix");
  }
  if (!G.isApprox(G.transpose(), 1e-12)) {
    throw ConfigError("qp G must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw ConfigError("qp G must be positive definite");
  }
  if (A.cols() != G.rows() || A.rows() != b.size()) {
    throw ConfigError("qp A/b sizes do not match G");
  }
  if (C.rows() != d.size()) throw ConfigError("qp C/d sizes do not match");
}

void OfoConfig::validate() const {
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw ConfigError(fmt::format("nu must be finite and >= 0, got {}", nu));
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ConfigError(fmt::format("dt must be positive, got {}", dt));
  }
  if (!(u_min < u_max)) {
    throw ConfigError(
        fmt::format("u_min ({}) must be below u_max ({})", u_min, u_max));
  }
  if (qp) {
    qp->validate();
    if (qp->G.rows() != 1 || qp->C.cols() != 1) {
      throw ConfigError("compressor controller has one input and one output");
    }
  }
}

double to_gradient_unit(double pressure_pa, PressureUnit unit) {
  return unit == PressureUnit::kBar ? pa_to_bar(pressure_pa) : pressure_pa;
}

double objective(double ps, double psd) {
  const double e = ps - psd;
  return 0.01 * e * e;
}

ObjectiveGradient objective_gradient(double ps, double psd) {
  return {0.0, 0.02 * (ps - psd)};
}

double descent_direction(double /*u*/, double y, double ysp, double sens,
                         const OfoConfig& cfg) {
  const ObjectiveGradient grad =
      objective_gradient(to_gradient_unit(y, cfg.gradient_unit),
                         to_gradient_unit(ysp, cfg.gradient_unit));
  return -cfg.nu * (grad.d_u + sens * grad.d_y);
}

Eigen::VectorXd qp_direction(const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& grad,
                             const Eigen::MatrixXd& sens, const QpConfig& qp) {
  const Eigen::Index p = u.size();
  const Eigen::Index n = y.size();
  if (grad.size() != p + n || sens.rows() != n || sens.cols() != p ||
      qp.G.rows() != p || qp.A.cols() != p || qp.C.cols() != n) {
    throw ConfigError("qp_direction: dimensions are inconsistent");
  }
  // ||w + s||_G^2 with G s = H' grad reduces to 1/2 w'Gw + (H' grad)' w.
  const Eigen::VectorXd linear =
      grad.head(p) + sens.transpose() * grad.tail(n);

  const Eigen::Index rows = qp.A.rows() + qp.C.rows();
  Eigen::MatrixXd M(rows, p);
  Eigen::VectorXd c(rows);
  M.topRows(qp.A.rows()) = qp.alpha * qp.A;
  c.head(qp.A.rows()) = qp.b - qp.A * u;
  M.bottomRows(qp.C.rows()) = qp.alpha * qp.C * sens;
  c.tail(qp.C.rows()) = qp.d - qp.C * y;
  return solve_qp(qp.G, linear, M, c).x;
}

double saturate(double u, const OfoConfig& cfg) {
  return std::max(cfg.u_min, std::min(cfg.u_max, u));
}

ControllerState controller_step(const ControllerState& state,
                                const Measurement& meas, double ysp,
                                const SensitivityFn& sens,
                                const OfoConfig& cfg) {
  if (!std::isfinite(meas.ps)) {
    throw NumericalFault("controller received a non-finite measurement");
  }
  const double s = sens(state.u, meas);
  double increment = 0.0;
  if (cfg.qp) {
    const ObjectiveGradient g =
        objective_gradient(to_gradient_unit(meas.ps, cfg.gradient_unit),
                           to_gradient_unit(ysp, cfg.gradient_unit));
    const Eigen::VectorXd w = qp_direction(
        Eigen::VectorXd::Constant(1, state.u),
        Eigen::VectorXd::Constant(1, meas.ps), Eigen::Vector2d(g.d_u, g.d_y),
        Eigen::MatrixXd::Constant(1, 1, s), *cfg.qp);
    increment = cfg.qp->alpha * w[0];
  } else {
    increment = descent_direction(state.u, meas.ps, ysp, s, cfg);
  }
  const double next = state.u + increment;
  if (!std::isfinite(next)) {
    throw NumericalFault("controller produced a non-finite input");
  }
  return {saturate(next, cfg), state.k + 1};
}

}  // namespace ofotune
