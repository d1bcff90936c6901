#include "ofotune/plant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "ofotune/errors.hpp"

namespace ofotune {

namespace {

constexpr std::array<const char*, 4> kRateNames{"dps/dt", "dpd/dt", "dm/dt",
                                                "domega/dt"};

double pi_domega(double m, double omega, const CompressorParams& p) {
  const auto& c = p.map_coeffs;
  return c[2] + c[4] * m + 2.0 * c[5] * omega;
}

bool hurwitz(const Eigen::MatrixXd& A) {
  const Eigen::VectorXcd eig = A.eigenvalues();
  return std::all_of(eig.begin(), eig.end(),
                     [](const std::complex<double>& l) { return l.real() < 0.0; });
}

}  // namespace

void CompressorParams::validate() const {
  const std::array<std::pair<const char*, double>, 12> positive{{
      {"a01", a01}, {"Vs", Vs}, {"Vd", Vd}, {"A1", A1}, {"Lc", Lc}, {"J", J},
      {"delta", delta}, {"kin", kin}, {"kout", kout}, {"Ain", Ain},
      {"Aout", Aout}, {"pin", pin}}};
  for (const auto& [name, value] : positive) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw ConfigError(fmt::format("plant parameter {} must be positive, got {}",
                                    name, value));
    }
  }
  if (!(pin < pout)) {
    throw ConfigError(fmt::format("pin ({}) must be below pout ({})", pin, pout));
  }
  for (double c : map_coeffs) {
    if (!std::isfinite(c)) throw ConfigError("map coefficient is not finite");
  }
}

Eigen::Vector4d state_scale(const PlantState& x) {
  return x.as_vector().cwiseAbs().cwiseMax(1.0);
}

BoundaryFlows external_flows(double ps, double pd, const CompressorParams& p) {
  return {0.4 * p.kin * p.Ain * std::sqrt(std::abs(p.pin - ps)),
          0.8 * p.kout * p.Aout * std::sqrt(std::abs(pd - p.pout))};
}

double compressor_map(double m, double omega, const CompressorParams& p) {
  const auto& c = p.map_coeffs;
  return c[0] + c[1] * m + c[2] * omega + c[3] * m * m + c[4] * m * omega +
         c[5] * omega * omega;
}

Eigen::Vector4d derivatives(const PlantState& x, double tau,
                            const CompressorParams& p) {
  const auto [m_in, m_out] = external_flows(x.ps, x.pd, p);
  const double a2 = p.a01 * p.a01;
  const double torque_c = p.delta * x.omega * x.m;
  const Eigen::Vector4d rate{
      a2 / p.Vs * (m_in - x.m),
      a2 / p.Vd * (x.m - m_out),
      p.A1 / p.Lc * (compressor_map(x.m, x.omega, p) * x.ps - x.pd),
      (tau - torque_c) / p.J,
  };
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(rate[i])) {
      throw NumericalFault(fmt::format(
          "{} is not finite (ps={}, pd={}, m={}, omega={}, tau={})",
          kRateNames[i], x.ps, x.pd, x.m, x.omega, tau));
    }
  }
  return rate;
}

double steady_state_map(double tau, double m, double pd,
                        const CompressorParams& p) {
  const double ratio = compressor_map(m, tau / (p.delta * m), p);
  if (!(ratio > 0.0)) {
    throw MapDomainError(fmt::format(
        "pressure ratio {} is not positive at m={}, tau={}", ratio, m, tau));
  }
  return pd / ratio;
}

double sensitivity(double tau, double m, double pd, const CompressorParams& p) {
  const double omega = tau / (p.delta * m);
  const double ratio = compressor_map(m, omega, p);
  if (!(ratio > 0.0)) {
    throw MapDomainError(fmt::format(
        "pressure ratio {} is not positive at m={}, tau={}", ratio, m, tau));
  }
  // h = pd / Pi(m, tau / (delta m)); tau only enters through omega.
  return -pd / (ratio * ratio) * pi_domega(m, omega, p) / (p.delta * m);
}

PlantState steady_state(const CompressorParams& p, double tau) {
  // On the branch ps < pin, pd > pout the flow balances give ps(m), pd(m)
  // in closed form; the duct equation leaves a scalar root in m.
  const double k_in = 0.4 * p.kin * p.Ain;
  const double k_out = 0.8 * p.kout * p.Aout;
  auto state_at = [&](double m) {
    PlantState x;
    x.m = m;
    x.ps = p.pin - (m / k_in) * (m / k_in);
    x.pd = p.pout + (m / k_out) * (m / k_out);
    x.omega = tau / (p.delta * m);
    return x;
  };
  auto balance = [&](double m) {
    const PlantState x = state_at(m);
    return compressor_map(m, x.omega, p) * x.ps - x.pd;
  };

  const double m_max = k_in * std::sqrt(p.pin);
  constexpr int kScan = 4000;
  std::vector<PlantState> roots;
  double m_prev = m_max * 1e-4;
  double g_prev = balance(m_prev);
  for (int i = 1; i <= kScan; ++i) {
    const double m_next = m_max * (1e-4 + (1.0 - 2e-4) * i / kScan);
    const double g_next = balance(m_next);
    if (std::isfinite(g_prev) && std::isfinite(g_next) &&
        (g_prev == 0.0 || (g_prev < 0.0) != (g_next < 0.0))) {
      boost::uintmax_t iters = 200;
      const auto [lo, hi] = boost::math::tools::toms748_solve(
          balance, m_prev, m_next, g_prev, g_next,
          boost::math::tools::eps_tolerance<double>(52), iters);
      roots.push_back(state_at(0.5 * (lo + hi)));
    }
    m_prev = m_next;
    g_prev = g_next;
  }

  std::optional<PlantState> best;
  for (const auto& x : roots) {
    if (!x.admissible()) continue;
    const Linearization lin = linearize(x, tau, p);
    if (!hurwitz(lin.A_jac)) continue;
    if (!best || x.m > best->m) best = x;
  }
  if (!best) {
    throw NumericalFault(
        fmt::format("no stable equilibrium found for tau={} Nm", tau));
  }
  return *best;
}

Linearization linearize(const PlantState& state, double tau,
                        const CompressorParams& p) {
  Linearization lin;
  lin.operating_state = state;
  lin.operating_input = tau;
  const Eigen::Vector4d x0 = state.as_vector();
  const Eigen::Vector4d scale = state_scale(state);
  for (int j = 0; j < 4; ++j) {
    const double h = 1e-6 * scale[j];
    Eigen::Vector4d xp = x0, xm = x0;
    xp[j] += h;
    xm[j] -= h;
    lin.A_jac.col(j) = (derivatives(PlantState::from_vector(xp), tau, p) -
                        derivatives(PlantState::from_vector(xm), tau, p)) /
                       (2.0 * h);
  }
  const double h = 1e-6 * std::max(std::abs(tau), 1.0);
  lin.B_jac = (derivatives(state, tau + h, p) - derivatives(state, tau - h, p)) /
              (2.0 * h);
  if (!lin.A_jac.allFinite() || !lin.B_jac.allFinite()) {
    throw NumericalFault("linearization produced a non-finite Jacobian entry");
  }
  return lin;
}

double settling_time(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     const Eigen::RowVectorXd& c, double band) {
  const Eigen::Index n = A.rows();
  const Eigen::VectorXcd eig = A.eigenvalues();
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& l : eig) {
    if (!(l.real() < 0.0)) {
      throw InstabilityError(fmt::format(
          "linearization has eigenvalue {}{:+}i", l.real(), l.imag()));
    }
    slowest = std::min(slowest, -l.real());
  }
  const double y_final = -(c * A.partialPivLu().solve(b))(0);
  if (!std::isfinite(y_final) || y_final == 0.0) {
    throw NumericalFault("step response has no finite non-zero final value");
  }

  // Exact zero-order-hold propagation of the unit step over 20 slowest time
  // constants, then the last exit from the band, refined linearly.
  constexpr int kSteps = 20000;
  const double horizon = 20.0 / slowest;
  const double h = horizon / kSteps;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = A * h;
  aug.topRightCorner(n, 1) = b * h;
  const Eigen::MatrixXd E = aug.exp();
  const Eigen::MatrixXd Phi = E.topLeftCorner(n, n);
  const Eigen::VectorXd Gamma = E.topRightCorner(n, 1);

  const double limit = band * std::abs(y_final);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  double excess_prev = std::abs(y_final) - limit;  // y(0) = 0
  double t_last = 0.0;
  for (int k = 1; k <= kSteps; ++k) {
    x = Phi * x + Gamma;
    const double excess = std::abs((c * x)(0) - y_final) - limit;
    if (excess_prev > 0.0 && excess <= 0.0) {
      t_last = h * (k - 1 + excess_prev / (excess_prev - excess));
    } else if (excess > 0.0) {
      t_last = horizon;  // still outside; overwritten when it re-enters
    }
    excess_prev = excess;
  }
  return t_last;
}

double settling_time(const CompressorParams& params, double tau_op) {
  const PlantState x = steady_state(params, tau_op);
  const Linearization lin = linearize(x, tau_op, params);
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(4);
  c(0) = 1.0;
  return settling_time(lin.A_jac, lin.B_jac, c);
}

}  // namespace ofotune
