#include "ofotune/simloop.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "ofotune/dopri5.hpp"
#include "ofotune/errors.hpp"
#include "ofotune/units.hpp"

namespace ofotune {

Setpoint setpoint_constant(double value_pa) {
  return [value_pa](double) { return value_pa; };
}

Setpoint setpoint_constant() { return setpoint_constant(bar_to_pa(0.925)); }

Setpoint setpoint_sine() {
  return [](double t) {
    return bar_to_pa(std::max(0.94, 0.95 + 0.05 * std::sin(0.04 * t)));
  };
}

Setpoint setpoint_step() {
  return [](double t) {
    if (t >= 75.0 && t <= 125.0) return bar_to_pa(0.93);
    if (t <= 150.0) return bar_to_pa(0.98);
    return bar_to_pa(0.95);
  };
}

Setpoint setpoint_table(std::vector<double> t, std::vector<double> value_pa) {
  if (t.empty() || t.size() != value_pa.size()) {
    throw ConfigError("setpoint table needs matching, non-empty columns");
  }
  if (!std::is_sorted(t.begin(), t.end(), std::less_equal<>())) {
    throw ConfigError("setpoint table times must be strictly increasing");
  }
  return [t = std::move(t), v = std::move(value_pa)](double time) {
    if (time <= t.front()) return v.front();
    if (time >= t.back()) return v.back();
    const auto hi = std::upper_bound(t.begin(), t.end(), time);
    const auto i = static_cast<std::size_t>(hi - t.begin());
    const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
    return v[i - 1] + w * (v[i] - v[i - 1]);
  };
}

Setpoint make_setpoint(std::string_view id) {
  if (id == "constant") return setpoint_constant();
  if (id == "sine") return setpoint_sine();
  if (id == "step") return setpoint_step();
  throw ConfigError(fmt::format("unknown setpoint '{}'", id));
}

void SimSpec::validate() const {
  if (!(t_final > 0.0) || !std::isfinite(t_final)) {
    throw ConfigError("t_final must be positive");
  }
  if (!(dt_out > 0.0) || dt_out > t_final) {
    throw ConfigError("dt_out must be in (0, t_final]");
  }
  if (!(rtol > 0.0) || !(atol > 0.0)) {
    throw ConfigError("integrator tolerances must be positive");
  }
  if (!initial.admissible()) {
    throw ConfigError("initial state needs ps, pd, omega > 0");
  }
  if (!std::isfinite(initial_torque)) {
    throw ConfigError("initial torque must be finite");
  }
}

void Trace::reserve(std::size_t n) {
  for (auto* v : {&t, &ps, &pd, &m, &omega, &u_applied, &ysp}) v->reserve(n);
}

void Trace::push_back(double time, const PlantState& x, double u, double sp) {
  t.push_back(time);
  ps.push_back(x.ps);
  pd.push_back(x.pd);
  m.push_back(x.m);
  omega.push_back(x.omega);
  u_applied.push_back(u);
  ysp.push_back(sp);
}

double output_spacing(const SimSpec& spec, const OfoConfig& cfg) {
  return std::min(spec.dt_out, cfg.dt);
}

Trace run_closed_loop(const SimSpec& spec, const OfoConfig& cfg,
                      const Setpoint& setpoint, const CompressorParams& params,
                      SimStats* stats) {
  spec.validate();
  cfg.validate();
  params.validate();
  if (std::floor(spec.t_final / cfg.dt * (1.0 + 1e-12)) < 1.0) {
    throw ConfigError("t_final must cover at least one sampling interval");
  }

  const double h_out = output_spacing(spec, cfg);
  const auto n_grid = static_cast<std::size_t>(
      std::floor(spec.t_final / h_out * (1.0 + 1e-12)));
  const double grid_tol = 1e-9 * h_out;
  const double event_tol = 1e-9 * cfg.dt;

  Trace trace;
  trace.reserve(n_grid + 1);
  std::size_t next = 0;
  auto grid_time = [h_out](std::size_t i) { return static_cast<double>(i) * h_out; };

  double u = saturate(spec.initial_torque, cfg);
  Dopri5Options<4> opts;
  opts.rtol = spec.rtol;
  opts.atol = spec.atol * state_scale(spec.initial);
  auto rhs = [&params, &u](double, const Vec<4>& x) {
    return derivatives(PlantState::from_vector(x), u, params);
  };
  Dopri5<4, decltype(rhs)> integrator(rhs, opts);

  const SensitivityFn sens = [&params](double tau, const Measurement& meas) {
    return sensitivity(tau, meas.m, meas.pd, params);
  };

  ControllerState ctrl{spec.initial_torque, 0};
  Vec<4> x = spec.initial.as_vector();
  double h_guess = 0.0;
  long events = 0;

  for (long k = 0;; ++k) {
    const double t_a = static_cast<double>(k) * cfg.dt;
    if (t_a >= spec.t_final - event_tol) break;
    const double t_b =
        std::min(static_cast<double>(k + 1) * cfg.dt, spec.t_final);
    const bool last = t_b >= spec.t_final - event_tol;

    const PlantState xs = PlantState::from_vector(x);
    try {
      ctrl = controller_step(ctrl, {xs.ps, xs.pd, xs.m}, setpoint(t_a), sens,
                             cfg);
    } catch (const Error& e) {
      throw SimulationFault(t_a, std::string("controller: ") + e.what());
    }
    u = ctrl.u;
    ++events;

    while (next <= n_grid && grid_time(next) <= t_a + grid_tol) {
      trace.push_back(grid_time(next), xs, u, setpoint(grid_time(next)));
      ++next;
    }

    double t_reached = t_a;
    try {
      x = integrator.integrate(
          t_a, last ? spec.t_final : t_b, x, h_guess,
          [&](const DenseStep<4>& step) {
            const PlantState end = PlantState::from_vector(step.r1 + step.r2);
            if (!end.admissible()) {
              throw SimulationFault(
                  step.t1(),
                  fmt::format("plant left admissible region (ps={}, pd={}, "
                              "omega={})",
                              end.ps, end.pd, end.omega));
            }
            while (next <= n_grid && grid_time(next) <= step.t1() &&
                   (last || grid_time(next) < t_b - grid_tol)) {
              const double tg = std::min(grid_time(next), step.t1());
              trace.push_back(grid_time(next),
                              PlantState::from_vector(step(tg)), u,
                              setpoint(grid_time(next)));
              ++next;
            }
            t_reached = step.t1();
          });
    } catch (const SimulationFault&) {
      throw;
    } catch (const Error& e) {
      throw SimulationFault(t_reached, e.what());
    }
    if (last) break;
  }
  // Grid points that round to t_final.
  while (next <= n_grid) {
    trace.push_back(grid_time(next), PlantState::from_vector(x), u,
                    setpoint(grid_time(next)));
    ++next;
  }

  if (stats) {
    stats->controller_events = events;
    stats->accepted_steps = integrator.stats().accepted;
    stats->rejected_steps = integrator.stats().rejected;
  }
  return trace;
}

void write_trace_csv(std::ostream& os, const Trace& tr) {
  os << "t,ps,pd,m,omega,u_applied,ysp\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << fmt::format("{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g}\n",
                      tr.t[i], tr.ps[i], tr.pd[i], tr.m[i], tr.omega[i],
                      tr.u_applied[i], tr.ysp[i]);
  }
}

}  // namespace ofotune
