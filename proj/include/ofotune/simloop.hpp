#pragma once

// Sampled-data closed loop: the controller runs at t = k dt, its output is
// held between executions and the plant is integrated in between.

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ofotune/controller.hpp"
#include "ofotune/plant.hpp"

namespace ofotune {

/// Suction-pressure setpoint trajectory, t [s] -> Pa.
using Setpoint = std::function<double(double)>;

Setpoint setpoint_constant(double value_pa);
/// 0.925 bar.
Setpoint setpoint_constant();
/// max{0.94, 0.95 + 0.05 sin(0.04 t)} bar.
Setpoint setpoint_sine();
/// 0.98 bar, 0.93 bar on [75, 125] s, 0.98 bar again up to 150 s, 0.95 bar
/// afterwards.
Setpoint setpoint_step();
/// Piecewise-linear interpolation of (t, value_pa) samples, held constant
/// outside the table. Times must be strictly increasing.
Setpoint setpoint_table(std::vector<double> t, std::vector<double> value_pa);
/// "constant", "sine" or "step".
Setpoint make_setpoint(std::string_view id);

struct SimSpec {
  double t_final = 200.0;
  double dt_out = 0.01;
  double rtol = 1e-6;
  double atol = 1e-8;  // relative to the magnitude of each initial state
  PlantState initial = default_initial_state();
  double initial_torque = default_initial_torque();

  void validate() const;
};

struct Trace {
  std::vector<double> t;
  std::vector<double> ps;
  std::vector<double> pd;
  std::vector<double> m;
  std::vector<double> omega;
  std::vector<double> u_applied;
  std::vector<double> ysp;

  std::size_t size() const { return t.size(); }
  void reserve(std::size_t n);
  void push_back(double time, const PlantState& x, double u, double sp);
};

struct SimStats {
  long controller_events = 0;
  long accepted_steps = 0;
  long rejected_steps = 0;
};

/// Output grid spacing: dt_out, refined to the sampling time when shorter.
double output_spacing(const SimSpec& spec, const OfoConfig& cfg);

/// Throws SimulationFault when the plant leaves ps, pd, omega > 0, the
/// integrator fails, or a controller evaluation fails.
Trace run_closed_loop(const SimSpec& spec, const OfoConfig& cfg,
                      const Setpoint& setpoint, const CompressorParams& params,
                      SimStats* stats = nullptr);

/// CSV with header t,ps,pd,m,omega,u_applied,ysp; 12 significant digits.
void write_trace_csv(std::ostream& os, const Trace& trace);

}  // namespace ofotune
