#include "ofotune/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ofotune/config.hpp"
#include "ofotune/errors.hpp"
#include "ofotune/parallel.hpp"
#include "ofotune/tuner.hpp"
#include "ofotune/units.hpp"

namespace ofotune {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string params_file;
  std::string config_file;
  std::string out_dir = "out";
  int jobs = 1;
};

// Flags that shadow the config file when given.
struct Overrides {
  std::optional<double> nu;
  std::optional<double> dt;
  std::optional<double> t_final;
  std::optional<double> u_min;
  std::optional<double> u_max;
  std::optional<std::string> gradient_unit;
};

struct Loaded {
  CompressorParams params;
  RunSettings settings;
};

Loaded load(const CommonOptions& common, const Overrides& ov) {
  Loaded l;
  l.params = default_params();
  if (!common.params_file.empty()) {
    l.params = params_from_json(read_json_file(common.params_file), l.params);
  }
  if (!common.config_file.empty()) {
    apply_config(read_json_file(common.config_file), l.settings);
  }
  if (ov.nu) l.settings.ofo.nu = *ov.nu;
  if (ov.dt) l.settings.ofo.dt = *ov.dt;
  if (ov.t_final) l.settings.sim.t_final = *ov.t_final;
  if (ov.u_min) l.settings.ofo.u_min = *ov.u_min;
  if (ov.u_max) l.settings.ofo.u_max = *ov.u_max;
  if (ov.gradient_unit) {
    l.settings.ofo.gradient_unit = parse_pressure_unit(*ov.gradient_unit);
  }
  l.settings.metrics.t_final = l.settings.sim.t_final;
  l.settings.ofo.validate();
  l.settings.sim.validate();
  l.settings.metrics.validate();
  if (common.jobs < 1) throw ConfigError("--jobs must be at least 1");
  return l;
}

fs::path prepare_out(const CommonOptions& common) {
  const fs::path dir(common.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError(fmt::format("cannot create output directory '{}'",
                                  common.out_dir));
  }
  return dir;
}

TuneSpec tune_spec(const Loaded& l, const CommonOptions& common,
                   const std::string& setpoint) {
  TuneSpec spec;
  spec.setpoint = setpoint;
  spec.sim = l.settings.sim;
  spec.params = l.params;
  spec.base = l.settings.ofo;
  spec.metrics = l.settings.metrics;
  spec.dt_bounds = {5e-3, spec.sim.t_final / 2.0};
  spec.jobs = common.jobs;
  make_setpoint(setpoint);  // rejects unknown ids early
  return spec;
}

std::string fmt_num(double v) { return fmt::format("{:.6g}", v); }

// ---------------------------------------------------------------------------

struct SimulateOptions {
  Overrides ov;
  std::string setpoint = "constant";
  std::string setpoint_file;
  std::string initial = "calibrated";
};

int cmd_simulate(const CommonOptions& common, const SimulateOptions& o,
                 std::ostream& out) {
  Loaded l = load(common, o.ov);
  if (o.initial == "validation") {
    l.settings.sim.initial = validation_initial_state();
    const auto& x = l.settings.sim.initial;
    l.settings.sim.initial_torque = l.params.delta * x.omega * x.m;
  } else if (o.initial != "calibrated") {
    throw ConfigError(fmt::format("unknown initial condition '{}'", o.initial));
  }
  Setpoint sp;
  if (o.setpoint == "file") {
    if (o.setpoint_file.empty()) {
      throw ConfigError("--setpoint file requires --setpoint-file");
    }
    sp = load_setpoint_csv(o.setpoint_file);
  } else {
    sp = make_setpoint(o.setpoint);
  }
  const fs::path dir = prepare_out(common);

  const Trace trace =
      run_closed_loop(l.settings.sim, l.settings.ofo, sp, l.params);
  Metrics m;
  m.epsilon = ise(trace, l.settings.metrics);
  m.oscillations = oscillations(trace, l.settings.metrics);
  m.beta1_baseline = beta1_baseline(l.settings.sim.initial.ps, sp,
                                    l.settings.metrics, l.settings.sim.dt_out);

  std::ostringstream csv;
  write_trace_csv(csv, trace);
  write_text_file(dir / "trace.csv", csv.str());
  write_text_file(dir / "metrics.json", nlohmann::json(m).dump(2) + "\n");
  out << fmt::format("epsilon={} oscillations={} beta1_baseline={}\n",
                     fmt_num(m.epsilon), m.oscillations,
                     fmt_num(m.beta1_baseline));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepOptions {
  Overrides ov;
  std::vector<double> nu_values{0.001, 0.1, 1.0, 10.0, 1000.0};
  std::vector<double> dt_values{0.005, 0.05, 0.5, 5.0, 50.0};
  std::string setpoint = "constant";
};

int cmd_sweep(const CommonOptions& common, const SweepOptions& o,
              std::ostream& out) {
  const Loaded l = load(common, o.ov);
  const TuneSpec spec = tune_spec(l, common, o.setpoint);
  if (o.nu_values.empty() || o.dt_values.empty()) {
    throw ConfigError("sweep grid must not be empty");
  }
  const auto cells = sweep(o.nu_values, o.dt_values, spec);
  const fs::path dir = prepare_out(common);
  std::ostringstream csv;
  write_sweep_csv(csv, cells);
  write_text_file(dir / "sweep.csv", csv.str());
  const auto faults = std::count_if(cells.begin(), cells.end(),
                                    [](const SweepCell& c) { return !c.eval.completed; });
  out << fmt::format("{} cells written ({} faulted)\n", cells.size(), faults);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TuneOptions {
  Overrides ov;
  std::vector<std::string> betas;
  std::string setpoint = "constant";
  int budget = 100;
  double nu0 = 0.1;
  double dt0 = 50.0;
};

std::pair<double, double> parse_pair(const std::string& text,
                                     const std::string& what) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(text);
    std::size_t used1 = 0, used2 = 0;
    const std::string a = text.substr(0, comma);
    const std::string b = text.substr(comma + 1);
    const double first = std::stod(a, &used1);
    const double second = std::stod(b, &used2);
    if (used1 != a.size() || used2 != b.size()) throw std::invalid_argument(text);
    return {first, second};
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{} must look like 'x,y', got '{}'", what, text));
  }
}

int cmd_tune(const CommonOptions& common, const TuneOptions& o,
             std::ostream& out) {
  if (o.betas.empty()) throw ConfigError("tune needs at least one --beta pair");
  std::vector<std::pair<double, double>> schedule;
  for (const auto& b : o.betas) schedule.push_back(parse_pair(b, "--beta"));

  const Loaded l = load(common, o.ov);
  TuneSpec spec = tune_spec(l, common, o.setpoint);
  spec.budget = o.budget;
  spec.nu0 = o.nu0;
  spec.dt0 = o.dt0;
  spec.validate();
  const fs::path dir = prepare_out(common);

  std::ostringstream csv;
  std::ostringstream txt;
  csv << "beta1,beta2,nu,dt,epsilon,oscillations,feasible\n";
  txt << fmt::format("{:>8} {:>8} {:>10} {:>10} {:>10} {:>5} {:>8}\n", "beta1",
                     "beta2", "nu", "dt [s]", "epsilon", "|F|", "feasible");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    spec.beta1 = schedule[i].first;
    spec.beta2 = schedule[i].second;
    const TuneResult r = tune(spec);
    write_text_file(dir / fmt::format("tune_{}.json", i + 1),
                    nlohmann::json(r).dump(2) + "\n");
    csv << fmt::format("{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{},{}\n", r.beta1,
                       r.beta2, r.nu_star, r.dt_star, r.epsilon_star,
                       r.oscillations_star, r.feasible ? "true" : "false");
    txt << fmt::format("{:>8} {:>8} {:>10} {:>10} {:>10} {:>5} {:>8}\n",
                       fmt_num(r.beta1), fmt_num(r.beta2), fmt_num(r.nu_star),
                       fmt_num(r.dt_star), fmt_num(r.epsilon_star),
                       r.oscillations_star, r.feasible ? "yes" : "no");
  }
  write_text_file(dir / "tune_summary.csv", csv.str());
  write_text_file(dir / "tune_summary.txt", txt.str());
  out << txt.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ValidateOptions {
  Overrides ov;
  std::vector<std::string> sets;
  std::string trajectories = "step,sine";
};

struct ParameterSet {
  std::string name;
  double nu = 0.0;
  double dt = 0.0;
};

ParameterSet parse_set(const std::string& text) {
  const auto first = text.find(':');
  const auto second = text.find(':', first == std::string::npos ? 0 : first + 1);
  if (first == std::string::npos || second == std::string::npos || first == 0) {
    throw ConfigError(fmt::format("--set must look like NAME:NU:DT, got '{}'", text));
  }
  const auto values =
      parse_pair(text.substr(first + 1, second - first - 1) + "," +
                     text.substr(second + 1),
                 "--set");
  return {text.substr(0, first), values.first, values.second};
}

int cmd_validate(const CommonOptions& common, const ValidateOptions& o,
                 std::ostream& out) {
  std::vector<ParameterSet> sets;
  std::set<std::string> names;
  for (const auto& s : o.sets) {
    sets.push_back(parse_set(s));
    if (!names.insert(sets.back().name).second) {
      throw ConfigError(fmt::format("duplicate set name '{}'", sets.back().name));
    }
  }
  if (sets.empty()) throw ConfigError("validate needs at least one --set");
  std::vector<std::string> trajectories;
  std::stringstream ss(o.trajectories);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    make_setpoint(item);
    if (std::find(trajectories.begin(), trajectories.end(), item) !=
        trajectories.end()) {
      throw ConfigError(fmt::format("duplicate trajectory '{}'", item));
    }
    trajectories.push_back(item);
  }
  if (trajectories.empty()) {
    throw ConfigError("validate needs at least one trajectory");
  }

  const Loaded l = load(common, o.ov);
  SimSpec sim = l.settings.sim;
  sim.initial = validation_initial_state();
  sim.initial_torque = l.params.delta * sim.initial.omega * sim.initial.m;
  for (const auto& s : sets) {
    OfoConfig cfg = l.settings.ofo;
    cfg.nu = s.nu;
    cfg.dt = s.dt;
    cfg.validate();
  }
  const fs::path dir = prepare_out(common);

  const std::size_t n_traj = trajectories.size();
  std::vector<Evaluation> results(sets.size() * n_traj);
  parallel_for(results.size(), common.jobs, [&](std::size_t i) {
    TuneSpec spec;
    spec.setpoint = trajectories[i % n_traj];
    spec.sim = sim;
    spec.params = l.params;
    spec.base = l.settings.ofo;
    spec.metrics = l.settings.metrics;
    const ParameterSet& s = sets[i / n_traj];
    results[i] = evaluate(s.nu, s.dt, spec);
  });

  std::ostringstream csv;
  std::ostringstream txt;
  csv << "set,nu,dt";
  txt << fmt::format("{:<10} {:>10} {:>10}", "set", "nu", "dt [s]");
  for (const auto& t : trajectories) {
    csv << "," << t;
    txt << fmt::format(" {:>12}", t);
  }
  csv << "\n";
  txt << "\n";
  bool faulted = false;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    csv << fmt::format("{},{:.12g},{:.12g}", sets[s].name, sets[s].nu, sets[s].dt);
    txt << fmt::format("{:<10} {:>10} {:>10}", sets[s].name, fmt_num(sets[s].nu),
                       fmt_num(sets[s].dt));
    for (std::size_t t = 0; t < n_traj; ++t) {
      const Evaluation& e = results[s * n_traj + t];
      faulted = faulted || !e.completed;
      csv << (e.completed ? fmt::format(",{:.12g}", e.epsilon) : ",fault");
      txt << fmt::format(" {:>12}", e.completed ? fmt_num(e.epsilon) : "fault");
    }
    csv << "\n";
    txt << "\n";
  }
  write_text_file(dir / "validation.csv", csv.str());
  write_text_file(dir / "validation.txt", txt.str());
  out << txt.str();
  return faulted ? kExitSimulation : kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const CommonOptions& common, const std::string& targets_file,
                  std::ostream& out) {
  CalibrationTargets targets;
  if (!targets_file.empty()) targets = targets_from_json(read_json_file(targets_file));
  CalibrationResult result;
  try {
    result = calibrate(targets);
  } catch (const CalibrationError& e) {
    throw ConfigError(std::string("calibration failed: ") + e.what());
  }
  const fs::path dir = prepare_out(common);
  write_text_file(dir / "params.json", params_to_json(result.params).dump(2) + "\n");
  write_text_file(dir / "calibration_report.txt", result.report);
  out << result.report;
  return kExitOk;
}

void add_overrides(CLI::App* cmd, Overrides& ov, bool controller_flags) {
  if (controller_flags) {
    cmd->add_option("--nu", ov.nu, "Step-size product nu");
    cmd->add_option("--dt", ov.dt, "Sampling time [s]");
  }
  cmd->add_option("--t-final", ov.t_final, "Horizon [s]");
  cmd->add_option("--u-min", ov.u_min, "Lower torque bound [Nm]");
  cmd->add_option("--u-max", ov.u_max, "Upper torque bound [Nm]");
  cmd->add_option("--gradient-unit", ov.gradient_unit,
                  "Pressure unit of the cost gradient (bar|Pa)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Closed-loop simulation and tuning of online feedback "
               "optimization for compressor suction-pressure control"};
  app.require_subcommand(1);
  CommonOptions common;
  auto add_common = [&common](CLI::App* cmd) {
    cmd->add_option("--params", common.params_file, "Plant parameter file (JSON)");
    cmd->add_option("--config", common.config_file, "Run configuration file (JSON)");
    cmd->add_option("--out", common.out_dir, "Output directory");
    cmd->add_option("--jobs", common.jobs, "Concurrent simulations");
  };

  SimulateOptions sim_opts;
  auto* simulate = app.add_subcommand("simulate", "Run one closed-loop simulation");
  add_common(simulate);
  add_overrides(simulate, sim_opts.ov, true);
  simulate->add_option("--setpoint", sim_opts.setpoint, "constant|sine|step|file");
  simulate->add_option("--setpoint-file", sim_opts.setpoint_file,
                       "CSV with header t,ysp or t,ysp_bar");
  simulate->add_option("--initial", sim_opts.initial, "calibrated|validation");

  SweepOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a (nu, dt) grid");
  add_common(sweep_cmd);
  add_overrides(sweep_cmd, sweep_opts.ov, false);
  sweep_cmd->add_option("--nu-values", sweep_opts.nu_values, "Comma-separated nu")
      ->delimiter(',');
  sweep_cmd->add_option("--dt-values", sweep_opts.dt_values, "Comma-separated dt")
      ->delimiter(',');
  sweep_cmd->add_option("--setpoint", sweep_opts.setpoint, "constant|sine|step");

  TuneOptions tune_opts;
  auto* tune_cmd = app.add_subcommand("tune", "Maximize dt under error limits");
  add_common(tune_cmd);
  add_overrides(tune_cmd, tune_opts.ov, false);
  tune_cmd->add_option("--beta", tune_opts.betas,
                       "Threshold pair 'beta1,beta2'; repeat for a schedule");
  tune_cmd->add_option("--setpoint", tune_opts.setpoint, "constant|sine|step");
  tune_cmd->add_option("--budget", tune_opts.budget, "Simulations per tuning run");
  tune_cmd->add_option("--nu0", tune_opts.nu0, "Initial nu");
  tune_cmd->add_option("--dt0", tune_opts.dt0, "Initial dt [s]");

  ValidateOptions val_opts;
  auto* validate = app.add_subcommand("validate", "Score parameter sets");
  add_common(validate);
  add_overrides(validate, val_opts.ov, false);
  validate->add_option("--set", val_opts.sets, "Parameter set NAME:NU:DT");
  validate->add_option("--trajectories", val_opts.trajectories,
                       "Comma-separated validation setpoints");

  std::string targets_file;
  auto* calib = app.add_subcommand("calibrate", "Fit plant constants");
  add_common(calib);
  calib->add_option("--targets", targets_file, "Calibration targets (JSON)");

  try {
    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rest.begin(), rest.end());
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(common, sim_opts, out);
    if (*sweep_cmd) return cmd_sweep(common, sweep_opts, out);
    if (*tune_cmd) return cmd_tune(common, tune_opts, out);
    if (*validate) return cmd_validate(common, val_opts, out);
    if (*calib) return cmd_calibrate(common, targets_file, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SimulationFault& e) {
    err << "simulation fault: " << e.what() << "\n";
    return kExitSimulation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitSimulation;
  }
  return kExitConfig;
}

}  // namespace ofotune
