#include "ofotune/tuner.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include <fmt/format.h>

#include "ofotune/errors.hpp"
#include "ofotune/parallel.hpp"

namespace ofotune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Unit-square coordinates: nu linear, dt logarithmic.
struct Scaling {
  Bounds nu;
  Bounds dt;

  double nu_of(double s) const {
    if (s <= 0.0) return nu.lo;
    if (s >= 1.0) return nu.hi;
    return nu.lo + s * (nu.hi - nu.lo);
  }
  double dt_of(double s) const {
    if (s <= 0.0) return dt.lo;
    if (s >= 1.0) return dt.hi;
    return std::exp(std::log(dt.lo) + s * std::log(dt.hi / dt.lo));
  }
  double s_nu(double v) const {
    return nu.hi > nu.lo ? (v - nu.lo) / (nu.hi - nu.lo) : 0.0;
  }
  double s_dt(double v) const {
    return dt.hi > dt.lo ? std::log(v / dt.lo) / std::log(dt.hi / dt.lo) : 0.0;
  }
};

struct Point {
  double s_nu = 0.0;
  double s_dt = 0.0;
  bool operator==(const Point&) const = default;
};

bool feasible(const Evaluation& e, double beta1, double beta2) {
  return e.completed && e.epsilon <= beta1 && e.oscillations <= beta2;
}

double violation(const Evaluation& e, double beta1, double beta2) {
  if (!e.completed || !std::isfinite(e.epsilon)) return kInf;
  return std::max(0.0, e.epsilon - beta1) / std::max(std::abs(beta1), 1e-12) +
         std::max(0.0, e.oscillations - beta2) / std::max(beta2, 1.0);
}

}  // namespace

void TuneSpec::validate() const {
  if (!(nu_bounds.lo >= 0.0 && nu_bounds.lo <= nu_bounds.hi)) {
    throw ConfigError("nu bounds must satisfy 0 <= lo <= hi");
  }
  if (!(dt_bounds.lo > 0.0 && dt_bounds.lo <= dt_bounds.hi)) {
    throw ConfigError("dt bounds must satisfy 0 < lo <= hi");
  }
  if (!nu_bounds.contains(nu0) || !dt_bounds.contains(dt0)) {
    throw ConfigError(fmt::format(
        "initial point ({}, {}) lies outside the bounds", nu0, dt0));
  }
  if (budget < 1) throw ConfigError("budget must be at least 1");
  if (!(initial_mesh > 0.0) || !(min_mesh > 0.0)) {
    throw ConfigError("mesh sizes must be positive");
  }
}

Evaluation evaluate(double nu, double dt, const TuneSpec& spec) {
  OfoConfig cfg = spec.base;
  cfg.nu = nu;
  cfg.dt = dt;
  MetricConfig mc = spec.metrics;
  mc.t_final = spec.sim.t_final;
  try {
    const Trace trace = run_closed_loop(spec.sim, cfg,
                                        make_setpoint(spec.setpoint), spec.params);
    return {ise(trace, mc), oscillations(trace, mc), true, {}};
  } catch (const SimulationFault& fault) {
    return {kInf, -1, false, fault.what()};
  }
}

EvaluationCache::Key EvaluationCache::key(double nu, double dt) {
  return {std::bit_cast<std::uint64_t>(nu), std::bit_cast<std::uint64_t>(dt)};
}

bool EvaluationCache::contains(double nu, double dt) const {
  return cache_.count(key(nu, dt)) > 0;
}

const Evaluation& EvaluationCache::operator()(double nu, double dt) {
  const Key k = key(nu, dt);
  auto it = cache_.find(k);
  if (it == cache_.end()) it = cache_.emplace(k, fn_(nu, dt)).first;
  return it->second;
}

void EvaluationCache::evaluate_all(
    const std::vector<std::pair<double, double>>& points, int jobs) {
  std::vector<std::pair<double, double>> missing;
  for (const auto& p : points) {
    if (!contains(p.first, p.second) &&
        std::find(missing.begin(), missing.end(), p) == missing.end()) {
      missing.push_back(p);
    }
  }
  std::vector<Evaluation> results(missing.size());
  parallel_for(missing.size(), jobs, [&](std::size_t i) {
    results[i] = fn_(missing[i].first, missing[i].second);
  });
  for (std::size_t i = 0; i < missing.size(); ++i) {
    cache_.emplace(key(missing[i].first, missing[i].second), results[i]);
  }
}

TuneResult tune(const TuneSpec& spec) {
  spec.validate();
  spec.sim.validate();
  spec.params.validate();
  return tune(spec, [&spec](double nu, double dt) {
    return evaluate(nu, dt, spec);
  });
}

TuneResult tune(const TuneSpec& spec, const Evaluator& evaluator) {
  spec.validate();
  const Scaling scaling{spec.nu_bounds, spec.dt_bounds};
  const double b1 = spec.beta1;
  const double b2 = spec.beta2;

  EvaluationCache cache(evaluator);
  TuneResult result;
  result.beta1 = b1;
  result.beta2 = b2;

  auto params_of = [&](const Point& p) {
    return std::pair{scaling.nu_of(p.s_nu), scaling.dt_of(p.s_dt)};
  };
  auto log_point = [&](const Point& p) {
    const auto [nu, dt] = params_of(p);
    const Evaluation& e = cache(nu, dt);
    result.eval_log.push_back({nu, dt, e, feasible(e, b1, b2)});
  };

  Point incumbent{scaling.s_nu(spec.nu0), scaling.s_dt(spec.dt0)};
  {
    // Start exactly at the requested point.
    cache.evaluate_all({{spec.nu0, spec.dt0}}, 1);
    const Evaluation& e = cache(spec.nu0, spec.dt0);
    result.eval_log.push_back({spec.nu0, spec.dt0, e, feasible(e, b1, b2)});
  }
  std::pair<double, double> inc_params{spec.nu0, spec.dt0};

  // Larger dt first, smaller epsilon on equal dt.
  auto feasible_order = [](const std::pair<double, double>& a, const Evaluation& ea,
                           const std::pair<double, double>& b, const Evaluation& eb) {
    if (a.second != b.second) return a.second > b.second;
    return ea.epsilon < eb.epsilon;
  };
  auto better = [&](const std::pair<double, double>& cand,
                    const std::pair<double, double>& current) {
    const Evaluation& ec = cache(cand.first, cand.second);
    const Evaluation& ei = cache(current.first, current.second);
    const bool fc = feasible(ec, b1, b2);
    const bool fi = feasible(ei, b1, b2);
    if (fi) return fc && feasible_order(cand, ec, current, ei);
    if (fc) return true;
    return violation(ec, b1, b2) < violation(ei, b1, b2);
  };
  // Among feasible candidates prefer the feasible order, otherwise the
  // smallest violation; earlier poll directions win ties.
  auto preferred = [&](const std::pair<double, double>& a,
                       const std::pair<double, double>& b) {
    const Evaluation& ea = cache(a.first, a.second);
    const Evaluation& eb = cache(b.first, b.second);
    const bool fa = feasible(ea, b1, b2);
    const bool fb = feasible(eb, b1, b2);
    if (fa != fb) return fa;
    if (fa) return feasible_order(a, ea, b, eb);
    return violation(ea, b1, b2) < violation(eb, b1, b2);
  };

  double mesh = spec.initial_mesh;
  while (mesh >= spec.min_mesh &&
         cache.size() < static_cast<std::size_t>(spec.budget)) {
    const std::array<Point, 4> dirs{{{0.0, 1.0}, {0.0, -1.0}, {1.0, 0.0},
                                     {-1.0, 0.0}}};
    std::vector<Point> polled;
    std::vector<std::pair<double, double>> candidates;
    for (const Point& d : dirs) {
      Point p{std::clamp(incumbent.s_nu + mesh * d.s_nu, 0.0, 1.0),
              std::clamp(incumbent.s_dt + mesh * d.s_dt, 0.0, 1.0)};
      const auto params = params_of(p);
      if (params == inc_params ||
          std::find(candidates.begin(), candidates.end(), params) !=
              candidates.end()) {
        continue;
      }
      polled.push_back(p);
      candidates.push_back(params);
    }

    // Respect the evaluation budget, keeping poll order.
    std::vector<std::pair<double, double>> to_run;
    std::vector<std::size_t> usable;
    std::size_t remaining = static_cast<std::size_t>(spec.budget) - cache.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (cache.contains(candidates[i].first, candidates[i].second)) {
        usable.push_back(i);
      } else if (to_run.size() < remaining) {
        to_run.push_back(candidates[i]);
        usable.push_back(i);
      }
    }
    cache.evaluate_all(to_run, spec.jobs);
    for (const auto& params : to_run) {
      const auto it = std::find(candidates.begin(), candidates.end(), params);
      log_point(polled[static_cast<std::size_t>(it - candidates.begin())]);
    }

    std::optional<std::size_t> best;
    for (std::size_t i : usable) {
      if (!better(candidates[i], inc_params)) continue;
      if (!best || preferred(candidates[i], candidates[*best])) best = i;
    }
    if (best) {
      incumbent = polled[*best];
      inc_params = candidates[*best];
    } else {
      mesh *= 0.5;
    }
    if (usable.size() < candidates.size()) break;  // budget ran out mid-poll
  }

  const Evaluation& e = cache(inc_params.first, inc_params.second);
  result.nu_star = inc_params.first;
  result.dt_star = inc_params.second;
  result.epsilon_star = e.epsilon;
  result.oscillations_star = e.oscillations;
  result.feasible = feasible(e, b1, b2);
  result.final_mesh = mesh;
  return result;
}

std::vector<SweepCell> sweep(const std::vector<double>& nu_values,
                             const std::vector<double>& dt_values,
                             const TuneSpec& spec, const Evaluator& evaluator) {
  for (double nu : nu_values) {
    if (!spec.nu_bounds.contains(nu)) {
      throw ConfigError(fmt::format("nu={} outside [{}, {}]", nu,
                                    spec.nu_bounds.lo, spec.nu_bounds.hi));
    }
  }
  for (double dt : dt_values) {
    if (!spec.dt_bounds.contains(dt)) {
      throw ConfigError(fmt::format("dt={} outside [{}, {}]", dt,
                                    spec.dt_bounds.lo, spec.dt_bounds.hi));
    }
  }
  std::vector<SweepCell> cells;
  for (double nu : nu_values) {
    for (double dt : dt_values) cells.push_back({nu, dt, {}});
  }
  parallel_for(cells.size(), spec.jobs, [&](std::size_t i) {
    cells[i].eval = evaluator(cells[i].nu, cells[i].dt);
  });
  return cells;
}

std::vector<SweepCell> sweep(const std::vector<double>& nu_values,
                             const std::vector<double>& dt_values,
                             const TuneSpec& spec) {
  spec.sim.validate();
  spec.params.validate();
  return sweep(nu_values, dt_values, spec, [&spec](double nu, double dt) {
    return evaluate(nu, dt, spec);
  });
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "nu,dt,epsilon,oscillations\n";
  for (const auto& c : cells) {
    if (c.eval.completed) {
      os << fmt::format("{:.12g},{:.12g},{:.12g},{}\n", c.nu, c.dt,
                        c.eval.epsilon, c.eval.oscillations);
    } else {
      os << fmt::format("{:.12g},{:.12g},inf,-1\n", c.nu, c.dt);
    }
  }
}

void to_json(nlohmann::json& j, const EvalRecord& r) {
  j = nlohmann::json{{"nu", r.nu},
                     {"dt", r.dt},
                     {"completed", r.eval.completed},
                     {"feasible", r.feasible}};
  if (r.eval.completed) {
    j["epsilon"] = r.eval.epsilon;
    j["oscillations"] = r.eval.oscillations;
  } else {
    j["epsilon"] = nullptr;
    j["oscillations"] = nullptr;
    j["fault"] = r.eval.fault;
  }
}

void to_json(nlohmann::json& j, const TuneResult& r) {
  j = nlohmann::json{{"beta1", r.beta1},
                     {"beta2", r.beta2},
                     {"nu_star", r.nu_star},
                     {"dt_star", r.dt_star},
                     {"feasible", r.feasible},
                     {"final_mesh", r.final_mesh},
                     {"evaluations", r.eval_log.size()},
                     {"eval_log", r.eval_log}};
  if (std::isfinite(r.epsilon_star)) {
    j["epsilon_star"] = r.epsilon_star;
    j["oscillations_star"] = r.oscillations_star;
  } else {
    j["epsilon_star"] = nullptr;
    j["oscillations_star"] = nullptr;
  }
}

}  // namespace ofotune
