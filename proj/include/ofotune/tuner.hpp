#pragma once

// Controller tuning: maximize the sampling time dt over (nu, dt) subject to
// epsilon <= beta1 and |F| <= beta2, by compass search with an extreme
// barrier.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ofotune/controller.hpp"
#include "ofotune/metrics.hpp"
#include "ofotune/plant.hpp"
#include "ofotune/simloop.hpp"

namespace ofotune {

struct Evaluation {
  double epsilon = 0.0;
  int oscillations = 0;
  bool completed = true;  // false when the closed-loop run faulted
  std::string fault;
};

using Evaluator = std::function<Evaluation(double nu, double dt)>;

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct TuneSpec {
  double beta1 = 150.0;
  double beta2 = 50.0;
  Bounds nu_bounds{0.0, 1e3};
  Bounds dt_bounds{5e-3, 100.0};
  double nu0 = 0.1;
  double dt0 = 50.0;
  int budget = 100;
  double initial_mesh = 0.25;
  double min_mesh = 1e-3;
  int jobs = 1;

  std::string setpoint = "constant";
  SimSpec sim;
  CompressorParams params = default_params();
  OfoConfig base;  // bounds and gradient unit; nu and dt are overwritten
  MetricConfig metrics;

  void validate() const;
};

struct EvalRecord {
  double nu = 0.0;
  double dt = 0.0;
  Evaluation eval;
  bool feasible = false;
};

struct TuneResult {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double nu_star = 0.0;
  double dt_star = 0.0;
  double epsilon_star = 0.0;
  int oscillations_star = 0;
  bool feasible = false;
  double final_mesh = 0.0;
  std::vector<EvalRecord> eval_log;
};

/// One closed-loop run at (nu, dt) followed by both metrics. A
/// SimulationFault yields completed = false.
Evaluation evaluate(double nu, double dt, const TuneSpec& spec);

/// Memoizes an evaluator on the exact bit patterns of (nu, dt).
class EvaluationCache {
 public:
  explicit EvaluationCache(Evaluator fn) : fn_(std::move(fn)) {}

  const Evaluation& operator()(double nu, double dt);
  bool contains(double nu, double dt) const;
  /// Evaluates the missing points, up to `jobs` at a time, and stores them
  /// in the given order.
  void evaluate_all(const std::vector<std::pair<double, double>>& points,
                    int jobs);
  std::size_t size() const { return cache_.size(); }

 private:
  using Key = std::pair<std::uint64_t, std::uint64_t>;
  static Key key(double nu, double dt);

  Evaluator fn_;
  std::map<Key, Evaluation> cache_;
};

/// Tunes against the closed-loop simulation described by `spec`.
TuneResult tune(const TuneSpec& spec);
/// Tunes against an arbitrary evaluator; only the search fields of `spec`
/// (thresholds, bounds, start, budget, mesh, jobs) are used.
TuneResult tune(const TuneSpec& spec, const Evaluator& evaluator);

struct SweepCell {
  double nu = 0.0;
  double dt = 0.0;
  Evaluation eval;
};

/// Row-major grid: one row per nu value, columns follow dt_values. Throws
/// ConfigError if a value lies outside the bounds of `spec`.
std::vector<SweepCell> sweep(const std::vector<double>& nu_values,
                             const std::vector<double>& dt_values,
                             const TuneSpec& spec);
std::vector<SweepCell> sweep(const std::vector<double>& nu_values,
                             const std::vector<double>& dt_values,
                             const TuneSpec& spec, const Evaluator& evaluator);

/// CSV header nu,dt,epsilon,oscillations. Faulted cells are written with
/// epsilon inf and oscillations -1.
void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells);

void to_json(nlohmann::json& j, const EvalRecord& r);
void to_json(nlohmann::json& j, const TuneResult& r);

}  // namespace ofotune
