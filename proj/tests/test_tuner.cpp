#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "ofotune/errors.hpp"
#include "ofotune/tuner.hpp"

using namespace ofotune;

namespace {

// Error falls with nu / dt, oscillations grow with nu.
Evaluation surrogate_ratio(double nu, double dt) {
  return {100.0 * dt / (nu + 1.0), static_cast<int>(std::floor(nu / 100.0)), true, {}};
}

// Feasible set peaks at nu = 400, dt = 30 for beta1 = 3.
Evaluation surrogate_bump(double nu, double dt) {
  const double z = (nu - 400.0) / 200.0;
  return {dt / 10.0 + z * z, 0, true, {}};
}

struct GridOptimum {
  double nu = 0.0;
  double dt = 0.0;
  bool found = false;
};

GridOptimum grid_optimum(const Evaluator& f, const TuneSpec& spec, int n = 200) {
  GridOptimum best;
  double best_eps = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double nu = spec.nu_bounds.lo + (spec.nu_bounds.hi - spec.nu_bounds.lo) * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double dt = spec.dt_bounds.lo *
                        std::pow(spec.dt_bounds.hi / spec.dt_bounds.lo, double(j) / (n - 1));
      const Evaluation e = f(nu, dt);
      if (!(e.epsilon <= spec.beta1 && e.oscillations <= spec.beta2)) continue;
      if (!best.found || dt > best.dt || (dt == best.dt && e.epsilon < best_eps)) {
        best = {nu, dt, true};
        best_eps = e.epsilon;
      }
    }
  }
  return best;
}

double log_cell(const TuneSpec& spec, int n = 200) {
  return std::log(spec.dt_bounds.hi / spec.dt_bounds.lo) / (n - 1);
}

void check_invariants(const TuneSpec& spec, const TuneResult& r, const Evaluator& f) {
  for (const EvalRecord& rec : r.eval_log) {
    CHECK(spec.nu_bounds.contains(rec.nu));
    CHECK(spec.dt_bounds.contains(rec.dt));
    if (rec.feasible) CHECK(rec.dt <= r.dt_star);
  }
  if (r.feasible) {
    const Evaluation e = f(r.nu_star, r.dt_star);
    CHECK(e.epsilon <= spec.beta1);
    CHECK(e.oscillations <= spec.beta2);
  }
  CHECK(r.eval_log.size() <= static_cast<std::size_t>(spec.budget));
}

}  // namespace

TEST_CASE("tune finds the grid optimum of the ratio surrogate") {
  TuneSpec spec;
  spec.beta1 = 1.0;
  spec.beta2 = 2.0;
  spec.budget = 1000;
  const TuneResult r = tune(spec, surrogate_ratio);
  const GridOptimum g = grid_optimum(surrogate_ratio, spec);
  REQUIRE(g.found);
  CHECK(r.feasible);
  CHECK(std::abs(std::log(r.dt_star / g.dt)) <= log_cell(spec) + 1e-12);
  check_invariants(spec, r, surrogate_ratio);
}

TEST_CASE("tune finds the interior optimum of the bump surrogate") {
  TuneSpec spec;
  spec.beta1 = 3.0;
  spec.beta2 = 0.0;
  spec.budget = 1000;
  const TuneResult r = tune(spec, surrogate_bump);
  const GridOptimum g = grid_optimum(surrogate_bump, spec);
  REQUIRE(g.found);
  CHECK(r.feasible);
  CHECK(std::abs(std::log(r.dt_star / g.dt)) <= log_cell(spec) + 1e-12);
  CHECK(std::abs(r.nu_star - g.nu) <= 1000.0 / 199.0 + 1e-9);
  check_invariants(spec, r, surrogate_bump);
}

TEST_CASE("unattainable thresholds return the least violating point") {
  TuneSpec spec;
  spec.beta1 = 1e-6;
  spec.beta2 = 0.0;
  spec.budget = 200;
  const TuneResult r = tune(spec, surrogate_ratio);
  CHECK_FALSE(r.feasible);
  for (const EvalRecord& rec : r.eval_log) CHECK_FALSE(rec.feasible);
  CHECK(r.epsilon_star < surrogate_ratio(spec.nu0, spec.dt0).epsilon);
  check_invariants(spec, r, surrogate_ratio);
}

TEST_CASE("relaxing thresholds never lowers the optimum") {
  const std::pair<double, double> schedule[] = {{0.5, 1.0}, {1.0, 1.0}, {1.0, 2.0}, {4.0, 5.0}};
  double previous = 0.0;
  for (const auto& [b1, b2] : schedule) {
    TuneSpec spec;
    spec.beta1 = b1;
    spec.beta2 = b2;
    spec.budget = 1000;
    const TuneResult r = tune(spec, surrogate_ratio);
    CAPTURE(b1);
    CHECK(r.feasible);
    CHECK(r.dt_star >= previous);
    previous = r.dt_star;
  }
}

TEST_CASE("budget counts distinct evaluations") {
  int calls = 0;
  const Evaluator counted = [&calls](double nu, double dt) {
    ++calls;
    return surrogate_ratio(nu, dt);
  };
  TuneSpec spec;
  spec.beta1 = 1.0;
  spec.beta2 = 2.0;
  spec.budget = 17;
  const TuneResult r = tune(spec, counted);
  CHECK(calls <= 17);
  CHECK(r.eval_log.size() == static_cast<std::size_t>(calls));
}

TEST_CASE("parallel polling gives the same search") {
  TuneSpec spec;
  spec.beta1 = 3.0;
  spec.beta2 = 0.0;
  spec.budget = 300;
  const TuneResult a = tune(spec, surrogate_bump);
  spec.jobs = 4;
  const TuneResult b = tune(spec, surrogate_bump);
  REQUIRE(a.eval_log.size() == b.eval_log.size());
  for (std::size_t i = 0; i < a.eval_log.size(); ++i) {
    CHECK(a.eval_log[i].nu == b.eval_log[i].nu);
    CHECK(a.eval_log[i].dt == b.eval_log[i].dt);
  }
  CHECK(nlohmann::json(a).dump() == nlohmann::json(b).dump());
}

TEST_CASE("start outside the bounds is rejected") {
  TuneSpec spec;
  spec.nu0 = -1.0;
  CHECK_THROWS_AS(tune(spec, surrogate_ratio), ConfigError);
  spec = TuneSpec{};
  spec.budget = 0;
  CHECK_THROWS_AS(tune(spec, surrogate_ratio), ConfigError);
}

TEST_CASE("evaluation cache keys on exact values") {
  int calls = 0;
  EvaluationCache cache([&calls](double nu, double dt) {
    ++calls;
    return surrogate_ratio(nu, dt);
  });
  cache(1.0, 2.0);
  cache(1.0, 2.0);
  cache(1.0, std::nextafter(2.0, 3.0));
  CHECK(calls == 2);
  cache.evaluate_all({{1.0, 2.0}, {3.0, 4.0}, {3.0, 4.0}}, 2);
  CHECK(calls == 3);
  CHECK(cache.size() == 3);
}

TEST_CASE("sweep is row-major and matches single evaluations") {
  TuneSpec spec;
  spec.jobs = 3;
  const auto cells = sweep({0.0, 500.0}, {0.01, 1.0, 10.0}, spec, surrogate_ratio);
  REQUIRE(cells.size() == 6);
  CHECK(cells[1].nu == 0.0);
  CHECK(cells[1].dt == 1.0);
  CHECK(cells[3].nu == 500.0);
  for (const auto& c : cells) CHECK(c.eval.epsilon == surrogate_ratio(c.nu, c.dt).epsilon);
  CHECK_THROWS_AS(sweep({2000.0}, {1.0}, spec, surrogate_ratio), ConfigError);
  CHECK_THROWS_AS(sweep({1.0}, {1e-4}, spec, surrogate_ratio), ConfigError);
}

TEST_CASE("one-cell sweep on the plant equals evaluate") {
  TuneSpec spec;
  const auto cells = sweep({1.0}, {50.0}, spec);
  const Evaluation e = evaluate(1.0, 50.0, spec);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].eval.epsilon == e.epsilon);
  CHECK(cells[0].eval.oscillations == e.oscillations);
}

TEST_CASE("faulted runs become infeasible records") {
  TuneSpec spec;
  spec.sim.initial_torque = -1e5;
  spec.base.u_min = -1e6;
  const Evaluation e = evaluate(0.0, 50.0, spec);
  CHECK_FALSE(e.completed);
  CHECK(std::isinf(e.epsilon));
  CHECK_FALSE(e.fault.empty());

  std::ostringstream os;
  write_sweep_csv(os, {{0.0, 50.0, e}, {1.0, 2.0, {3.5, 1, true, {}}}});
  CHECK(os.str() == "nu,dt,epsilon,oscillations\n0,50,inf,-1\n1,2,3.5,1\n");

  const nlohmann::json j = EvalRecord{0.0, 50.0, e, false};
  CHECK(j["completed"] == false);
  CHECK(j["epsilon"].is_null());
}

TEST_CASE("tune result JSON fields") {
  TuneSpec spec;
  spec.beta1 = 1.0;
  spec.beta2 = 2.0;
  spec.budget = 20;
  const TuneResult r = tune(spec, surrogate_ratio);
  const nlohmann::json j = r;
  for (const char* key : {"beta1", "beta2", "nu_star", "dt_star", "epsilon_star",
                          "oscillations_star", "feasible", "eval_log"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["eval_log"].size() == r.eval_log.size());
}
