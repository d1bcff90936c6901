#pragma once

// Dormand-Prince 5(4) explicit Runge-Kutta integrator with PI step-size
// control and 4th-order continuous (dense) output.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "ofotune/errors.hpp"

namespace ofotune {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

template <int N>
struct Dopri5Options {
  double rtol = 1e-6;
  Vec<N> atol = Vec<N>::Constant(1e-8);
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 10'000'000;
};

/// Interpolant over one accepted step [t0, t0 + h].
template <int N>
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  Vec<N> r1, r2, r3, r4, r5;

  double t1() const { return t0 + h; }

  Vec<N> operator()(double t) const {
    const double theta = (t - t0) / h;
    const double theta1 = 1.0 - theta;
    return r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
  }
};

struct Dopri5Stats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

/// `Rhs` is callable as Vec<N>(double t, const Vec<N>& x).
template <int N, class Rhs>
class Dopri5 {
 public:
  Dopri5(Rhs rhs, Dopri5Options<N> opts) : rhs_(std::move(rhs)), opts_(opts) {}

  /// Integrates from (t0, x0) to t1 and returns x(t1). `h` is the initial
  /// step guess (<= 0 selects one automatically) and on return holds the
  /// proposed next step. `on_step` is called with every accepted DenseStep.
  /// Each call is a fresh start: no stage or controller memory carries over.
  template <class OnStep>
  Vec<N> integrate(double t0, double t1, Vec<N> x, double& h, OnStep&& on_step) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                     a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                     a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double d1 = -12715105075.0 / 11282082432.0,
                     d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0,
                     d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0,
                     d7 = 69997945.0 / 29380423.0;
    // PI controller constants.
    constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
    constexpr double fac_min_inv = 1.0 / 0.2, fac_max_inv = 1.0 / 10.0;

    const double span = t1 - t0;
    if (!(span > 0.0)) return x;

    Vec<N> k1 = eval(t0, x);
    if (!(h > 0.0)) h = initial_step(t0, x, k1, span);
    h = std::min({h, span, opts_.h_max});

    double t = t0;
    double fac_old = 1e-4;
    bool last_rejected = false;
    long steps = 0;
    while (t < t1) {
      if (++steps > opts_.max_steps) {
        throw NumericalFault(fmt::format("integrator exceeded {} steps at t={}",
                                         opts_.max_steps, t));
      }
      if (h < 16.0 * std::numeric_limits<double>::epsilon() *
                  std::max(std::abs(t), 1.0)) {
        throw NumericalFault(fmt::format("step size underflow at t={}", t));
      }
      const bool final_step = t + 1.01 * h >= t1;
      const double hs = final_step ? t1 - t : h;

      const Vec<N> k2 = eval(t + c2 * hs, x + hs * a21 * k1);
      const Vec<N> k3 = eval(t + c3 * hs, x + hs * (a31 * k1 + a32 * k2));
      const Vec<N> k4 =
          eval(t + c4 * hs, x + hs * (a41 * k1 + a42 * k2 + a43 * k3));
      const Vec<N> k5 = eval(
          t + c5 * hs, x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Vec<N> k6 =
          eval(t + hs, x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 +
                                 a65 * k5));
      const Vec<N> x_new =
          x + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      const double t_new = final_step ? t1 : t + hs;
      const Vec<N> k7 = eval(t_new, x_new);

      const Vec<N> err_vec =
          hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const Vec<N> scale =
          opts_.atol.array() +
          opts_.rtol * x.cwiseAbs().cwiseMax(x_new.cwiseAbs()).array();
      const double err = std::sqrt(
          (err_vec.cwiseQuotient(scale)).squaredNorm() / static_cast<double>(N));
      if (!std::isfinite(err)) {
        throw NumericalFault(fmt::format("non-finite error estimate at t={}", t));
      }

      const double fac11 = std::pow(err, expo1);
      if (err <= 1.0) {
        double fac = fac11 / std::pow(fac_old, beta);
        fac = std::max(fac_max_inv, std::min(fac_min_inv, fac / safe));
        double h_new = std::min(hs / fac, opts_.h_max);
        if (last_rejected) h_new = std::min(h_new, hs);
        fac_old = std::max(err, 1e-4);
        ++stats_.accepted;

        DenseStep<N> step;
        step.t0 = t;
        step.h = t_new - t;
        const Vec<N> ydiff = x_new - x;
        const Vec<N> bspl = step.h * k1 - ydiff;
        step.r1 = x;
        step.r2 = ydiff;
        step.r3 = bspl;
        step.r4 = ydiff - step.h * k7 - bspl;
        step.r5 = step.h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 +
                            d7 * k7);
        on_step(step);

        x = x_new;
        k1 = k7;
        t = t_new;
        // Keep the unclipped proposal when the last step was shortened to
        // land on t1.
        h = final_step ? std::max(h_new, h) : h_new;
        last_rejected = false;
      } else {
        h = hs / std::min(fac_min_inv, fac11 / safe);
        last_rejected = true;
        ++stats_.rejected;
      }
    }
    return x;
  }

  const Dopri5Stats& stats() const { return stats_; }

 private:
  Vec<N> eval(double t, const Vec<N>& x) {
    ++stats_.evaluations;
    return rhs_(t, x);
  }

  double initial_step(double t0, const Vec<N>& x0, const Vec<N>& f0,
                      double span) {
    const Vec<N> sk = opts_.atol.array() + opts_.rtol * x0.cwiseAbs().array();
    const double dnf = f0.cwiseQuotient(sk).squaredNorm() / N;
    const double dny = x0.cwiseQuotient(sk).squaredNorm() / N;
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min({h, span, opts_.h_max});
    const Vec<N> f1 = eval(t0 + h, x0 + h * f0);
    const double der2 = std::sqrt((f1 - f0).cwiseQuotient(sk).squaredNorm() / N) / h;
    const double der12 = std::max(der2, std::sqrt(dnf));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3)
                                     : std::pow(0.01 / der12, 1.0 / 5.0);
    return std::min({100.0 * h, h1, span, opts_.h_max});
  }

  Rhs rhs_;
  Dopri5Options<N> opts_;
  Dopri5Stats stats_;
};

}  // namespace ofotune
