#include <doctest.h>

#include <cmath>
#include <vector>

#include "ofotune/dopri5.hpp"

using namespace ofotune;

TEST_CASE("exponential decay to tolerance") {
  auto rhs = [](double, const Vec<1>& x) { return Vec<1>(-2.0 * x[0]); };
  Dopri5Options<1> opts;
  opts.rtol = 1e-10;
  opts.atol = Vec<1>::Constant(1e-12);
  Dopri5<1, decltype(rhs)> ode(rhs, opts);
  double h = 0.0;
  const Vec<1> x = ode.integrate(0.0, 3.0, Vec<1>(1.0), h, [](const auto&) {});
  CHECK(x[0] == doctest::Approx(std::exp(-6.0)).epsilon(1e-8));
  CHECK(ode.stats().accepted > 0);
}

TEST_CASE("harmonic oscillator with dense output") {
  auto rhs = [](double, const Vec<2>& x) { return Vec<2>(x[1], -x[0]); };
  Dopri5Options<2> opts;
  opts.rtol = 1e-9;
  opts.atol = Vec<2>::Constant(1e-11);
  Dopri5<2, decltype(rhs)> ode(rhs, opts);
  double h = 0.0;
  double worst = 0.0;
  int samples = 0;
  const Vec<2> x = ode.integrate(0.0, 10.0, Vec<2>(1.0, 0.0), h,
                                 [&](const DenseStep<2>& s) {
                                   for (int i = 0; i <= 4; ++i) {
                                     const double t = s.t0 + 0.25 * i * s.h;
                                     const Vec<2> v = s(t);
                                     worst = std::max(worst, std::abs(v[0] - std::cos(t)));
                                     worst = std::max(worst, std::abs(v[1] + std::sin(t)));
                                     ++samples;
                                   }
                                 });
  CHECK(x[0] == doctest::Approx(std::cos(10.0)).epsilon(1e-7));
  CHECK(x[1] == doctest::Approx(-std::sin(10.0)).epsilon(1e-7));
  CHECK(samples > 0);
  CHECK(worst < 1e-7);
}

TEST_CASE("dense output interpolates step end points exactly") {
  auto rhs = [](double t, const Vec<1>&) { return Vec<1>(std::cos(t)); };
  Dopri5<1, decltype(rhs)> ode(rhs, Dopri5Options<1>{});
  double h = 0.0;
  std::vector<DenseStep<1>> steps;
  const Vec<1> x =
      ode.integrate(0.0, 2.0, Vec<1>(0.0), h, [&](const DenseStep<1>& s) { steps.push_back(s); });
  REQUIRE(!steps.empty());
  CHECK(steps.front()(0.0)[0] == doctest::Approx(0.0));
  CHECK(steps.back()(2.0)[0] == doctest::Approx(x[0]).epsilon(1e-14));
  CHECK(steps.back().t1() == 2.0);
}

TEST_CASE("zero-length interval returns the input") {
  auto rhs = [](double, const Vec<1>& x) { return x; };
  Dopri5<1, decltype(rhs)> ode(rhs, Dopri5Options<1>{});
  double h = 0.1;
  CHECK(ode.integrate(1.0, 1.0, Vec<1>(3.0), h, [](const auto&) {})[0] == 3.0);
}

TEST_CASE("finite-time blow-up raises a numerical fault") {
  auto rhs = [](double, const Vec<1>& x) { return Vec<1>(x[0] * x[0]); };
  Dopri5<1, decltype(rhs)> ode(rhs, Dopri5Options<1>{});
  double h = 0.0;
  CHECK_THROWS_AS(ode.integrate(0.0, 2.0, Vec<1>(1.0), h, [](const auto&) {}),
                  NumericalFault);
}

TEST_CASE("step limit is enforced") {
  auto rhs = [](double, const Vec<1>& x) { return Vec<1>(-x[0]); };
  Dopri5Options<1> opts;
  opts.h_max = 1e-3;
  opts.max_steps = 10;
  Dopri5<1, decltype(rhs)> ode(rhs, opts);
  double h = 0.0;
  CHECK_THROWS_AS(ode.integrate(0.0, 1.0, Vec<1>(1.0), h, [](const auto&) {}),
                  NumericalFault);
}
