// Copyright 2026 The fxtsmc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <limits>

#include "fxtsmc/numerics.hpp"
#include "support.hpp"

using namespace fxt;
using fxt::testing::for_all;
using fxt::testing::Gen;

TEST_CASE("sign uses sign(0) = 0") {
  CHECK(sign(0.0) == 0.0);
  CHECK(sign(-0.0) == 0.0);
  CHECK(sign(3.5) == 1.0);
  CHECK(sign(-1e-300) == -1.0);
}

TEST_CASE("signed_power examples") {
  CHECK(signed_power(-2.0, 2.0) == doctest::Approx(-4.0));
  CHECK(signed_power(0.0, 0.0) == 0.0);
  CHECK(signed_power(4.0, 0.5) == doctest::Approx(2.0));
  CHECK(signed_power(-7.0, 0.0) == -1.0);
}

TEST_CASE("signed_power is odd and monotone") {
  for_all(11, 2000, [](Gen& g, int) {
    const double x = g.wide();
    const double a = g.uniform(0.01, 3.0);
    CHECK(signed_power(-x, a) == -signed_power(x, a));
    const double y = x + std::abs(g.wide());
    CHECK(signed_power(y, a) >= signed_power(x, a));
  });
}

TEST_CASE("safe_exp clamps and stays finite") {
  CHECK(safe_exp(0.0) == 1.0);
  CHECK(safe_exp(1.0) == doctest::Approx(2.718281828459045).epsilon(1e-15));
  CHECK(safe_exp(1000.0) == std::exp(50.0));
  CHECK(safe_exp(std::numeric_limits<double>::infinity()) == std::exp(50.0));
  CHECK(safe_exp_derivative(60.0) == 0.0);
  for_all(12, 2000, [](Gen& g, int) {
    const double x = g.coin() ? g.uniform(-1e300, 1e300) : g.uniform(-800, 800);
    CHECK(std::isfinite(safe_exp(x)));
  });
}

TEST_CASE("integrate_step examples") {
  auto zero = [](const Vectord& x, double) { return Vectord::Zero(x.size()).eval(); };
  auto one = [](const Vectord& x, double) { return Vectord::Ones(x.size()).eval(); };
  auto self = [](const Vectord& x, double) { return x; };
  const Vectord three = Vectord::Constant(1, 3.0);
  CHECK(integrate_step(three, zero, 0.0, 0.37, IntegrationMethod::explicit_euler)[0] == 3.0);
  CHECK(integrate_step(three, zero, 0.0, 0.37, IntegrationMethod::rk4)[0] == 3.0);
  CHECK(integrate_step(Vectord::Zero(1).eval(), one, 0.0, 0.1, IntegrationMethod::explicit_euler)[0] ==
        doctest::Approx(0.1));
  const double rk = integrate_step(Vectord::Ones(1).eval(), self, 0.0, 0.1, IntegrationMethod::rk4)[0];
  CHECK(std::abs(rk - std::exp(0.1)) < 1e-7);
}

TEST_CASE("rk4 reaches e on [0, 1] with h = 1e-3") {
  StepConfig<double> cfg{1e-3, IntegrationMethod::rk4, 1.0};
  Vectord x = Vectord::Ones(1);
  auto self = [](const Vectord& v, double) { return v; };
  for (std::size_t k = 0; k < cfg.steps(); ++k) x = integrate_step(x, self, cfg.time_at(k), cfg);
  CHECK(std::abs(x[0] - std::exp(1.0)) < 1e-9);
}

TEST_CASE("euler error is first order") {
  auto self = [](const Vectord& v, double) { return v; };
  auto err = [&](double h) {
    Vectord x = Vectord::Ones(1);
    const auto n = static_cast<int>(std::lround(1.0 / h));
    for (int k = 0; k < n; ++k) x = integrate_step(x, self, k * h, h, IntegrationMethod::explicit_euler);
    return std::abs(x[0] - std::exp(1.0));
  };
  const double ratio = err(1e-3) / err(5e-4);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("integrate_step reports non-finite derivatives") {
  auto bad = [](const Vectord& x, double) {
    Vectord d = x;
    d[1] = std::numeric_limits<double>::quiet_NaN();
    return d;
  };
  try {
    integrate_step(Vectord::Ones(2).eval(), bad, 0.5, 0.1, IntegrationMethod::rk4);
    FAIL("expected divergence");
  } catch (const SimulationDivergedError& e) {
    CHECK(e.channel() == 1);
    CHECK(e.time() == 0.5);
  }
}

TEST_CASE("step config") {
  StepConfig<double> cfg;
  CHECK(cfg.step_size == 1e-4);
  CHECK(cfg.method == IntegrationMethod::explicit_euler);
  CHECK(cfg.steps() == 50000);
  CHECK(cfg.time_at(50000) == doctest::Approx(5.0));
  cfg.step_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg.step_size = 1e-3;
  cfg.t_end = -1;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("exp_power_step_limit never bites near the origin") {
  for_all(13, 2000, [](Gen& g, int) {
    const double h = 1e-4;
    const double v = g.uniform(-1.5, 1.5);
    const double gain = g.uniform(0.1, 10.0);
    const double a = g.coin() ? 0.0 : g.uniform(0.0, 0.99);
    CHECK(exp_power_step_limit(v, gain, a, h, 0.5) >= h);
  });
  CHECK(exp_power_step_limit(0.0, 3.0, 0.8, 1e-4, 0.5) == std::numeric_limits<double>::infinity());
}

TEST_CASE("exp_power_step_limit keeps Euler from overshooting in the far field") {
  for_all(14, 500, [](Gen& g, int) {
    const double v = g.uniform(2.0, 6.5) * (g.coin() ? 1 : -1);
    const double gain = g.uniform(0.5, 10.0);
    const double a = g.uniform(0.0, 0.9);
    const double hs = exp_power_step_limit(v, gain, a, 1e-4, 0.5);
    const double next = v - hs * gain * safe_exp(v * v) * signed_power(v, a);
    CHECK(std::abs(next) <= std::abs(v));
  });
}
