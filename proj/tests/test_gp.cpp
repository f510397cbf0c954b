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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fxtsmc/gp.hpp"
#include "fxtsmc/sim.hpp"
#include "support.hpp"

using namespace fxt;
using fxt::testing::for_all;
using fxt::testing::Gen;

namespace {

const KernelConfig<double> kExp{KernelFamily::exponential, 1.0};
const KernelConfig<double> kSe{KernelFamily::squared_exponential, 0.7};

Box<double> cube(double r, std::size_t n = 3) { return Box<double>(n, {-r, r}); }

Matrixd random_inputs(Gen& g, Eigen::Index N, Eigen::Index n, double r) {
  Matrixd X(N, n);
  for (Eigen::Index i = 0; i < N; ++i) X.row(i) = g.vector(n, -r, r).transpose();
  return X;
}

SystemModeld zero_drift() {
  auto m = make_pmsm();
  m.drift = [](const Vectord&) { return Vectord::Zero(3).eval(); };
  return m;
}

}  // namespace

TEST_CASE("kernel values") {
  const Vectord a = Vectord::Zero(1), b = Vectord::Ones(1);
  CHECK(kernel_eval(kExp, a, b) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(kernel_eval(kSe, a, b) == doctest::Approx(std::exp(-1.0 / (2 * 0.49))).epsilon(1e-15));
  for_all(51, 1000, [](Gen& g, int) {
    const Vectord x = g.vector(3, -5, 5), y = g.vector(3, -5, 5);
    for (const auto& cfg : {kExp, kSe}) {
      CHECK(kernel_eval(cfg, x, x) == 1.0);
      CHECK(kernel_eval(cfg, x, y) == kernel_eval(cfg, y, x));
      const double k = kernel_eval(cfg, x, y);
      CHECK((k > 0.0 && k <= 1.0));
    }
  });
  CHECK_THROWS_AS((KernelConfig<double>{KernelFamily::exponential, 0.0}.validate()), ParameterError);
}

TEST_CASE("single-sample closed forms") {
  const Matrixd X = Matrixd::Zero(1, 1);
  const Vectord y = Vectord::Constant(1, 2.0);
  const Vectord x0 = Vectord::Zero(1);
  const auto exact = GaussianProcessd::fit(X, y, 0.0, kExp);
  CHECK(gp_mean(exact, x0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(gp_variance(exact, x0)) <= 1e-10);
  const auto noisy = GaussianProcessd::fit(X, y, 1.0, kExp);
  CHECK(gp_mean(noisy, x0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(gp_variance(noisy, x0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(noisy.jitter() == 0.0);
}

TEST_CASE("two-sample posterior against an explicit 2x2 inverse") {
  for_all(52, 200, [](Gen& g, int) {
    const double a = g.uniform(-2, 2), b = a + g.uniform(0.3, 2), ya = g.uniform(-3, 3), yb = g.uniform(-3, 3);
    const double sn = g.uniform(0.05, 1.0), q = g.uniform(-3, 3);
    const Matrixd X = (Matrixd(2, 1) << a, b).finished();
    const Vectord y = (Vectord(2) << ya, yb).finished();
    const auto gp = GaussianProcessd::fit(X, y, sn, kExp);
    const double k12 = std::exp(-std::abs(a - b)), d = 1 + sn * sn;
    const double det = d * d - k12 * k12;
    const double ka = std::exp(-std::abs(q - a)), kb = std::exp(-std::abs(q - b));
    // inv = [d, -k12; -k12, d] / det
    const double wa = (d * ya - k12 * yb) / det, wb = (-k12 * ya + d * yb) / det;
    const double mean = ka * wa + kb * wb;
    const double var = 1 - (ka * (d * ka - k12 * kb) + kb * (-k12 * ka + d * kb)) / det;
    const Vectord xq = Vectord::Constant(1, q);
    CHECK(gp.mean(xq) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(gp.variance(xq) == doctest::Approx(var).epsilon(1e-10));
  });
}

TEST_CASE("duplicate inputs without noise are ill-conditioned") {
  const Matrixd X = (Matrixd(3, 2) << 0, 0, 1, 1, 1, 1).finished();
  const Vectord y = (Vectord(3) << 1, 2, 3).finished();
  try {
    GaussianProcessd::fit(X, y, 0.0, kExp);
    FAIL("expected ill-conditioned data");
  } catch (const IllConditionedDataError& e) {
    CHECK(e.first_row() == 1);
    CHECK(e.second_row() == 2);
  }
  // Noise regularizes the same data.
  CHECK_NOTHROW(GaussianProcessd::fit(X, y, 0.1, kExp));
}

TEST_CASE("prior behaviour far from data") {
  Gen g(53);
  const Matrixd X = random_inputs(g, 10, 3, 1);
  const auto gp = GaussianProcessd::fit(X, g.vector(10, -5, 5), 0.0, kExp);
  const Vectord far = Vectord::Constant(3, 100.0);
  CHECK(gp.cross_covariance(far).maxCoeff() < 1e-12);
  CHECK(std::abs(gp.mean(far)) <= 1e-10);
  CHECK(gp.variance(far) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(gp.error_bound(far, 2.0) == doctest::Approx(2.0).epsilon(1e-10));
  const Vectord mid = Vectord::Constant(3, 1.3);
  CHECK(gp.error_bound(mid, 4.0) == doctest::Approx(2 * gp.error_bound(mid, 2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(gp.error_bound(mid, 0.0), ParameterError);
}

TEST_CASE("noise-free interpolation of the pmsm drift") {
  for (Eigen::Index N : {5, 50}) {
    const auto data = generate_training_data(make_pmsm(), N, cube(2), 0.0, 17);
    const auto models = fit_drift_model(data, kExp);
    for (std::size_t c = 0; c < 3; ++c)
      for (Eigen::Index j = 0; j < N; ++j) {
        const Vectord x = data.inputs.row(j).transpose();
        CHECK(std::abs(models[c].mean(x) - data.targets(j, static_cast<Eigen::Index>(c))) < 1e-8);
        CHECK(models[c].variance(x) <= 1e-10);
        CHECK(models[c].error_bound(x, 2.0) <= 2e-5);
      }
  }
}

TEST_CASE("gram matrix is exactly symmetric") {
  Gen g(54);
  for (const auto& cfg : {kExp, kSe}) {
    const auto gp = GaussianProcessd::fit(random_inputs(g, 30, 3, 2), g.vector(30, -1, 1), 0.01, cfg);
    CHECK((gp.gram() - gp.gram().transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("posterior is invariant under row permutation") {
  for_all(55, 20, [](Gen& g, int) {
    const Eigen::Index N = g.integer(2, 40);
    const double sn = g.coin() ? 0.0 : g.uniform(0.01, 0.5);
    const Matrixd X = random_inputs(g, N, 3, 2);
    const Vectord y = g.vector(N, -10, 10);
    std::vector<int> perm(static_cast<std::size_t>(N));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g.engine());
    Matrixd Xp(N, 3);
    Vectord yp(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      Xp.row(i) = X.row(perm[static_cast<std::size_t>(i)]);
      yp[i] = y[perm[static_cast<std::size_t>(i)]];
    }
    const auto a = GaussianProcessd::fit(X, y, sn, kExp);
    const auto b = GaussianProcessd::fit(Xp, yp, sn, kExp);
    for (int k = 0; k < 10; ++k) {
      const Vectord q = g.vector(3, -2.5, 2.5);
      CHECK(std::abs(a.mean(q) - b.mean(q)) < 1e-10);
      CHECK(std::abs(a.variance(q) - b.variance(q)) < 1e-10);
    }
  });
}

TEST_CASE("variance is non-negative and shrinks when data is added") {
  for_all(56, 15, [](Gen& g, int c) {
    const Eigen::Index N = g.integer(1, 30);
    const double sn = c % 3 == 0 ? 0.0 : g.uniform(0.01, 0.3);
    const Matrixd X = random_inputs(g, N + 1, 3, 2);
    const Vectord y = g.vector(N + 1, -1, 1);
    const auto small = GaussianProcessd::fit(X.topRows(N), y.head(N), sn, kExp);
    const auto big = GaussianProcessd::fit(X, y, sn, kExp);
    for (int k = 0; k < 200; ++k) {
      const Vectord q = g.vector(3, -2.5, 2.5);
      const double vs = small.variance(q), vb = big.variance(q);
      CHECK(vs >= 0.0);
      CHECK(vb >= 0.0);
      CHECK(vb <= vs + 1e-12);
    }
  });
}

TEST_CASE("estimate_drift") {
  const auto zero_data = generate_training_data(zero_drift(), 20, cube(2), 0.0, 3);
  CHECK(zero_data.targets.isZero(0));
  const auto zero_models = fit_drift_model(zero_data, kExp);
  Gen g(57);
  for (int k = 0; k < 50; ++k) CHECK(estimate_drift(zero_models, g.vector(3, -2, 2)).cwiseAbs().maxCoeff() <= 1e-8);

  const auto pmsm = make_pmsm();
  const auto data = generate_training_data(pmsm, 50, cube(2), 0.0, 5);
  const auto models = fit_drift_model(data, kExp);
  for (Eigen::Index j = 0; j < data.size(); ++j) {
    const Vectord x = data.inputs.row(j).transpose();
    CHECK((estimate_drift(models, x) - pmsm.eval_drift(x)).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK_THROWS_AS(estimate_drift(DriftModel<double>{}, Vectord::Zero(3).eval()), UnfitModelError);
  CHECK_THROWS_AS(estimate_drift(models, Vectord::Zero(2).eval()), ParameterError);
}

TEST_CASE("training data generation") {
  const auto a = generate_training_data(make_pmsm(), 50, cube(2), 0.01, 9);
  const auto b = generate_training_data(make_pmsm(), 50, cube(2), 0.01, 9);
  CHECK(a.inputs.rows() == 50);
  CHECK(a.targets.cols() == 3);
  CHECK(a.inputs == b.inputs);
  CHECK(a.targets == b.targets);
  CHECK(a.seed == 9);
  CHECK(a.noise_std == 0.01);
  CHECK((a.inputs.array().abs() <= 2.0).all());
  const auto c = generate_training_data(make_pmsm(), 50, cube(2), 0.01, 10);
  CHECK(a.inputs != c.inputs);
  // Noise has roughly the requested spread.
  const auto clean = generate_training_data(make_pmsm(), 2000, cube(2), 0.0, 11);
  const auto noisy = generate_training_data(make_pmsm(), 2000, cube(2), 0.5, 11);
  const double sd = std::sqrt((noisy.targets - clean.targets).squaredNorm() / 6000.0);
  CHECK(sd == doctest::Approx(0.5).epsilon(0.05));
  CHECK_THROWS_AS(generate_training_data(make_pmsm(), 0, cube(2), 0.0, 1), ParameterError);
  CHECK_THROWS_AS(generate_training_data(make_pmsm(), 5, Box<double>(3, {1.0, 1.0}), 0.0, 1), ParameterError);
}

TEST_CASE("more data gives a smaller held-out drift error") {
  Scenariod sc;
  sc.system = make_pmsm();
  sc.reference = constant_reference<double>(Vectord::Zero(3));
  sc.params = uniform_params<double>(3, 6.0, 8, 10, 4.0, 1.0);
  sc.x0 = Vectord::Constant(3, 1.5);
  sc.step.t_end = 2.0;
  sc.log_every = 50;
  const Matrixd held = simulate(sc).x.transpose();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto small = fit_drift_model(generate_training_data(make_pmsm(), 5, cube(2), 0.01, seed), kExp);
    const auto big = fit_drift_model(generate_training_data(make_pmsm(), 50, cube(2), 0.01, seed), kExp);
    CAPTURE(seed);
    CHECK(rms_drift_error(big, make_pmsm(), held) < rms_drift_error(small, make_pmsm(), held));
  }
}
