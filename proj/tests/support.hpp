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

// Small helpers shared by the test suites: seeded generators for property
// tests and a few numerical oracles written independently of the library.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "fxtsmc/types.hpp"

namespace fxt::testing {

/// Seeded source of random cases. Each property test owns one.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  /// Log-uniform magnitude with random sign, covering tiny to large values.
  double wide() {
    const double mag = std::pow(10.0, uniform(-6, 2));
    return coin() ? mag : -mag;
  }

  Vectord vector(Eigen::Index n, double lo, double hi) {
    Vectord v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Runs `prop(gen, case)` for `cases` cases.
inline void for_all(std::uint64_t seed, int cases, const std::function<void(Gen&, int)>& prop) {
  Gen g(seed);
  for (int c = 0; c < cases; ++c) prop(g, c);
}

/// Composite trapezoid rule over samples y on a uniform grid of spacing h.
template <typename Range>
double trapezoid(const Range& y, double h) {
  double acc = 0;
  for (std::size_t k = 1; k < y.size(); ++k) acc += 0.5 * h * (y[k - 1] + y[k]);
  return acc;
}

}  // namespace fxt::testing
