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

#pragma once

#include <cmath>
#include <sstream>
#include <span>

#include "fxtsmc/errors.hpp"
#include "fxtsmc/numerics.hpp"
#include "fxtsmc/types.hpp"

namespace fxt {

/// Gains of the integral sliding variable
///
///   s = z + alpha1 * int_0^t exp(z^2) signed_power(z, p/q) dtau.
///
/// The exponent is stored as the integer pair (p, q); 0 <= p/q < 1.
template <typename Scalar>
struct SlidingParams {
  Scalar alpha1 = Scalar(1);
  int p = 0;
  int q = 1;

  Scalar exponent() const { return static_cast<Scalar>(p) / static_cast<Scalar>(q); }

  void validate() const {
    if (!(alpha1 > Scalar(0))) throw ParameterError("alpha1 must be > 0");
    if (q <= 0) throw ParameterError("exponent denominator q must be a positive integer");
    if (p < 0) throw ParameterError("exponent numerator p must be a non-negative integer");
    if (p >= q) {
      std::ostringstream os;
      os << "exponent p/q = " << p << "/" << q << " must satisfy p/q < 1";
      throw ParameterError(os.str());
    }
  }
};

/// Per-channel integral accumulator of the sliding variable. Starts empty at t = 0.
template <typename Scalar>
struct SlidingState {
  Vector<Scalar> integral;
  Scalar t = Scalar(0);

  static SlidingState zero(Eigen::Index n) { return {Vector<Scalar>::Zero(n), Scalar(0)}; }
};

/// exp(z^2) * signed_power(z, p/q), with the exponential clamped.
template <typename Scalar>
Scalar integrand(Scalar z, const SlidingParams<Scalar>& params) {
  return safe_exp(z * z) * signed_power(z, params.exponent());
}

/// One explicit-Euler accumulation step for every channel.
template <typename Scalar>
SlidingState<Scalar> advance(const SlidingState<Scalar>& state, const Vector<Scalar>& z,
                             std::span<const SlidingParams<Scalar>> params, Scalar h) {
  if (!(h > Scalar(0))) throw ParameterError("sliding accumulation step must be > 0");
  SlidingState<Scalar> next = state;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    next.integral[i] += h * integrand(z[i], params[static_cast<std::size_t>(i)]);
    if (!std::isfinite(static_cast<double>(next.integral[i]))) {
      std::ostringstream os;
      os << "sliding accumulator overflow in channel " << (i + 1) << " at t = " << state.t;
      throw SimulationDivergedError(static_cast<double>(state.t), static_cast<std::size_t>(i),
                                    os.str());
    }
  }
  next.t = state.t + h;
  return next;
}

/// s = z + alpha1 * integral for one channel.
template <typename Scalar>
Scalar sliding_value(Scalar z, Scalar integral, const SlidingParams<Scalar>& params) {
  return z + params.alpha1 * integral;
}

template <typename Scalar>
Vector<Scalar> sliding_values(const Vector<Scalar>& z, const SlidingState<Scalar>& state,
                              std::span<const SlidingParams<Scalar>> params) {
  Vector<Scalar> s(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    s[i] = sliding_value(z[i], state.integral[i], params[static_cast<std::size_t>(i)]);
  return s;
}

}  // namespace fxt
