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
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>

#include "fxtsmc/errors.hpp"
#include "fxtsmc/types.hpp"

namespace fxt {

/// Largest exponent handed to std::exp by safe_exp. exp(50) ~ 5.18e21.
inline constexpr double kExpClamp = 50.0;

/// Single-valued sign with sign(0) = 0.
template <typename Scalar>
constexpr Scalar sign(Scalar x) {
  return x > Scalar(0) ? Scalar(1) : (x < Scalar(0) ? Scalar(-1) : Scalar(0));
}

/// |x|^alpha * sign(x). alpha == 0 reduces to sign(x).
template <typename Scalar>
Scalar signed_power(Scalar x, Scalar alpha) {
  using std::abs;
  using std::pow;
  if (alpha == Scalar(0)) return sign(x);
  return pow(abs(x), alpha) * sign(x);
}

/// exp(min(x, kExpClamp)); always finite for finite or +inf input.
template <typename Scalar>
Scalar safe_exp(Scalar x) {
  using std::exp;
  return exp(x < Scalar(kExpClamp) ? x : Scalar(kExpClamp));
}

/// Derivative of safe_exp; zero on the clamped branch.
template <typename Scalar>
Scalar safe_exp_derivative(Scalar x) {
  return x < Scalar(kExpClamp) ? safe_exp(x) : Scalar(0);
}

/// Largest sub-step for which an explicit Euler step of
///   dv/dt = -gain * safe_exp(v^2) * signed_power(v, exponent)
/// neither overshoots the origin by more than `safety * |v|` plus the chatter
/// band of a nominal step `h`, nor outruns the exponential growth of the
/// right-hand side. Returns +inf when the term vanishes.
///
/// Near the origin the limit is never below `h`, so the bound only bites in
/// the stiff far-field where exp(v^2) is large.
template <typename Scalar>
Scalar exp_power_step_limit(Scalar v, Scalar gain, Scalar exponent, Scalar h, Scalar safety) {
  using std::abs;
  using std::pow;
  const Scalar av = abs(v);
  const Scalar e = safe_exp(v * v);
  const Scalar a = exponent == Scalar(0) ? Scalar(1) : pow(av, exponent);
  const Scalar magnitude = gain * e * a;
  if (!(magnitude > Scalar(0))) return std::numeric_limits<Scalar>::infinity();
  const Scalar chatter = h * gain * (a < Scalar(1) ? a : Scalar(1));
  const Scalar overshoot_limit = (safety * av + chatter) / magnitude;
  const Scalar growth = gain * Scalar(2) * av * safe_exp_derivative(v * v) * a;
  const Scalar growth_limit =
      growth > Scalar(0) ? safety / growth : std::numeric_limits<Scalar>::infinity();
  return overshoot_limit < growth_limit ? overshoot_limit : growth_limit;
}

enum class IntegrationMethod { explicit_euler, rk4 };

inline const char* to_string(IntegrationMethod m) {
  return m == IntegrationMethod::rk4 ? "rk4" : "explicit-euler";
}

/// Fixed-step integration settings.
///
/// The number of steps is round(t_end / step_size) (half away from zero), so
/// the last grid point is steps() * step_size, which may differ from t_end by
/// at most half a step.
template <typename Scalar>
struct StepConfig {
  Scalar step_size = Scalar(1e-4);
  IntegrationMethod method = IntegrationMethod::explicit_euler;
  Scalar t_end = Scalar(5);

  void validate() const {
    if (!(step_size > Scalar(0)) || !std::isfinite(static_cast<double>(step_size)))
      throw ParameterError("step_size must be finite and > 0");
    if (!(t_end >= Scalar(0)) || !std::isfinite(static_cast<double>(t_end)))
      throw ParameterError("t_end must be finite and >= 0");
  }

  std::size_t steps() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(t_end / step_size)));
  }

  /// Time of grid point k, computed without accumulating round-off.
  Scalar time_at(std::size_t k) const { return static_cast<Scalar>(k) * step_size; }
};

namespace detail {

template <typename Scalar>
void check_finite(const Vector<Scalar>& v, Scalar t, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(static_cast<double>(v[i]))) {
      std::ostringstream os;
      os << "simulation diverged: non-finite " << what << " in channel " << i << " at t = " << t;
      throw SimulationDivergedError(static_cast<double>(t), static_cast<std::size_t>(i), os.str());
    }
  }
}

}  // namespace detail

/// Advances `x` by one step of length `h` from time `t`.
///
/// `deriv(x, t)` returns dx/dt. Every stage derivative is checked; a
/// non-finite entry raises SimulationDivergedError with the stage time and
/// channel.
template <typename Scalar, typename Derivative>
Vector<Scalar> integrate_step(const Vector<Scalar>& x, Derivative&& deriv, Scalar t, Scalar h,
                              IntegrationMethod method) {
  if (method == IntegrationMethod::explicit_euler) {
    Vector<Scalar> k1 = deriv(x, t);
    detail::check_finite(k1, t, "derivative");
    return x + h * k1;
  }
  const Scalar half = h / Scalar(2);
  Vector<Scalar> k1 = deriv(x, t);
  detail::check_finite(k1, t, "derivative");
  Vector<Scalar> k2 = deriv(Vector<Scalar>(x + half * k1), t + half);
  detail::check_finite(k2, t + half, "derivative");
  Vector<Scalar> k3 = deriv(Vector<Scalar>(x + half * k2), t + half);
  detail::check_finite(k3, t + half, "derivative");
  Vector<Scalar> k4 = deriv(Vector<Scalar>(x + h * k3), t + h);
  detail::check_finite(k4, t + h, "derivative");
  return x + (h / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

template <typename Scalar, typename Derivative>
Vector<Scalar> integrate_step(const Vector<Scalar>& x, Derivative&& deriv, Scalar t,
                              const StepConfig<Scalar>& cfg) {
  return integrate_step(x, std::forward<Derivative>(deriv), t, cfg.step_size, cfg.method);
}

}  // namespace fxt
