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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fxtsmc/errors.hpp"
#include "fxtsmc/gp.hpp"
#include "fxtsmc/numerics.hpp"
#include "fxtsmc/sliding.hpp"
#include "fxtsmc/system.hpp"
#include "fxtsmc/types.hpp"

namespace fxt {

/// sqrt(pi) / 2.
template <typename Scalar>
inline constexpr Scalar kHalfSqrtPi = Scalar(1) / (Scalar(2) * std::numbers::inv_sqrtpi_v<Scalar>);

/// Per-channel gains of the fixed-time integral sliding-mode law.
///
/// The reaching term is kappa * alpha2 * exp(s^2) * sign(s) with
/// kappa = sqrt(pi)/2 when `include_sqrt_pi_factor` is set and 1 otherwise.
/// A positive `boundary_layer` eps replaces sign(s) by tanh(s / eps).
template <typename Scalar>
struct ControllerParams {
  SlidingParams<Scalar> sliding;
  Scalar alpha2 = Scalar(1);
  Scalar d_bar = Scalar(0);
  bool include_sqrt_pi_factor = true;
  Scalar boundary_layer = Scalar(0);

  Scalar reaching_scale() const { return include_sqrt_pi_factor ? kHalfSqrtPi<Scalar> : Scalar(1); }

  void validate() const {
    sliding.validate();
    if (!(alpha2 > Scalar(0))) throw ParameterError("alpha2 must be > 0");
    if (!(d_bar >= Scalar(0))) throw ParameterError("d_bar must be >= 0");
    if (!(boundary_layer >= Scalar(0))) throw ParameterError("boundary layer must be >= 0");
  }

  /// Domain check plus kappa * alpha2 > d_bar, i.e. alpha2 > (2/sqrt(pi)) d_bar
  /// for the default known-model scaling.
  void validate_known_model() const {
    validate();
    if (!(reaching_scale() * alpha2 > d_bar)) {
      std::ostringstream os;
      os << "gain too small: need alpha2 > " << (include_sqrt_pi_factor ? "(2/sqrt(pi)) * " : "")
         << "d_bar, got alpha2 = " << alpha2 << " <= " << d_bar / reaching_scale();
      throw GainTooSmallError(os.str());
    }
  }

  /// alpha2 > d_bar + delta_f_bar, the condition of the learned-drift law.
  void validate_gp(Scalar delta_f_bar) const {
    validate();
    if (!(alpha2 > d_bar + delta_f_bar)) {
      std::ostringstream os;
      os << "gain too small: need alpha2 > d_bar + delta_f_bar, got alpha2 = " << alpha2
         << " <= " << d_bar << " + " << delta_f_bar;
      throw GainTooSmallError(os.str());
    }
  }
};

using ControllerParamsd = ControllerParams<double>;

/// Same gains on every channel; `include_sqrt_pi_factor` left at its default.
template <typename Scalar>
std::vector<ControllerParams<Scalar>> uniform_params(std::size_t n, Scalar alpha1, int p, int q,
                                                     Scalar alpha2, Scalar d_bar) {
  ControllerParams<Scalar> c;
  c.sliding = {alpha1, p, q};
  c.alpha2 = alpha2;
  c.d_bar = d_bar;
  return std::vector<ControllerParams<Scalar>>(n, c);
}

namespace detail {

template <typename Fn>
auto with_channel(std::size_t channel, Fn&& fn) {
  try {
    return fn();
  } catch (const GainTooSmallError& e) {
    throw GainTooSmallError("channel " + std::to_string(channel + 1) + ": " + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError("channel " + std::to_string(channel + 1) + ": " + e.what());
  }
}

}  // namespace detail

template <typename Scalar>
void validate_known_model(std::span<const ControllerParams<Scalar>> params) {
  for (std::size_t i = 0; i < params.size(); ++i)
    detail::with_channel(i, [&] { params[i].validate_known_model(); });
}

template <typename Scalar>
std::vector<SlidingParams<Scalar>> sliding_params_of(std::span<const ControllerParams<Scalar>> params) {
  std::vector<SlidingParams<Scalar>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.sliding);
  return out;
}

/// sign(s), or tanh(s / eps) inside a boundary layer eps > 0.
template <typename Scalar>
Scalar sign_or_layer(Scalar s, Scalar eps) {
  using std::tanh;
  return eps > Scalar(0) ? tanh(s / eps) : sign(s);
}

/// Everything the control law computes at one instant.
template <typename Scalar>
struct ControlTerms {
  Vector<Scalar> z;
  Vector<Scalar> s;
  Vector<Scalar> u;
  Vector<Scalar> drift;  ///< f(x) or its estimate, whichever the law cancelled
};

/// u_i = -(1/g_i) (drift_i + alpha1 exp(z^2) [z]^{p/q} - dxd_i
///                 + kappa alpha2 exp(s^2) sign(s))
template <typename Scalar>
ControlTerms<Scalar> control_terms(const Vector<Scalar>& x, Scalar t, Vector<Scalar> drift,
                                   const Vector<Scalar>& gain, const ReferenceSignal<Scalar>& ref,
                                   std::span<const ControllerParams<Scalar>> params,
                                   const SlidingState<Scalar>& sstate) {
  const Eigen::Index n = x.size();
  if (static_cast<Eigen::Index>(params.size()) != n || drift.size() != n || gain.size() != n ||
      sstate.integral.size() != n)
    throw ParameterError("control law: channel count mismatch");
  ControlTerms<Scalar> out;
  out.z = x - ref.value(t);
  const Vector<Scalar> xd_dot = ref.derivative(t);
  out.s.resize(n);
  out.u.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = params[static_cast<std::size_t>(i)];
    if (gain[i] == Scalar(0)) {
      throw SingularGainError(static_cast<std::size_t>(i),
                              "singular input gain: g_" + std::to_string(i + 1) + "(x) = 0");
    }
    const Scalar z = out.z[i];
    const Scalar s = sliding_value(z, sstate.integral[i], c.sliding);
    out.s[i] = s;
    const Scalar equivalent = drift[i] + c.sliding.alpha1 * integrand(z, c.sliding) - xd_dot[i];
    const Scalar reaching =
        c.reaching_scale() * c.alpha2 * safe_exp(s * s) * sign_or_layer(s, c.boundary_layer);
    out.u[i] = -(equivalent + reaching) / gain[i];
  }
  out.drift = std::move(drift);
  return out;
}

/// Control law with the drift f(x) of `model` known exactly.
template <typename Scalar>
Vector<Scalar> control_known(const Vector<Scalar>& x, Scalar t, const SystemModel<Scalar>& model,
                             const ReferenceSignal<Scalar>& ref,
                             std::span<const ControllerParams<Scalar>> params,
                             const SlidingState<Scalar>& sstate) {
  return control_terms(x, t, model.eval_drift(x), model.eval_gain(x), ref, params, sstate).u;
}

/// Control law with f(x) replaced by the GP posterior means.
template <typename Scalar>
Vector<Scalar> control_gp(const Vector<Scalar>& x, Scalar t, const DriftModel<Scalar>& drift,
                          const SystemModel<Scalar>& model, const ReferenceSignal<Scalar>& ref,
                          std::span<const ControllerParams<Scalar>> params,
                          const SlidingState<Scalar>& sstate) {
  if (drift.empty()) throw UnfitModelError("GP-based control requires fitted drift models");
  return control_terms(x, t, estimate_drift(drift, x), model.eval_gain(x), ref, params, sstate).u;
}

/// Largest explicit sub-step the closed loop tolerates at (z, s); see
/// exp_power_step_limit. Never below `h` near the sliding manifold.
template <typename Scalar>
Scalar controller_step_limit(const Vector<Scalar>& z, const Vector<Scalar>& s,
                             std::span<const ControllerParams<Scalar>> params, Scalar h,
                             Scalar safety = Scalar(0.5)) {
  Scalar limit = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto& c = params[static_cast<std::size_t>(i)];
    limit = std::min(limit, exp_power_step_limit(z[i], c.sliding.alpha1, c.sliding.exponent(), h,
                                                 safety));
    limit = std::min(limit, exp_power_step_limit(s[i], c.reaching_scale() * c.alpha2, Scalar(0),
                                                 h, safety));
  }
  return limit;
}

// ---------------------------------------------------------------------------
// Settling-time bounds
// ---------------------------------------------------------------------------

/// Settling bound for dV/dt <= -c1 V^h1 - c2 V^h2, 0 < h1 < 1 < h2.
template <typename Scalar>
Scalar lemma1_bound(Scalar c1, Scalar c2, Scalar h1, Scalar h2) {
  if (!(c1 > Scalar(0)) || !(c2 > Scalar(0)))
    throw ParameterError("lemma-1 bound requires c1 > 0 and c2 > 0");
  if (!(h1 > Scalar(0) && h1 < Scalar(1)) || !(h2 > Scalar(1)))
    throw ParameterError("lemma-1 bound requires 0 < h1 < 1 < h2");
  return Scalar(1) / (c1 * (Scalar(1) - h1)) + Scalar(1) / (c2 * (h2 - Scalar(1)));
}

/// 1 / (alpha - (2/sqrt(pi)) d_bar) for dx = -alpha (sqrt(pi)/2) e^{x^2} sign(x) + d.
template <typename Scalar>
Scalar lemma2_bound(Scalar alpha, Scalar d_bar) {
  if (!(d_bar >= Scalar(0))) throw ParameterError("d_bar must be >= 0");
  const Scalar margin = alpha - d_bar / kHalfSqrtPi<Scalar>;
  if (!(margin > Scalar(0))) {
    std::ostringstream os;
    os << "gain too small: need alpha > (2/sqrt(pi)) d_bar = " << d_bar / kHalfSqrtPi<Scalar>
       << ", got " << alpha;
    throw GainTooSmallError(os.str());
  }
  return Scalar(1) / margin;
}

/// (2 / alpha1) / (1 - (p/q)^2): reaching time of z on the sliding manifold.
template <typename Scalar>
Scalar theorem1_z_bound(Scalar alpha1, int p, int q) {
  SlidingParams<Scalar>{alpha1, p, q}.validate();
  const Scalar r = static_cast<Scalar>(p) / static_cast<Scalar>(q);
  return (Scalar(2) / alpha1) / (Scalar(1) - r * r);
}

/// -(2 sqrt(2) + 1) / (2 A) for dV/dt <= A |z| e^{z^2}, A < 0.
template <typename Scalar>
Scalar lemma3_bound(Scalar A) {
  if (!(A < Scalar(0))) throw ParameterError("lemma-3 bound requires A < 0");
  return -(Scalar(2) * std::numbers::sqrt2_v<Scalar> + Scalar(1)) / (Scalar(2) * A);
}

/// Which closed form bounds the sliding phase of the learned-drift law.
enum class SlidingBoundVariant {
  lemma3,   ///< (2 sqrt 2 + 1) / (2 (alpha2 - d_bar - df)), consistent with its derivation
  printed,  ///< 2 sqrt 2 / (2 (alpha2 - d_bar - df)), the closed form as commonly quoted
};

inline const char* to_string(SlidingBoundVariant v) {
  return v == SlidingBoundVariant::printed ? "printed-t8" : "lemma3";
}

template <typename Scalar>
Scalar theorem2_s_bound(Scalar alpha2, Scalar d_bar, Scalar delta_f_bar,
                        SlidingBoundVariant variant = SlidingBoundVariant::lemma3) {
  if (!(d_bar >= Scalar(0)) || !(delta_f_bar >= Scalar(0)))
    throw ParameterError("d_bar and delta_f_bar must be >= 0");
  const Scalar margin = alpha2 - d_bar - delta_f_bar;
  if (!(margin > Scalar(0))) {
    std::ostringstream os;
    os << "gain too small: need alpha2 > d_bar + delta_f_bar = " << d_bar + delta_f_bar
       << ", got " << alpha2;
    throw GainTooSmallError(os.str());
  }
  if (variant == SlidingBoundVariant::printed)
    return Scalar(2) * std::numbers::sqrt2_v<Scalar> / (Scalar(2) * margin);
  return lemma3_bound(-margin);
}

/// Per-channel and aggregate settling-time bounds. T_max = T_s + T_z.
template <typename Scalar>
struct BoundReport {
  Vector<Scalar> T_z;
  Vector<Scalar> T_s;
  Scalar T_z_max = Scalar(0);
  Scalar T_s_max = Scalar(0);
  Scalar T_max = Scalar(0);
  bool learned_drift = false;
  SlidingBoundVariant variant = SlidingBoundVariant::lemma3;
};

using BoundReportd = BoundReport<double>;

/// Known-model bounds when `delta_f_bars` is empty, learned-drift bounds otherwise.
template <typename Scalar>
BoundReport<Scalar> bound_report(std::span<const ControllerParams<Scalar>> params,
                                 std::optional<std::span<const Scalar>> delta_f_bars = std::nullopt,
                                 SlidingBoundVariant variant = SlidingBoundVariant::lemma3) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (n == 0) throw ParameterError("bound report needs at least one channel");
  if (delta_f_bars && static_cast<Eigen::Index>(delta_f_bars->size()) != n)
    throw ParameterError("delta_f_bar count does not match channel count");
  BoundReport<Scalar> r;
  r.T_z.resize(n);
  r.T_s.resize(n);
  r.learned_drift = delta_f_bars.has_value();
  r.variant = variant;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = params[static_cast<std::size_t>(i)];
    const auto ch = static_cast<std::size_t>(i);
    r.T_z[i] = detail::with_channel(ch, [&] {
      return theorem1_z_bound(c.sliding.alpha1, c.sliding.p, c.sliding.q);
    });
    r.T_s[i] = detail::with_channel(ch, [&] {
      return delta_f_bars ? theorem2_s_bound(c.alpha2, c.d_bar, (*delta_f_bars)[ch], variant)
                          : lemma2_bound(c.alpha2, c.d_bar);
    });
  }
  r.T_z_max = r.T_z.maxCoeff();
  r.T_s_max = r.T_s.maxCoeff();
  r.T_max = r.T_z_max + r.T_s_max;
  return r;
}

}  // namespace fxt
