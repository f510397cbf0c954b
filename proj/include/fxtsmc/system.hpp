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
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "fxtsmc/errors.hpp"
#include "fxtsmc/numerics.hpp"
#include "fxtsmc/types.hpp"

namespace fxt {

/// Channel-wise controlled system
///
///   dx_i/dt = f_i(x) + g_i(x) u_i + d_i(t),   i = 1..n.
///
/// The input gain is diagonal: u_i only enters channel i. All callables must
/// return vectors of length n. The optional `step_limit(x, h)` hint reports
/// the largest explicit sub-step the uncontrolled drift tolerates at x (used
/// for plants whose drift is itself stiff, e.g. exp(x^2) terms).
template <typename Scalar>
struct SystemModel {
  using VectorType = Vector<Scalar>;

  std::string name;
  std::size_t n = 0;
  std::function<VectorType(const VectorType&)> drift;
  std::function<VectorType(const VectorType&)> gain;
  std::function<VectorType(Scalar)> perturbation;
  std::optional<VectorType> perturbation_bounds;
  std::function<Scalar(const VectorType&, Scalar)> step_limit;

  VectorType eval_drift(const VectorType& x) const { return drift(x); }

  /// g(x), checked for zero and non-finite entries.
  VectorType eval_gain(const VectorType& x) const {
    VectorType g = gain(x);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (g[i] == Scalar(0)) {
        std::ostringstream os;
        os << "singular input gain: g_" << (i + 1) << "(x) = 0";
        throw SingularGainError(static_cast<std::size_t>(i), os.str());
      }
      if (!std::isfinite(static_cast<double>(g[i]))) {
        std::ostringstream os;
        os << "non-finite input gain in channel " << (i + 1);
        throw EvaluationError(os.str());
      }
    }
    return g;
  }

  VectorType eval_perturbation(Scalar t) const {
    if (!perturbation) return VectorType::Zero(static_cast<Eigen::Index>(n));
    return perturbation(t);
  }

  /// Throws PerturbationBoundError if a declared bound is exceeded by d(t).
  void check_perturbation_bound(const VectorType& d, Scalar t) const {
    if (!perturbation_bounds) return;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (std::abs(d[i]) > (*perturbation_bounds)[i]) {
        std::ostringstream os;
        os << "perturbation bound violated in channel " << (i + 1) << " at t = " << t << ": |d| = "
           << std::abs(d[i]) << " > " << (*perturbation_bounds)[i];
        throw PerturbationBoundError(os.str());
      }
    }
  }

  Scalar max_step(const VectorType& x, Scalar h) const {
    return step_limit ? step_limit(x, h) : std::numeric_limits<Scalar>::infinity();
  }
};

using SystemModeld = SystemModel<double>;

/// Desired trajectory x_d(t) and its time derivative.
template <typename Scalar>
struct ReferenceSignal {
  std::function<Vector<Scalar>(Scalar)> value;
  std::function<Vector<Scalar>(Scalar)> derivative;
};

using ReferenceSignald = ReferenceSignal<double>;

template <typename Scalar>
ReferenceSignal<Scalar> constant_reference(const Vector<Scalar>& setpoint) {
  return {[setpoint](Scalar) { return setpoint; },
          [n = setpoint.size()](Scalar) { return Vector<Scalar>::Zero(n).eval(); }};
}

/// x_d,i(t) = offset_i + amplitude_i * sin(omega_i t + phase_i).
template <typename Scalar>
ReferenceSignal<Scalar> sinusoidal_reference(const Vector<Scalar>& offset,
                                             const Vector<Scalar>& amplitude,
                                             const Vector<Scalar>& omega,
                                             const Vector<Scalar>& phase) {
  auto value = [=](Scalar t) {
    return (offset.array() + amplitude.array() * (omega.array() * t + phase.array()).sin())
        .matrix()
        .eval();
  };
  auto derivative = [=](Scalar t) {
    return (amplitude.array() * omega.array() * (omega.array() * t + phase.array()).cos())
        .matrix()
        .eval();
  };
  return {value, derivative};
}

/// f(x) + g(x) .* u + d(t).
template <typename Scalar>
Vector<Scalar> eval_dynamics(const SystemModel<Scalar>& model, const Vector<Scalar>& x,
                             const Vector<Scalar>& u, Scalar t) {
  const auto n = static_cast<Eigen::Index>(model.n);
  if (x.size() != n || u.size() != n) {
    std::ostringstream os;
    os << "dimension mismatch: model n = " << n << ", x has " << x.size() << ", u has "
       << u.size();
    throw ParameterError(os.str());
  }
  Vector<Scalar> xdot =
      model.eval_drift(x) + model.eval_gain(x).cwiseProduct(u) + model.eval_perturbation(t);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(xdot[i]))) {
      std::ostringstream os;
      os << "non-finite dynamics in channel " << (i + 1) << " at t = " << t;
      throw EvaluationError(os.str());
    }
  }
  return xdot;
}

/// Copy of `model` with d(t) = 0 and no declared bound.
template <typename Scalar>
SystemModel<Scalar> without_perturbation(SystemModel<Scalar> model) {
  model.perturbation = nullptr;
  model.perturbation_bounds.reset();
  return model;
}

/// Three-state permanent magnet synchronous motor benchmark:
///
///   dx1 = 2.5 (x2 - x1)           + u1 + sin(10 t)
///   dx2 = -x2 - x3 x1 + 25 x1     + u2 + cos(10 t)
///   dx3 = -x3 + x1 x2             + u3 + cos(10 t) sin(4 t)
///
/// with |d_i| <= 1 declared.
template <typename Scalar = double>
SystemModel<Scalar> make_pmsm() {
  using V = Vector<Scalar>;
  SystemModel<Scalar> m;
  m.name = "pmsm";
  m.n = 3;
  m.drift = [](const V& x) {
    V f(3);
    f << Scalar(2.5) * (x[1] - x[0]), -x[1] - x[2] * x[0] + Scalar(25) * x[0], -x[2] + x[0] * x[1];
    return f;
  };
  m.gain = [](const V&) { return V::Ones(3).eval(); };
  m.perturbation = [](Scalar t) {
    using std::cos;
    using std::sin;
    V d(3);
    d << sin(Scalar(10) * t), cos(Scalar(10) * t), cos(Scalar(10) * t) * sin(Scalar(4) * t);
    return d;
  };
  m.perturbation_bounds = V::Ones(3);
  return m;
}

/// Scalar plant dx/dt = -alpha (sqrt(pi)/2) exp(x^2) sign(x) + d(t) with u
/// ignored by the drift (run it open loop). Starting from x0 with d = 0 it
/// reaches the origin at exactly erf(|x0|) / alpha.
template <typename Scalar = double>
SystemModel<Scalar> make_lemma2_plant(Scalar alpha,
                                      std::function<Vector<Scalar>(Scalar)> perturbation = nullptr) {
  if (!(alpha > Scalar(0))) throw ParameterError("lemma-2 plant requires alpha > 0");
  using V = Vector<Scalar>;
  const Scalar gain = alpha * std::sqrt(std::numbers::pi_v<Scalar>) / Scalar(2);
  SystemModel<Scalar> m;
  m.name = "lemma2";
  m.n = 1;
  m.drift = [gain](const V& x) {
    V f(1);
    f[0] = -gain * safe_exp(x[0] * x[0]) * sign(x[0]);
    return f;
  };
  m.gain = [](const V&) { return V::Ones(1).eval(); };
  m.perturbation = std::move(perturbation);
  m.step_limit = [gain](const V& x, Scalar h) {
    return exp_power_step_limit(x[0], gain, Scalar(0), h, Scalar(0.5));
  };
  return m;
}

}  // namespace fxt
