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
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fxtsmc/controller.hpp"
#include "fxtsmc/errors.hpp"
#include "fxtsmc/gp.hpp"
#include "fxtsmc/numerics.hpp"
#include "fxtsmc/sliding.hpp"
#include "fxtsmc/system.hpp"
#include "fxtsmc/types.hpp"

namespace fxt {

enum class ControllerMode { known_model, gp_based, open_loop };

inline const char* to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::gp_based: return "gp-based";
    case ControllerMode::open_loop: return "open-loop";
    default: return "known-model";
  }
}

/// Everything one closed-loop run needs.
///
/// With `substepping` on, each grid step of length h is split into explicit
/// sub-steps no longer than the closed-loop step limit (see
/// controller_step_limit and SystemModel::step_limit). Near the sliding
/// manifold the limit is >= h, so the loop reduces to plain fixed-step
/// integration; sub-steps only occur in the stiff exp(z^2)/exp(s^2)
/// far-field. The grid and the log stay uniform either way.
template <typename Scalar>
struct Scenario {
  SystemModel<Scalar> system;
  ReferenceSignal<Scalar> reference;
  ControllerMode mode = ControllerMode::known_model;
  std::vector<ControllerParams<Scalar>> params;
  std::shared_ptr<const DriftModel<Scalar>> gp;
  Vector<Scalar> x0;
  StepConfig<Scalar> step;
  Scalar settle_threshold = Scalar(1e-2);

  bool substepping = true;
  Scalar substep_safety = Scalar(0.5);
  std::size_t max_substeps = 50'000'000;
  std::size_t log_every = 1;

  /// Learned-drift bounds: delta_f_bar_i = max over the logged states of
  /// chi_i sigma_i(x) when `error_bound` is set, else `delta_f_bar`, else 0.
  std::optional<ErrorBoundConfig<Scalar>> error_bound;
  std::optional<Vector<Scalar>> delta_f_bar;
  SlidingBoundVariant bound_variant = SlidingBoundVariant::lemma3;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(system.n); }

  void validate() const {
    const Eigen::Index n = dim();
    if (n < 1) throw ParameterError("scenario: system dimension must be >= 1");
    if (!system.drift || !system.gain) throw ParameterError("scenario: system functions missing");
    if (!reference.value || !reference.derivative)
      throw ParameterError("scenario: reference signal missing");
    if (x0.size() != n) throw ParameterError("scenario: x0 dimension does not match the system");
    if (!x0.allFinite()) throw ParameterError("scenario: x0 must be finite");
    step.validate();
    if (!(settle_threshold > Scalar(0))) throw ParameterError("settling threshold must be > 0");
    if (!(substep_safety > Scalar(0) && substep_safety <= Scalar(1)))
      throw ParameterError("substep safety factor must lie in (0, 1]");
    if (log_every < 1) throw ParameterError("log_every must be >= 1");
    if (mode != ControllerMode::open_loop || !params.empty()) {
      if (static_cast<Eigen::Index>(params.size()) != n)
        throw ParameterError("scenario: controller channel count does not match the system");
      for (std::size_t i = 0; i < params.size(); ++i)
        detail::with_channel(i, [&] { params[i].validate(); });
    }
    if (mode == ControllerMode::known_model) validate_known_model<Scalar>(params);
    if (mode == ControllerMode::gp_based) {
      if (!gp || gp->empty()) throw UnfitModelError("gp-based mode requires fitted drift models");
      if (static_cast<Eigen::Index>(gp->size()) != n)
        throw ParameterError("scenario: drift model channel count does not match the system");
    }
    if (error_bound && error_bound->chi.size() != n)
      throw ParameterError("scenario: chi has wrong channel count");
    if (delta_f_bar && delta_f_bar->size() != n)
      throw ParameterError("scenario: delta_f_bar has wrong channel count");
  }
};

using Scenariod = Scenario<double>;

/// Uniformly sampled closed-loop log. Column k of each matrix is sample k.
template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> t;
  Matrix<Scalar> x, xd, z, s, u, d, fhat;
  bool has_fhat = false;
  Scalar step_size = Scalar(0);
  IntegrationMethod method = IntegrationMethod::explicit_euler;

  Eigen::Index dim() const { return x.rows(); }
  std::size_t size() const { return t.size(); }

  /// V_s = s^2 / 2 of channel i at sample k.
  Scalar lyapunov(Eigen::Index i, std::size_t k) const {
    const Scalar v = s(i, static_cast<Eigen::Index>(k));
    return v * v / Scalar(2);
  }
};

using Trajectoryd = Trajectory<double>;

namespace detail {

template <typename Scalar>
ControlTerms<Scalar> evaluate_controller(const Scenario<Scalar>& sc, const Vector<Scalar>& x,
                                         Scalar t, const SlidingState<Scalar>& sstate) {
  switch (sc.mode) {
    case ControllerMode::known_model:
      return control_terms(x, t, sc.system.eval_drift(x), sc.system.eval_gain(x), sc.reference,
                           std::span<const ControllerParams<Scalar>>(sc.params), sstate);
    case ControllerMode::gp_based:
      return control_terms(x, t, estimate_drift(*sc.gp, x), sc.system.eval_gain(x), sc.reference,
                           std::span<const ControllerParams<Scalar>>(sc.params), sstate);
    case ControllerMode::open_loop:
    default: {
      ControlTerms<Scalar> out;
      out.z = x - sc.reference.value(t);
      if (sc.params.empty()) {
        out.s = out.z;
      } else {
        out.s.resize(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i)
          out.s[i] = sliding_value(out.z[i], sstate.integral[i],
                                   sc.params[static_cast<std::size_t>(i)].sliding);
      }
      out.u = Vector<Scalar>::Zero(x.size());
      return out;
    }
  }
}

}  // namespace detail

/// Runs the fixed-step closed loop described by `sc`.
///
/// Per grid step: evaluate z, s and u from the running sliding state, log,
/// then advance the plant with u held and the sliding integral with the same
/// (explicit-Euler) step. Deterministic for a fixed scenario.
template <typename Scalar>
Trajectory<Scalar> simulate(const Scenario<Scalar>& sc) {
  sc.validate();
  const Eigen::Index n = sc.dim();
  const Scalar h = sc.step.step_size;
  const std::size_t steps = sc.step.steps();
  const std::vector<SlidingParams<Scalar>> sliding =
      sliding_params_of(std::span<const ControllerParams<Scalar>>(sc.params));
  const bool has_sliding = !sliding.empty();
  const bool log_fhat = sc.mode == ControllerMode::gp_based;

  const std::size_t samples = steps / sc.log_every + 1 + (steps % sc.log_every ? 1 : 0);
  Trajectory<Scalar> traj;
  traj.t.reserve(samples);
  for (auto* m : {&traj.x, &traj.xd, &traj.z, &traj.s, &traj.u, &traj.d})
    m->resize(n, static_cast<Eigen::Index>(samples));
  if (log_fhat) traj.fhat.resize(n, static_cast<Eigen::Index>(samples));
  traj.has_fhat = log_fhat;
  traj.step_size = h;
  traj.method = sc.step.method;

  Vector<Scalar> x = sc.x0;
  SlidingState<Scalar> sstate = SlidingState<Scalar>::zero(n);

  for (std::size_t k = 0;; ++k) {
    const Scalar t = sc.step.time_at(k);
    ControlTerms<Scalar> terms = detail::evaluate_controller(sc, x, t, sstate);
    const Vector<Scalar> d = sc.system.eval_perturbation(t);
    sc.system.check_perturbation_bound(d, t);

    if (k % sc.log_every == 0 || k == steps) {
      const auto col = static_cast<Eigen::Index>(traj.t.size());
      traj.t.push_back(t);
      traj.x.col(col) = x;
      traj.xd.col(col) = sc.reference.value(t);
      traj.z.col(col) = terms.z;
      traj.s.col(col) = terms.s;
      traj.u.col(col) = terms.u;
      traj.d.col(col) = d;
      if (log_fhat) traj.fhat.col(col) = terms.drift;
    }
    if (k == steps) break;

    Scalar local_t = t;
    Scalar remaining = h;
    std::size_t substeps = 0;
    bool first = true;
    while (remaining > Scalar(0)) {
      if (!first) terms = detail::evaluate_controller(sc, x, local_t, sstate);
      first = false;
      Scalar hs = remaining;
      if (sc.substepping) {
        Scalar limit = sc.system.max_step(x, h);
        if (has_sliding && sc.mode != ControllerMode::open_loop)
          limit = std::min(limit, controller_step_limit(terms.z, terms.s,
                                                        std::span<const ControllerParams<Scalar>>(sc.params),
                                                        h, sc.substep_safety));
        if (limit < hs) hs = limit;
      }
      const Vector<Scalar> u = terms.u;
      try {
        x = integrate_step(
            x, [&](const Vector<Scalar>& v, Scalar tau) { return eval_dynamics(sc.system, v, u, tau); },
            local_t, hs, sc.step.method);
      } catch (const EvaluationError& e) {
        // Non-finite dynamics from a finite state: the run has blown up.
        throw SimulationDivergedError(static_cast<double>(local_t), 0,
                                      std::string("simulation diverged: ") + e.what());
      }
      detail::check_finite(x, local_t + hs, "state");
      if (has_sliding)
        sstate = advance(sstate, terms.z, std::span<const SlidingParams<Scalar>>(sliding), hs);
      if (hs >= remaining) {
        remaining = Scalar(0);
      } else {
        remaining -= hs;
        local_t += hs;
      }
      if (++substeps > sc.max_substeps) {
        std::ostringstream os;
        os << "simulation diverged: more than " << sc.max_substeps << " sub-steps in the step at t = "
           << t;
        throw SimulationDivergedError(static_cast<double>(t), 0, os.str());
      }
    }
    sstate.t = sc.step.time_at(k + 1);
  }
  return traj;
}

enum class SettlingSignal { error, sliding };

/// Earliest grid time after which |signal_i| stays below `threshold` until the
/// end of the log; nullopt when the last sample is still above it.
template <typename Scalar>
std::vector<std::optional<Scalar>> measure_settling(const Trajectory<Scalar>& traj,
                                                    SettlingSignal which, Scalar threshold) {
  using std::abs;
  if (!(threshold > Scalar(0))) throw ParameterError("settling threshold must be > 0");
  const Matrix<Scalar>& sig = which == SettlingSignal::error ? traj.z : traj.s;
  const auto K = static_cast<Eigen::Index>(traj.size());
  std::vector<std::optional<Scalar>> out(static_cast<std::size_t>(sig.rows()));
  for (Eigen::Index i = 0; i < sig.rows(); ++i) {
    Eigen::Index last_above = -1;
    for (Eigen::Index k = K - 1; k >= 0; --k)
      if (!(abs(sig(i, k)) < threshold)) {
        last_above = k;
        break;
      }
    if (last_above == K - 1) continue;
    out[static_cast<std::size_t>(i)] = traj.t[static_cast<std::size_t>(last_above + 1)];
  }
  return out;
}

/// Largest chi_i sigma_i(x) over the logged states; the learned-drift
/// counterpart of a model-error bound.
template <typename Scalar>
Vector<Scalar> max_error_bound_along(const Trajectory<Scalar>& traj, const DriftModel<Scalar>& gp,
                                     const ErrorBoundConfig<Scalar>& cfg) {
  Vector<Scalar> best = Vector<Scalar>::Zero(traj.dim());
  for (std::size_t k = 0; k < traj.size(); ++k)
    best = best.cwiseMax(drift_error_bound(gp, Vector<Scalar>(traj.x.col(static_cast<Eigen::Index>(k))), cfg));
  return best;
}

/// Measured settling times next to the theoretical bounds of one run.
template <typename Scalar>
struct RunSummary {
  Scalar threshold = Scalar(0);
  std::vector<std::optional<Scalar>> error_settling;
  std::vector<std::optional<Scalar>> sliding_settling;
  std::optional<Scalar> error_settling_max;    ///< nullopt if any channel never settles
  std::optional<Scalar> sliding_settling_max;
  std::optional<BoundReport<Scalar>> bounds;
  std::string bound_error;                      ///< why `bounds` is absent, if it is
  std::optional<Vector<Scalar>> delta_f_bar;
  bool error_within_bound = false;              ///< every z_i settled by T_max
  bool sliding_within_bound = false;            ///< every s_i settled by T_s
  Scalar max_abs_u = Scalar(0);
  Scalar max_abs_g = Scalar(0);
  Vector<Scalar> chatter;                       ///< max |s_i| after s_i settled
  Scalar chatter_floor = Scalar(0);             ///< 10 h max|u| max|g|
  std::size_t lyapunov_violations = 0;
  Scalar t_end = Scalar(0);
};

using RunSummaryd = RunSummary<double>;

/// Counts samples k with |s_i(k)| > floor but s_i(k+1)^2 > s_i(k)^2.
template <typename Scalar>
std::size_t count_lyapunov_violations(const Trajectory<Scalar>& traj, Scalar floor) {
  using std::abs;
  std::size_t violations = 0;
  for (Eigen::Index i = 0; i < traj.dim(); ++i)
    for (std::size_t k = 0; k + 1 < traj.size(); ++k)
      if (abs(traj.s(i, static_cast<Eigen::Index>(k))) > floor &&
          traj.lyapunov(i, k + 1) > traj.lyapunov(i, k))
        ++violations;
  return violations;
}

template <typename Scalar>
RunSummary<Scalar> summarize(const Scenario<Scalar>& sc, const Trajectory<Scalar>& traj) {
  using std::abs;
  RunSummary<Scalar> r;
  r.threshold = sc.settle_threshold;
  r.t_end = traj.t.empty() ? Scalar(0) : traj.t.back();
  r.error_settling = measure_settling(traj, SettlingSignal::error, sc.settle_threshold);
  r.sliding_settling = measure_settling(traj, SettlingSignal::sliding, sc.settle_threshold);

  auto max_of = [](const std::vector<std::optional<Scalar>>& v) -> std::optional<Scalar> {
    Scalar m = Scalar(0);
    for (const auto& e : v) {
      if (!e) return std::nullopt;
      m = std::max(m, *e);
    }
    return m;
  };
  r.error_settling_max = max_of(r.error_settling);
  r.sliding_settling_max = max_of(r.sliding_settling);

  if (sc.mode != ControllerMode::open_loop) {
    try {
      const std::span<const ControllerParams<Scalar>> params(sc.params);
      if (sc.mode == ControllerMode::known_model) {
        r.bounds = bound_report(params);
      } else {
        Vector<Scalar> df = Vector<Scalar>::Zero(sc.dim());
        if (sc.error_bound)
          df = max_error_bound_along(traj, *sc.gp, *sc.error_bound);
        else if (sc.delta_f_bar)
          df = *sc.delta_f_bar;
        r.delta_f_bar = df;
        r.bounds = bound_report(params, std::optional<std::span<const Scalar>>(
                                            std::span<const Scalar>(df.data(), static_cast<std::size_t>(df.size()))),
                                sc.bound_variant);
      }
    } catch (const ParameterError& e) {
      r.bound_error = e.what();
    }
  }
  if (r.bounds) {
    r.error_within_bound = r.error_settling_max && *r.error_settling_max <= r.bounds->T_max;
    r.sliding_within_bound = r.sliding_settling_max && *r.sliding_settling_max <= r.bounds->T_s_max;
  }

  r.max_abs_u = traj.u.size() ? traj.u.cwiseAbs().maxCoeff() : Scalar(0);
  for (std::size_t k = 0; k < traj.size(); ++k)
    r.max_abs_g = std::max(
        r.max_abs_g,
        sc.system.gain(Vector<Scalar>(traj.x.col(static_cast<Eigen::Index>(k)))).cwiseAbs().maxCoeff());
  r.chatter_floor = Scalar(10) * sc.step.step_size * r.max_abs_u * r.max_abs_g;
  // Decrease of V_s is a property of the closed loop; nothing to check open loop.
  if (sc.mode != ControllerMode::open_loop)
    r.lyapunov_violations = count_lyapunov_violations(traj, r.chatter_floor);

  r.chatter = Vector<Scalar>::Zero(traj.dim());
  for (Eigen::Index i = 0; i < traj.dim(); ++i) {
    const auto& settled = r.sliding_settling[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < traj.size(); ++k)
      if (!settled || traj.t[k] >= *settled)
        r.chatter[i] = std::max(r.chatter[i], abs(traj.s(i, static_cast<Eigen::Index>(k))));
  }
  return r;
}

/// Raises alpha2_i to d_bar_i + delta_f_bar_i + margin where the learned-drift
/// condition fails, re-measuring delta_f_bar along the new closed loop until it
/// holds. Returns the number of simulations used; throws GainTooSmallError when
/// `max_rounds` is not enough.
template <typename Scalar>
std::size_t raise_alpha2_for_learned_drift(Scenario<Scalar>& sc, Scalar margin,
                                           std::size_t max_rounds = 8) {
  if (sc.mode != ControllerMode::gp_based) throw ParameterError("alpha2 raising needs gp-based mode");
  if (!(margin > Scalar(0))) throw ParameterError("alpha2 margin must be > 0");
  for (std::size_t round = 1; round <= max_rounds; ++round) {
    const Trajectory<Scalar> traj = simulate(sc);
    Vector<Scalar> df = Vector<Scalar>::Zero(sc.dim());
    if (sc.error_bound)
      df = max_error_bound_along(traj, *sc.gp, *sc.error_bound);
    else if (sc.delta_f_bar)
      df = *sc.delta_f_bar;
    bool changed = false;
    for (Eigen::Index i = 0; i < sc.dim(); ++i) {
      auto& c = sc.params[static_cast<std::size_t>(i)];
      if (!(c.alpha2 > c.d_bar + df[i])) {
        c.alpha2 = c.d_bar + df[i] + margin;
        changed = true;
      }
    }
    if (!changed) return round;
  }
  throw GainTooSmallError("alpha2 did not stabilise within the allowed rounds");
}

/// One Monte-Carlo run: its initial state and either a summary or the error text.
template <typename Scalar>
struct MonteCarloRun {
  std::size_t index = 0;
  Vector<Scalar> x0;
  std::optional<RunSummary<Scalar>> summary;
  std::string error;
};

template <typename Scalar>
struct MonteCarloResult {
  std::vector<MonteCarloRun<Scalar>> runs;
  std::size_t failures = 0;
  std::size_t settled = 0;                ///< runs whose every channel settled
  std::optional<Scalar> max_settling;     ///< over settled runs
  Scalar bound_fraction = Scalar(0);      ///< runs settled within their T_max / all runs
  Scalar max_chatter = Scalar(0);
  std::size_t lyapunov_violations = 0;
};

/// Box of initial states, one [lo, hi] interval per channel.
template <typename Scalar>
using Box = std::vector<std::pair<Scalar, Scalar>>;

/// Draws `runs` initial states uniformly from `box` with std::mt19937_64(seed),
/// run-major, so run i's state does not depend on the thread count.
template <typename Scalar>
std::vector<Vector<Scalar>> sample_initial_states(const Box<Scalar>& box, std::size_t runs,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vector<Scalar>> out;
  out.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    Vector<Scalar> x(static_cast<Eigen::Index>(box.size()));
    for (std::size_t d = 0; d < box.size(); ++d) {
      std::uniform_real_distribution<Scalar> u(box[d].first, box[d].second);
      x[static_cast<Eigen::Index>(d)] = u(rng);
    }
    out.push_back(std::move(x));
  }
  return out;
}

/// Observer called once per successful run; invoked from worker threads.
template <typename Scalar>
using RunObserver =
    std::function<void(std::size_t, const Trajectory<Scalar>&, const RunSummary<Scalar>&)>;

/// Simulates `tmpl` from `runs` seeded initial states in `ic_box`. Run errors
/// are recorded per run and never abort the batch. Results are ordered by run
/// index and independent of `threads`.
template <typename Scalar>
MonteCarloResult<Scalar> run_monte_carlo(const Scenario<Scalar>& tmpl, const Box<Scalar>& ic_box,
                                         std::size_t runs, std::uint64_t seed,
                                         std::size_t threads = 1,
                                         const RunObserver<Scalar>& observer = nullptr) {
  if (runs < 1) throw ParameterError("monte carlo: runs must be >= 1");
  if (static_cast<Eigen::Index>(ic_box.size()) != tmpl.dim())
    throw ParameterError("monte carlo: initial-condition box dimension mismatch");
  for (const auto& [lo, hi] : ic_box)
    if (!(hi >= lo)) throw ParameterError("monte carlo: box intervals need lo <= hi");

  MonteCarloResult<Scalar> result;
  const auto states = sample_initial_states(ic_box, runs, seed);
  result.runs.resize(runs);

  auto work = [&](std::size_t i) {
    MonteCarloRun<Scalar>& run = result.runs[i];
    run.index = i;
    run.x0 = states[i];
    try {
      Scenario<Scalar> sc = tmpl;
      sc.x0 = states[i];
      const Trajectory<Scalar> traj = simulate(sc);
      run.summary = summarize(sc, traj);
      if (observer) observer(i, traj, *run.summary);
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  };

  threads = std::max<std::size_t>(1, std::min(threads, runs));
  if (threads == 1) {
    for (std::size_t i = 0; i < runs; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < runs; i = next++) work(i);
      });
  }

  std::size_t within = 0;
  for (const auto& run : result.runs) {
    if (!run.summary) {
      ++result.failures;
      continue;
    }
    const auto& s = *run.summary;
    if (s.error_settling_max) {
      ++result.settled;
      result.max_settling = std::max(result.max_settling.value_or(Scalar(0)), *s.error_settling_max);
    }
    if (s.error_within_bound) ++within;
    result.max_chatter = std::max(result.max_chatter, s.chatter.size() ? s.chatter.maxCoeff() : Scalar(0));
    result.lyapunov_violations += s.lyapunov_violations;
  }
  result.bound_fraction = static_cast<Scalar>(within) / static_cast<Scalar>(runs);
  return result;
}

}  // namespace fxt
