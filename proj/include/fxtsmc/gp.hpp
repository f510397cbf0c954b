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
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fxtsmc/errors.hpp"
#include "fxtsmc/system.hpp"
#include "fxtsmc/types.hpp"

namespace fxt {

enum class KernelFamily {
  exponential,          ///< exp(-l ||x - x'||)
  squared_exponential,  ///< exp(-||x - x'||^2 / (2 l^2))
};

inline const char* to_string(KernelFamily f) {
  return f == KernelFamily::squared_exponential ? "squared-exponential" : "exponential";
}

template <typename Scalar>
struct KernelConfig {
  KernelFamily family = KernelFamily::exponential;
  Scalar length_scale = Scalar(1);

  void validate() const {
    if (!(length_scale > Scalar(0))) throw ParameterError("kernel length scale must be > 0");
  }
};

/// Stationary unit-variance kernel; k(x, x) = 1.
template <typename Scalar, typename DerivedA, typename DerivedB>
Scalar kernel_eval(const KernelConfig<Scalar>& cfg, const Eigen::MatrixBase<DerivedA>& x,
                   const Eigen::MatrixBase<DerivedB>& y) {
  using std::exp;
  using std::sqrt;
  const Scalar r2 = (x - y).squaredNorm();
  if (cfg.family == KernelFamily::squared_exponential)
    return exp(-r2 / (Scalar(2) * cfg.length_scale * cfg.length_scale));
  return exp(-cfg.length_scale * sqrt(r2));
}

/// Shared-input training data for per-channel scalar GPs: one row per sample,
/// `targets.col(i)` holds y_i = f_i(x) + w.
template <typename Scalar>
struct GPDataset {
  Matrix<Scalar> inputs;
  Matrix<Scalar> targets;
  Scalar noise_std = Scalar(0);
  std::uint64_t seed = 0;
  std::vector<std::pair<Scalar, Scalar>> region;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index input_dim() const { return inputs.cols(); }
  Eigen::Index output_dim() const { return targets.cols(); }

  void validate() const {
    if (inputs.rows() < 1) throw ParameterError("GP dataset needs at least one sample");
    if (targets.rows() != inputs.rows())
      throw ParameterError("GP dataset: input and target row counts differ");
    if (!(noise_std >= Scalar(0))) throw ParameterError("GP noise std must be >= 0");
    if (!inputs.allFinite() || !targets.allFinite())
      throw ParameterError("GP dataset contains non-finite entries");
  }
};

using GPDatasetd = GPDataset<double>;

namespace detail {

/// Indices of the closest pair of rows (Euclidean), i < j.
template <typename Scalar>
std::pair<std::size_t, std::size_t> closest_rows(const Matrix<Scalar>& X) {
  std::pair<std::size_t, std::size_t> best{0, X.rows() > 1 ? 1 : 0};
  Scalar best_d = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      const Scalar d = (X.row(i) - X.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
      }
    }
  return best;
}

}  // namespace detail

/// Exact zero-mean GP regression for one output channel.
///
/// Stores the Cholesky factor of K + (sigma_F^2 + jitter) I and the weights
/// (K + sigma_F^2 I)^{-1} y. With sigma_F = 0 the jitter only stabilizes the
/// factorization: weights and variances are polished by iterative refinement
/// against the un-jittered Gram matrix, so the posterior interpolates the
/// training targets.
template <typename Scalar>
class GaussianProcess {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  static constexpr Scalar kInitialJitter = Scalar(1e-10);
  static constexpr Scalar kMaxJitter = Scalar(1e-6);

  GaussianProcess() = default;

  /// Builds the Gram matrix and factorizes it, escalating the jitter by 10x
  /// from kInitialJitter to kMaxJitter when sigma_F = 0 (or the plain
  /// factorization fails). A factorization is accepted when every Cholesky
  /// pivot exceeds 10x the jitter in use.
  static GaussianProcess fit(const MatrixType& inputs, const VectorType& targets, Scalar noise_std,
                             const KernelConfig<Scalar>& cfg) {
    cfg.validate();
    if (inputs.rows() < 1) throw ParameterError("GP fit needs at least one sample");
    if (targets.size() != inputs.rows())
      throw ParameterError("GP fit: target count does not match input rows");
    if (!(noise_std >= Scalar(0))) throw ParameterError("GP noise std must be >= 0");

    GaussianProcess gp;
    gp.inputs_ = inputs;
    gp.targets_ = targets;
    gp.cfg_ = cfg;
    gp.noise_std_ = noise_std;

    const Eigen::Index N = inputs.rows();
    gp.gram_.resize(N, N);
    for (Eigen::Index j = 0; j < N; ++j) {
      gp.gram_(j, j) = kernel_eval(cfg, inputs.row(j), inputs.row(j));
      for (Eigen::Index k = j + 1; k < N; ++k) {
        const Scalar v = kernel_eval(cfg, inputs.row(j), inputs.row(k));
        gp.gram_(j, k) = v;
        gp.gram_(k, j) = v;
      }
    }

    const Scalar noise_var = noise_std * noise_std;
    std::vector<Scalar> schedule;
    if (noise_var > Scalar(0)) schedule.push_back(Scalar(0));
    for (Scalar j = kInitialJitter; j <= kMaxJitter * Scalar(1.0001); j *= Scalar(10))
      schedule.push_back(j);

    bool ok = false;
    for (Scalar jitter : schedule) {
      MatrixType A = gp.gram_;
      A.diagonal().array() += noise_var + jitter;
      gp.llt_.compute(A);
      if (gp.llt_.info() != Eigen::Success) continue;
      const Scalar min_pivot = gp.llt_.matrixLLT().diagonal().array().square().minCoeff();
      if (jitter > Scalar(0) && !(min_pivot > Scalar(10) * jitter)) continue;
      gp.jitter_ = jitter;
      ok = true;
      break;
    }
    if (!ok) {
      const auto [a, b] = detail::closest_rows(inputs);
      std::ostringstream os;
      os << "ill-conditioned GP data: Gram matrix not factorizable with jitter up to "
         << kMaxJitter << "; near-duplicate inputs at rows " << a << " and " << b;
      throw IllConditionedDataError(a, b, os.str());
    }

    gp.refine_ = noise_var == Scalar(0);
    gp.weights_ = gp.solve(targets);
    return gp;
  }

  /// Posterior mean k(x)^T (K + sigma_F^2 I)^{-1} y.
  template <typename Derived>
  Scalar mean(const Eigen::MatrixBase<Derived>& x) const {
    return cross_covariance(x).dot(weights_);
  }

  /// Posterior variance, floored at zero.
  template <typename Derived>
  Scalar variance(const Eigen::MatrixBase<Derived>& x) const {
    const VectorType kx = cross_covariance(x);
    const Scalar prior = kernel_eval(cfg_, x, x);
    Scalar reduction;
    if (refine_) {
      reduction = kx.dot(solve(kx));
    } else {
      reduction = llt_.matrixL().solve(kx).squaredNorm();
    }
    const Scalar v = prior - reduction;
    return v > Scalar(0) ? v : Scalar(0);
  }

  template <typename Derived>
  Scalar stddev(const Eigen::MatrixBase<Derived>& x) const {
    using std::sqrt;
    return sqrt(variance(x));
  }

  /// chi * sigma(x), the high-probability bound on |f(x) - mean(x)|.
  template <typename Derived>
  Scalar error_bound(const Eigen::MatrixBase<Derived>& x, Scalar chi) const {
    if (!(chi > Scalar(0))) throw ParameterError("error-bound constant chi must be > 0");
    return chi * stddev(x);
  }

  template <typename Derived>
  VectorType cross_covariance(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != inputs_.cols()) throw ParameterError("GP query dimension mismatch");
    VectorType k(inputs_.rows());
    for (Eigen::Index j = 0; j < inputs_.rows(); ++j)
      k[j] = kernel_eval(cfg_, inputs_.row(j).transpose(), x);
    return k;
  }

  const MatrixType& inputs() const { return inputs_; }
  const VectorType& targets() const { return targets_; }
  const VectorType& weights() const { return weights_; }
  const MatrixType& gram() const { return gram_; }
  const KernelConfig<Scalar>& kernel() const { return cfg_; }
  Scalar noise_std() const { return noise_std_; }
  Scalar jitter() const { return jitter_; }
  Eigen::Index size() const { return inputs_.rows(); }
  Eigen::Index input_dim() const { return inputs_.cols(); }

 private:
  /// (K + sigma_F^2 I)^{-1} b, refined when the factor carries jitter only.
  VectorType solve(const VectorType& b) const {
    VectorType x = llt_.solve(b);
    if (!refine_) return x;
    Scalar last = std::numeric_limits<Scalar>::infinity();
    for (int it = 0; it < 8; ++it) {
      const VectorType r = b - gram_ * x;
      const VectorType dx = llt_.solve(r);
      const Scalar step = dx.template lpNorm<Eigen::Infinity>();
      if (!(step < last)) break;
      x += dx;
      last = step;
      if (step <= std::numeric_limits<Scalar>::epsilon() * x.template lpNorm<Eigen::Infinity>())
        break;
    }
    return x;
  }

  MatrixType inputs_;
  VectorType targets_;
  KernelConfig<Scalar> cfg_;
  Scalar noise_std_ = Scalar(0);
  Scalar jitter_ = Scalar(0);
  bool refine_ = false;
  MatrixType gram_;
  Eigen::LLT<MatrixType> llt_;
  VectorType weights_;
};

using GaussianProcessd = GaussianProcess<double>;

/// One scalar GP per state channel, all sharing the input set.
template <typename Scalar>
using DriftModel = std::vector<GaussianProcess<Scalar>>;

template <typename Scalar>
GaussianProcess<Scalar> gp_fit(const GPDataset<Scalar>& data, const KernelConfig<Scalar>& cfg,
                               Eigen::Index channel = 0) {
  data.validate();
  if (channel < 0 || channel >= data.output_dim())
    throw ParameterError("GP fit: channel index out of range");
  return GaussianProcess<Scalar>::fit(data.inputs, data.targets.col(channel), data.noise_std, cfg);
}

template <typename Scalar>
DriftModel<Scalar> fit_drift_model(const GPDataset<Scalar>& data, const KernelConfig<Scalar>& cfg) {
  DriftModel<Scalar> models;
  for (Eigen::Index c = 0; c < data.output_dim(); ++c) models.push_back(gp_fit(data, cfg, c));
  return models;
}

template <typename Scalar, typename Derived>
Scalar gp_mean(const GaussianProcess<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  return model.mean(x);
}

template <typename Scalar, typename Derived>
Scalar gp_variance(const GaussianProcess<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  return model.variance(x);
}

template <typename Scalar, typename Derived>
Scalar gp_error_bound(const GaussianProcess<Scalar>& model, const Eigen::MatrixBase<Derived>& x,
                      Scalar chi) {
  return model.error_bound(x, chi);
}

/// Per-channel constants chi_i of |f_i - mean_i| <= chi_i sigma_i. The
/// confidence level is informational only.
template <typename Scalar>
struct ErrorBoundConfig {
  Vector<Scalar> chi;
  Scalar confidence = Scalar(0.95);

  static ErrorBoundConfig uniform(Eigen::Index n, Scalar chi_value) {
    return {Vector<Scalar>::Constant(n, chi_value), Scalar(0.95)};
  }
};

/// Vector of posterior means, the learned replacement of f(x).
template <typename Scalar>
Vector<Scalar> estimate_drift(const DriftModel<Scalar>& models, const Vector<Scalar>& x) {
  if (models.empty()) throw UnfitModelError("drift estimate requested from an empty model");
  if (static_cast<Eigen::Index>(models.size()) != x.size()) {
    std::ostringstream os;
    os << "drift model has " << models.size() << " channels, state has " << x.size();
    throw ParameterError(os.str());
  }
  Vector<Scalar> f(x.size());
  for (std::size_t i = 0; i < models.size(); ++i) f[static_cast<Eigen::Index>(i)] = models[i].mean(x);
  return f;
}

template <typename Scalar>
Vector<Scalar> drift_error_bound(const DriftModel<Scalar>& models, const Vector<Scalar>& x,
                                 const ErrorBoundConfig<Scalar>& cfg) {
  if (cfg.chi.size() != static_cast<Eigen::Index>(models.size()))
    throw ParameterError("error-bound config channel count mismatch");
  Vector<Scalar> b(x.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    b[k] = models[i].error_bound(x, cfg.chi[k]);
  }
  return b;
}

/// Samples N inputs uniformly in the box `region` and records
/// y_i = f_i(x) + w, w ~ N(0, sigma_F^2). All inputs are drawn first, then
/// the noise, from one std::mt19937_64 seeded with `seed`.
template <typename Scalar>
GPDataset<Scalar> generate_training_data(const SystemModel<Scalar>& model, Eigen::Index N,
                                         const std::vector<std::pair<Scalar, Scalar>>& region,
                                         Scalar noise_std, std::uint64_t seed) {
  if (N < 1) throw ParameterError("training set size N must be >= 1");
  if (region.size() != model.n) throw ParameterError("training region dimension mismatch");
  for (const auto& [lo, hi] : region)
    if (!(hi > lo)) throw ParameterError("training region must be non-degenerate (lo < hi)");
  if (!(noise_std >= Scalar(0))) throw ParameterError("GP noise std must be >= 0");

  std::mt19937_64 rng(seed);
  GPDataset<Scalar> data;
  const auto n = static_cast<Eigen::Index>(model.n);
  data.inputs.resize(N, n);
  for (Eigen::Index j = 0; j < N; ++j)
    for (Eigen::Index d = 0; d < n; ++d) {
      std::uniform_real_distribution<Scalar> u(region[static_cast<std::size_t>(d)].first,
                                               region[static_cast<std::size_t>(d)].second);
      data.inputs(j, d) = u(rng);
    }
  data.targets.resize(N, n);
  std::normal_distribution<Scalar> noise(Scalar(0), Scalar(1));
  for (Eigen::Index j = 0; j < N; ++j) {
    const Vector<Scalar> f = model.eval_drift(data.inputs.row(j).transpose());
    for (Eigen::Index d = 0; d < n; ++d)
      data.targets(j, d) = f[d] + (noise_std > Scalar(0) ? noise_std * noise(rng) : Scalar(0));
  }
  data.noise_std = noise_std;
  data.seed = seed;
  data.region = region;
  return data;
}

/// Root-mean-square of f(x) - mean(x) over the rows of `points`, all channels pooled.
template <typename Scalar>
Scalar rms_drift_error(const DriftModel<Scalar>& models, const SystemModel<Scalar>& model,
                       const Matrix<Scalar>& points) {
  using std::sqrt;
  Scalar acc = Scalar(0);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const Vector<Scalar> x = points.row(r).transpose();
    acc += (model.eval_drift(x) - estimate_drift(models, x)).squaredNorm();
  }
  return sqrt(acc / static_cast<Scalar>(points.rows() * points.cols()));
}

}  // namespace fxt
