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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fxt {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A gain, exponent, bound argument or configuration value is outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A reaching gain does not dominate the perturbation (and model-error) bound.
class GainTooSmallError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// g_i(x) evaluated to zero, so the control law cannot invert the input gain.
class SingularGainError : public Error {
 public:
  SingularGainError(std::size_t channel, const std::string& what)
      : Error(what), channel_(channel) {}
  std::size_t channel() const noexcept { return channel_; }

 private:
  std::size_t channel_;
};

/// A model function returned a non-finite component.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// The integrated state (or sliding accumulator) left the finite range.
class SimulationDivergedError : public Error {
 public:
  SimulationDivergedError(double t, std::size_t channel, const std::string& what)
      : Error(what), t_(t), channel_(channel) {}
  double time() const noexcept { return t_; }
  std::size_t channel() const noexcept { return channel_; }

 private:
  double t_;
  std::size_t channel_;
};

/// A declared perturbation bound |d_i(t)| <= d_bar_i was violated on the grid.
class PerturbationBoundError : public Error {
 public:
  using Error::Error;
};

/// Gram matrix could not be factorized even after jitter escalation.
class IllConditionedDataError : public Error {
 public:
  IllConditionedDataError(std::size_t first, std::size_t second, const std::string& what)
      : Error(what), first_(first), second_(second) {}
  std::size_t first_row() const noexcept { return first_; }
  std::size_t second_row() const noexcept { return second_; }

 private:
  std::size_t first_;
  std::size_t second_;
};

/// A GP-based controller was requested without fitted drift models.
class UnfitModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace fxt
