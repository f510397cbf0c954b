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

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxtsmc/controller.hpp"
#include "fxtsmc/errors.hpp"
#include "fxtsmc/gp.hpp"
#include "fxtsmc/sim.hpp"
#include "fxtsmc/system.hpp"

namespace fxt::config {

/// Malformed JSON, unknown key, wrong type or out-of-domain value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct GenerateSpec {
  Eigen::Index n = 50;
  Box<double> region;
  double sigma_f = 0.0;
  std::uint64_t seed = 0;
};

struct GpSettings {
  KernelConfig<double> kernel;
  std::optional<std::string> dataset;  ///< CSV path; exclusive with `generate`
  std::optional<GenerateSpec> generate;
  Vectord chi;                         ///< per-channel error-bound constant
  std::optional<double> raise_alpha2_margin;
};

struct MonteCarloSettings {
  std::size_t runs = 30;
  Box<double> ic_box;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  double require_fraction = 1.0;
};

struct OutputSettings {
  std::string trajectory = "trajectory.csv";
  std::string summary = "summary.json";
  std::string dataset_prefix = "dataset";
  std::string runs = "runs.jsonl";
};

/// Fully parsed and validated experiment description.
struct ExperimentConfig {
  std::string system_name;
  double lemma2_alpha = 1.0;
  bool perturbed = true;
  SystemModeld system;

  std::string reference_type = "constant";
  ReferenceSignald reference;
  nlohmann::json reference_json;

  ControllerMode mode = ControllerMode::known_model;
  std::vector<ControllerParamsd> params;
  SlidingBoundVariant bound_variant = SlidingBoundVariant::lemma3;
  std::optional<Vectord> delta_f_bar;

  std::optional<GpSettings> gp;

  Vectord x0;
  StepConfig<double> step;
  double threshold = 1e-2;
  bool substepping = true;
  std::size_t log_every = 1;

  MonteCarloSettings montecarlo;
  OutputSettings output;

  /// Canonical JSON with every default filled in; re-parsing it yields the same config.
  nlohmann::json resolved() const;

  /// Scenario without drift models attached.
  Scenariod scenario() const;
};

/// Parses `text` as JSON. Throws ConfigError on syntax errors.
nlohmann::json parse_json(const std::string& text);

/// Validates the document against the schema and builds the experiment.
/// Gain inequalities are left to the consumers (bounds, simulate) so they can
/// be reported per channel.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Applies `dotted.path=value`; value is parsed as JSON, else taken as a string.
/// Array elements are addressed by index (`controller.channels.0.alpha2=5`).
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// "1,2,3" -> [1,2,3]
std::vector<double> parse_number_list(const std::string& text);

/// Loads the dataset or generates it, then fits one GP per channel.
std::shared_ptr<const DriftModel<double>> build_drift_model(const ExperimentConfig& cfg,
                                                            GPDatasetd* dataset_out = nullptr);

}  // namespace fxt::config
