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

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "fxtsmc/controller.hpp"
#include "fxtsmc/errors.hpp"
#include "fxtsmc/gp.hpp"
#include "fxtsmc/sim.hpp"

namespace fxt::io {

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// 17 significant digits, enough to round-trip a double.
std::string format_real(double v);

/// Header `t,x1..xn,xd1..xdn,z1..zn,s1..sn,u1..un,d1..dn[,fhat1..fhatn]`,
/// then one row per sample.
void write_trajectory_csv(std::ostream& os, const Trajectoryd& traj);
void write_trajectory_csv(const std::string& path, const Trajectoryd& traj);

nlohmann::json to_json(const BoundReportd& report);
nlohmann::json to_json(const RunSummaryd& summary);
nlohmann::json to_json(const MonteCarloRun<double>& run);
nlohmann::json aggregate_to_json(const MonteCarloResult<double>& result);

/// Header `x1..xn,y1..ym`, one row per sample. Leading `#` lines are skipped on read.
void write_dataset_csv(std::ostream& os, const GPDatasetd& data);
GPDatasetd read_dataset_csv(std::istream& is);

/// Seed, noise level, region, size and kernel of a generated dataset.
nlohmann::json dataset_metadata(const GPDatasetd& data, const KernelConfig<double>& kernel);

/// Writes `data` to `<prefix>.csv` and its metadata, merged with `extra`, to `<prefix>.json`.
void save_dataset(const std::string& prefix, const GPDatasetd& data,
                  const KernelConfig<double>& kernel, const nlohmann::json& extra = {});

/// Reads `<path>` (CSV). Picks up noise_std/seed/region from a `.json`
/// sidecar with the same stem when present.
GPDatasetd load_dataset(const std::string& path);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace fxt::io
