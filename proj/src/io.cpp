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

#include "fxtsmc/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace fxt::io {

using nlohmann::json;

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectoryd& traj) {
  const Eigen::Index n = traj.dim();
  os << 't';
  auto header = [&](const char* prefix) {
    for (Eigen::Index i = 1; i <= n; ++i) os << ',' << prefix << i;
  };
  header("x");
  header("xd");
  header("z");
  header("s");
  header("u");
  header("d");
  if (traj.has_fhat) header("fhat");
  os << '\n';

  std::string line;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    line = format_real(traj.t[k]);
    auto row = [&](const Matrixd& m) {
      for (Eigen::Index i = 0; i < n; ++i) {
        line += ',';
        line += format_real(m(i, c));
      }
    };
    row(traj.x);
    row(traj.xd);
    row(traj.z);
    row(traj.s);
    row(traj.u);
    row(traj.d);
    if (traj.has_fhat) row(traj.fhat);
    line += '\n';
    os << line;
  }
}

void write_trajectory_csv(const std::string& path, const Trajectoryd& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_trajectory_csv(out, traj);
  if (!out) throw IoError("write to '" + path + "' failed");
}

namespace {

json vec(const Vectord& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json optional_times(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& e : v) a.push_back(e ? json(*e) : json(nullptr));
  return a;
}

}  // namespace

json to_json(const BoundReportd& r) {
  return {{"T_z", vec(r.T_z)},
          {"T_s", vec(r.T_s)},
          {"T_z_max", r.T_z_max},
          {"T_s_max", r.T_s_max},
          {"T_max", r.T_max},
          {"mode", r.learned_drift ? "learned-drift" : "known-model"},
          {"sliding_bound", r.learned_drift ? to_string(r.variant) : "lemma2"}};
}

json to_json(const RunSummaryd& s) {
  json j;
  j["threshold"] = s.threshold;
  j["t_end"] = s.t_end;
  j["error_settling"] = optional_times(s.error_settling);
  j["sliding_settling"] = optional_times(s.sliding_settling);
  j["error_settling_max"] = s.error_settling_max ? json(*s.error_settling_max) : json(nullptr);
  j["sliding_settling_max"] = s.sliding_settling_max ? json(*s.sliding_settling_max) : json(nullptr);
  j["bounds"] = s.bounds ? to_json(*s.bounds) : json(nullptr);
  if (!s.bound_error.empty()) j["bound_error"] = s.bound_error;
  if (s.delta_f_bar) j["delta_f_bar"] = vec(*s.delta_f_bar);
  j["error_within_bound"] = s.error_within_bound;
  j["sliding_within_bound"] = s.sliding_within_bound;
  j["max_abs_u"] = s.max_abs_u;
  j["max_abs_g"] = s.max_abs_g;
  j["chatter"] = vec(s.chatter);
  j["chatter_floor"] = s.chatter_floor;
  j["lyapunov_violations"] = s.lyapunov_violations;
  return j;
}

json to_json(const MonteCarloRun<double>& run) {
  json j;
  j["run"] = run.index;
  j["x0"] = vec(run.x0);
  if (run.summary)
    j["summary"] = to_json(*run.summary);
  else
    j["error"] = run.error;
  return j;
}

json aggregate_to_json(const MonteCarloResult<double>& r) {
  return {{"runs", r.runs.size()},
          {"failures", r.failures},
          {"settled", r.settled},
          {"max_settling", r.max_settling ? json(*r.max_settling) : json(nullptr)},
          {"bound_fraction", r.bound_fraction},
          {"max_chatter", r.max_chatter},
          {"lyapunov_violations", r.lyapunov_violations}};
}

void write_dataset_csv(std::ostream& os, const GPDatasetd& data) {
  for (Eigen::Index i = 0; i < data.input_dim(); ++i) os << (i ? "," : "") << 'x' << (i + 1);
  for (Eigen::Index i = 0; i < data.output_dim(); ++i) os << ",y" << (i + 1);
  os << '\n';
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index i = 0; i < data.input_dim(); ++i)
      os << (i ? "," : "") << format_real(data.inputs(r, i));
    for (Eigen::Index i = 0; i < data.output_dim(); ++i) os << ',' << format_real(data.targets(r, i));
    os << '\n';
  }
}

GPDatasetd read_dataset_csv(std::istream& is) {
  std::string line;
  do {
    if (!std::getline(is, line)) throw IoError("dataset CSV is empty");
  } while (!line.empty() && line[0] == '#');
  Eigen::Index nx = 0, ny = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (!col.empty() && col.back() == '\r') col.pop_back();
      if (!col.empty() && col[0] == 'x' && ny == 0)
        ++nx;
      else if (!col.empty() && col[0] == 'y')
        ++ny;
      else
        throw IoError("dataset CSV header must be x1..xn,y1..ym; got column '" + col + "'");
    }
  }
  if (nx == 0 || ny == 0) throw IoError("dataset CSV header needs x and y columns");
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("dataset CSV: bad number '" + cell + "' on data row " + std::to_string(rows + 1));
      }
      ++cols;
    }
    if (cols != nx + ny)
      throw IoError("dataset CSV: row " + std::to_string(rows + 1) + " has " + std::to_string(cols) +
                    " columns, expected " + std::to_string(nx + ny));
    ++rows;
  }
  GPDatasetd d;
  d.inputs.resize(rows, nx);
  d.targets.resize(rows, ny);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < nx; ++c) d.inputs(r, c) = values[static_cast<std::size_t>(r * (nx + ny) + c)];
    for (Eigen::Index c = 0; c < ny; ++c)
      d.targets(r, c) = values[static_cast<std::size_t>(r * (nx + ny) + nx + c)];
  }
  return d;
}

json dataset_metadata(const GPDatasetd& data, const KernelConfig<double>& kernel) {
  json region = json::array();
  for (const auto& [lo, hi] : data.region) region.push_back({lo, hi});
  return {{"n", data.size()},
          {"input_dim", data.input_dim()},
          {"output_dim", data.output_dim()},
          {"seed", data.seed},
          {"sigma_f", data.noise_std},
          {"region", region},
          {"kernel", {{"family", to_string(kernel.family)}, {"length_scale", kernel.length_scale}}}};
}

void save_dataset(const std::string& prefix, const GPDatasetd& data,
                  const KernelConfig<double>& kernel, const json& extra) {
  std::ostringstream csv;
  write_dataset_csv(csv, data);
  json meta = dataset_metadata(data, kernel);
  if (extra.is_object()) meta.update(extra);
  write_text(prefix + ".csv", csv.str());
  write_text(prefix + ".json", meta.dump(2) + "\n");
}

GPDatasetd load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  GPDatasetd d = read_dataset_csv(in);
  const std::filesystem::path sidecar = std::filesystem::path(path).replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    json meta;
    try {
      meta = json::parse(read_text(sidecar.string()));
    } catch (const json::exception& e) {
      throw IoError("dataset sidecar '" + sidecar.string() + "': " + e.what());
    }
    d.noise_std = meta.value("sigma_f", 0.0);
    d.seed = meta.value("seed", std::uint64_t{0});
    if (meta.contains("region"))
      for (const auto& iv : meta["region"]) d.region.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
  }
  return d;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fxt::io
