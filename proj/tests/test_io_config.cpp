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

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "fxtsmc/config.hpp"
#include "fxtsmc/io.hpp"
#include "support.hpp"

using namespace fxt;
using nlohmann::json;

namespace {

json base_doc() {
  return json::parse(R"({
    "system": {"builtin": "pmsm"},
    "controller": {"mode": "known-model", "all": {"alpha1": 6, "alpha2": 4, "p": 8, "q": 10, "d_bar": 1}},
    "sim": {"x0": [1, 1, 1], "t_end": 0.05}
  })");
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fxtsmc_test_" + name)).string();
}

template <typename Fn>
std::string config_error(Fn&& fn) {
  try {
    fn();
  } catch (const config::ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("real formatting round-trips") {
  CHECK(io::format_real(0.1) == "0.10000000000000001");
  CHECK(std::stod(io::format_real(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(io::format_real(-2.0) == "-2");
}

TEST_CASE("trajectory csv") {
  const auto cfg = config::parse_config(base_doc());
  auto sc = cfg.scenario();
  sc.step.t_end = 0.001;
  const auto tr = simulate(sc);
  std::ostringstream os;
  io::write_trajectory_csv(os, tr);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  CHECK(header == "t,x1,x2,x3,xd1,xd2,xd3,z1,z2,z3,s1,s2,s3,u1,u2,u3,d1,d2,d3");
  std::size_t rows = 0;
  while (std::getline(is, row)) {
    ++rows;
    CHECK(std::count(row.begin(), row.end(), ',') == 18);
  }
  CHECK(rows == tr.size());
}

TEST_CASE("dataset csv round trip with sidecar") {
  const auto data = generate_training_data(make_pmsm(), 12, Box<double>(3, {-2.0, 2.0}), 0.01, 42);
  const std::string prefix = temp_path("dataset");
  io::save_dataset(prefix, data, KernelConfig<double>{}, json{{"note", "x"}});
  const auto back = io::load_dataset(prefix + ".csv");
  CHECK(back.inputs == data.inputs);
  CHECK(back.targets == data.targets);
  CHECK(back.seed == 42);
  CHECK(back.noise_std == 0.01);
  CHECK(back.region == data.region);
  const json meta = json::parse(io::read_text(prefix + ".json"));
  CHECK(meta["kernel"]["family"] == "exponential");
  CHECK(meta["note"] == "x");
  std::istringstream bad("x1,z1\n1,2\n");
  CHECK_THROWS_AS(io::read_dataset_csv(bad), io::IoError);
  std::istringstream ragged("x1,y1\n1,2\n3\n");
  CHECK_THROWS_AS(io::read_dataset_csv(ragged), io::IoError);
  std::istringstream commented("# comment\nx1,y1\n1,2\n");
  CHECK(io::read_dataset_csv(commented).size() == 1);
  CHECK_THROWS_AS(io::load_dataset(temp_path("missing.csv")), io::IoError);
}

TEST_CASE("summary json") {
  const auto cfg = config::parse_config(base_doc());
  const auto sc = cfg.scenario();
  const auto r = summarize(sc, simulate(sc));
  const json j = io::to_json(r);
  CHECK(j["bounds"]["T_z_max"].get<double>() == doctest::Approx(0.925925925925926));
  CHECK(j["bounds"]["sliding_bound"] == "lemma2");
  CHECK(j["error_settling"].size() == 3);
  CHECK(j.contains("lyapunov_violations"));
}

TEST_CASE("config defaults") {
  const auto cfg = config::parse_config(base_doc());
  CHECK(cfg.system.n == 3);
  CHECK(cfg.params.size() == 3);
  CHECK(cfg.params[0].include_sqrt_pi_factor);
  CHECK(cfg.step.step_size == 1e-4);
  CHECK(cfg.step.method == IntegrationMethod::explicit_euler);
  CHECK(cfg.threshold == 1e-2);
  CHECK(cfg.bound_variant == SlidingBoundVariant::lemma3);

  json gp = base_doc();
  gp["controller"]["mode"] = "gp-based";
  gp["gp"] = {{"generate", {{"n", 5}}}};
  const auto g = config::parse_config(gp);
  CHECK_FALSE(g.params[0].include_sqrt_pi_factor);
  CHECK(g.gp->chi == Vectord::Constant(3, 2.0));
  CHECK(g.gp->kernel.family == KernelFamily::exponential);
}

TEST_CASE("resolved config reparses to itself") {
  json doc = base_doc();
  doc["reference"] = {{"type", "sinusoid"}, {"amplitude", 0.5}, {"omega", {1, 2, 3}}};
  doc["controller"]["bound_variant"] = "printed-t8";
  const json r1 = config::parse_config(doc).resolved();
  const json r2 = config::parse_config(r1).resolved();
  CHECK(r1 == r2);
  CHECK(r1["controller"]["channels"][2]["q"] == 10);
  CHECK(r1["sim"]["method"] == "explicit-euler");
}

TEST_CASE("schema errors") {
  json d = base_doc();
  d["sim"]["stepsize"] = 1;
  CHECK(config_error([&] { config::parse_config(d); }).find("unknown key 'stepsize'") != std::string::npos);

  d = base_doc();
  d["controller"]["all"]["p"] = 0.8;
  CHECK(config_error([&] { config::parse_config(d); }).find("expected an integer") != std::string::npos);

  d = base_doc();
  d["controller"]["all"]["p"] = 10;
  CHECK(config_error([&] { config::parse_config(d); }).find("p/q") != std::string::npos);

  d = base_doc();
  d["controller"]["channels"] = json::array();
  CHECK_FALSE(config_error([&] { config::parse_config(d); }).empty());

  d = base_doc();
  d["controller"]["mode"] = "gp-based";
  CHECK(config_error([&] { config::parse_config(d); }).find("'gp' section") != std::string::npos);

  d = base_doc();
  d["sim"]["x0"] = {1, 2};
  CHECK(config_error([&] { config::parse_config(d); }).find("expected 3 entries") != std::string::npos);

  d = base_doc();
  d["system"]["builtin"] = "lorenz";
  CHECK_FALSE(config_error([&] { config::parse_config(d); }).empty());

  d = base_doc();
  d["montecarlo"] = {{"runs", 0}};
  CHECK_FALSE(config_error([&] { config::parse_config(d); }).empty());

  CHECK_THROWS_AS(config::parse_json("{not json"), config::ConfigError);
}

TEST_CASE("per-channel gains") {
  json d = base_doc();
  d["controller"].erase("all");
  d["controller"]["channels"] = json::array();
  for (int i = 0; i < 3; ++i)
    d["controller"]["channels"].push_back({{"alpha1", 6}, {"alpha2", 4 + i}, {"p", 8}, {"q", 10}});
  const auto cfg = config::parse_config(d);
  CHECK(cfg.params[2].alpha2 == 6.0);
  CHECK(cfg.params[0].d_bar == 0.0);
}

TEST_CASE("overrides") {
  json d = base_doc();
  config::apply_override(d, "controller.all.alpha2=5.5");
  config::apply_override(d, "sim.x0.1=-3");
  config::apply_override(d, "sim.method=rk4");
  config::apply_override(d, "montecarlo.ic_box=[-5,5]");
  const auto cfg = config::parse_config(d);
  CHECK(cfg.params[1].alpha2 == 5.5);
  CHECK(cfg.x0[1] == -3.0);
  CHECK(cfg.step.method == IntegrationMethod::rk4);
  CHECK(cfg.montecarlo.ic_box[2].second == 5.0);
  CHECK_THROWS_AS(config::apply_override(d, "no_equals"), config::ConfigError);
  CHECK_THROWS_AS(config::apply_override(d, "sim.x0.9=1"), config::ConfigError);
  CHECK_THROWS_AS(config::apply_override(d, "sim.t_end.a=1"), config::ConfigError);
}

TEST_CASE("number lists") {
  CHECK(config::parse_number_list("1,1,1") == std::vector<double>{1, 1, 1});
  CHECK(config::parse_number_list("-0.5, 2e3") == std::vector<double>{-0.5, 2000});
  CHECK_THROWS_AS(config::parse_number_list("1,a"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_number_list("1x"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_number_list(""), config::ConfigError);
}

TEST_CASE("drift model from a dataset file") {
  const auto data = generate_training_data(make_pmsm(), 8, Box<double>(3, {-1.0, 1.0}), 0.0, 3);
  const std::string prefix = temp_path("drift");
  io::save_dataset(prefix, data, KernelConfig<double>{});
  json d = base_doc();
  d["controller"]["mode"] = "gp-based";
  d["gp"] = {{"dataset", prefix + ".csv"}};
  GPDatasetd loaded;
  const auto models = config::build_drift_model(config::parse_config(d), &loaded);
  CHECK(models->size() == 3);
  CHECK(loaded.inputs == data.inputs);
}
