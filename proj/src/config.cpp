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

#include "fxtsmc/config.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <sstream>

#include "fxtsmc/io.hpp"

namespace fxt::config {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      std::string list;
      for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
      throw ConfigError(where + ": unknown key '" + key + "' (allowed: " + list + ")");
    }
  }
}

double number(const json& obj, const char* key, const std::string& where, std::optional<double> dflt = {}) {
  if (!obj.contains(key)) {
    if (dflt) return *dflt;
    throw ConfigError(where + ": missing required key '" + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(where + "." + key + ": must be finite");
  return d;
}

long long integer(const json& obj, const char* key, const std::string& where,
                  std::optional<long long> dflt = {}) {
  if (!obj.contains(key)) {
    if (dflt) return *dflt;
    throw ConfigError(where + ": missing required key '" + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<long long>();
}

bool boolean(const json& obj, const char* key, const std::string& where, bool dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return obj.at(key).get<bool>();
}

std::string string(const json& obj, const char* key, const std::string& where,
                   std::optional<std::string> dflt = {}) {
  if (!obj.contains(key)) {
    if (dflt) return *dflt;
    throw ConfigError(where + ": missing required key '" + key + "'");
  }
  if (!obj.at(key).is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return obj.at(key).get<std::string>();
}

Vectord vector_of(const json& v, const std::string& where, Eigen::Index n) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  if (n >= 0 && static_cast<Eigen::Index>(v.size()) != n)
    throw ConfigError(where + ": expected " + std::to_string(n) + " entries, got " +
                      std::to_string(v.size()));
  Vectord out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(where + "[" + std::to_string(i) + "]: expected a number");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

/// Scalar broadcast to n entries, or an n-array.
Vectord scalar_or_vector(const json& v, const std::string& where, Eigen::Index n) {
  if (v.is_number()) return Vectord::Constant(n, v.get<double>());
  return vector_of(v, where, n);
}

Box<double> box_of(const json& v, const std::string& where, Eigen::Index n) {
  // [lo, hi] for every channel, or one [lo, hi] per channel.
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected [lo, hi] or [[lo, hi], ...]");
  Box<double> box;
  if (v[0].is_number()) {
    const Vectord iv = vector_of(v, where, 2);
    box.assign(static_cast<std::size_t>(n), {iv[0], iv[1]});
  } else {
    if (static_cast<Eigen::Index>(v.size()) != n)
      throw ConfigError(where + ": expected " + std::to_string(n) + " intervals");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vectord iv = vector_of(v[i], where + "[" + std::to_string(i) + "]", 2);
      box.emplace_back(iv[0], iv[1]);
    }
  }
  for (const auto& [lo, hi] : box)
    if (!(hi >= lo)) throw ConfigError(where + ": interval needs lo <= hi");
  return box;
}

json box_json(const Box<double>& box) {
  json a = json::array();
  for (const auto& [lo, hi] : box) a.push_back({lo, hi});
  return a;
}

json vector_json(const Vectord& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ControllerParamsd channel_params(const json& c, const std::string& where, bool default_sqrt_pi) {
  check_keys(c, {"alpha1", "alpha2", "p", "q", "d_bar", "include_sqrt_pi_factor", "boundary_layer"},
             where);
  ControllerParamsd p;
  p.sliding.alpha1 = number(c, "alpha1", where);
  const long long pn = integer(c, "p", where);
  const long long qn = integer(c, "q", where);
  if (pn < 0 || qn <= 0 || pn > 1'000'000 || qn > 1'000'000)
    throw ConfigError(where + ": exponent must be a pair of integers 0 <= p, 0 < q");
  p.sliding.p = static_cast<int>(pn);
  p.sliding.q = static_cast<int>(qn);
  p.alpha2 = number(c, "alpha2", where);
  p.d_bar = number(c, "d_bar", where, 0.0);
  p.include_sqrt_pi_factor = boolean(c, "include_sqrt_pi_factor", where, default_sqrt_pi);
  p.boundary_layer = number(c, "boundary_layer", where, 0.0);
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

ControllerMode mode_of(const std::string& s) {
  if (s == "known-model") return ControllerMode::known_model;
  if (s == "gp-based") return ControllerMode::gp_based;
  if (s == "open-loop") return ControllerMode::open_loop;
  throw ConfigError("controller.mode: expected known-model, gp-based or open-loop, got '" + s + "'");
}

}  // namespace

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, {"system", "reference", "controller", "gp", "sim", "montecarlo", "output"}, "config");
  ExperimentConfig cfg;

  // system
  const json sys = doc.value("system", json::object());
  check_keys(sys, {"builtin", "alpha", "perturbation"}, "system");
  cfg.system_name = string(sys, "builtin", "system", std::string("pmsm"));
  cfg.perturbed = boolean(sys, "perturbation", "system", true);
  if (cfg.system_name == "pmsm") {
    if (sys.contains("alpha")) throw ConfigError("system.alpha only applies to the lemma2 plant");
    cfg.system = make_pmsm<double>();
  } else if (cfg.system_name == "lemma2") {
    cfg.lemma2_alpha = number(sys, "alpha", "system", 1.0);
    if (!(cfg.lemma2_alpha > 0)) throw ConfigError("system.alpha must be > 0");
    cfg.system = make_lemma2_plant<double>(cfg.lemma2_alpha);
  } else {
    throw ConfigError("system.builtin: unknown system '" + cfg.system_name + "' (pmsm, lemma2)");
  }
  if (!cfg.perturbed) cfg.system = without_perturbation(cfg.system);
  const auto n = static_cast<Eigen::Index>(cfg.system.n);

  // reference
  const json ref = doc.value("reference", json{{"type", "constant"}});
  cfg.reference_type = string(ref, "type", "reference", std::string("constant"));
  if (cfg.reference_type == "constant") {
    check_keys(ref, {"type", "value"}, "reference");
    const Vectord v = ref.contains("value") ? scalar_or_vector(ref["value"], "reference.value", n)
                                            : Vectord::Zero(n);
    cfg.reference = constant_reference<double>(v);
    cfg.reference_json = {{"type", "constant"}, {"value", vector_json(v)}};
  } else if (cfg.reference_type == "sinusoid") {
    check_keys(ref, {"type", "offset", "amplitude", "omega", "phase"}, "reference");
    auto field = [&](const char* k) {
      return ref.contains(k) ? scalar_or_vector(ref[k], std::string("reference.") + k, n) : Vectord::Zero(n);
    };
    const Vectord off = field("offset"), amp = field("amplitude"), om = field("omega"), ph = field("phase");
    cfg.reference = sinusoidal_reference<double>(off, amp, om, ph);
    cfg.reference_json = {{"type", "sinusoid"},        {"offset", vector_json(off)},
                          {"amplitude", vector_json(amp)}, {"omega", vector_json(om)},
                          {"phase", vector_json(ph)}};
  } else {
    throw ConfigError("reference.type: expected constant or sinusoid");
  }

  // controller
  const json ctl = doc.value("controller", json::object());
  check_keys(ctl, {"mode", "channels", "all", "bound_variant", "delta_f_bar"}, "controller");
  cfg.mode = mode_of(string(ctl, "mode", "controller", std::string("known-model")));
  const bool default_sqrt_pi = cfg.mode != ControllerMode::gp_based;
  if (ctl.contains("channels") && ctl.contains("all"))
    throw ConfigError("controller: give either 'channels' or 'all', not both");
  if (ctl.contains("channels")) {
    const json& ch = ctl["channels"];
    if (!ch.is_array() || static_cast<Eigen::Index>(ch.size()) != n)
      throw ConfigError("controller.channels: expected " + std::to_string(n) + " channel objects");
    for (std::size_t i = 0; i < ch.size(); ++i)
      cfg.params.push_back(channel_params(ch[i], "controller.channels[" + std::to_string(i) + "]",
                                          default_sqrt_pi));
  } else if (ctl.contains("all")) {
    const ControllerParamsd p = channel_params(ctl["all"], "controller.all", default_sqrt_pi);
    cfg.params.assign(static_cast<std::size_t>(n), p);
  } else if (cfg.mode != ControllerMode::open_loop) {
    throw ConfigError("controller: 'channels' or 'all' is required for mode " +
                      std::string(to_string(cfg.mode)));
  }
  const std::string variant = string(ctl, "bound_variant", "controller", std::string("lemma3"));
  if (variant == "lemma3")
    cfg.bound_variant = SlidingBoundVariant::lemma3;
  else if (variant == "printed-t8")
    cfg.bound_variant = SlidingBoundVariant::printed;
  else
    throw ConfigError("controller.bound_variant: expected lemma3 or printed-t8");
  if (ctl.contains("delta_f_bar")) {
    cfg.delta_f_bar = scalar_or_vector(ctl["delta_f_bar"], "controller.delta_f_bar", n);
    if ((cfg.delta_f_bar->array() < 0).any()) throw ConfigError("controller.delta_f_bar must be >= 0");
  }

  // gp
  if (doc.contains("gp")) {
    const json& g = doc["gp"];
    check_keys(g, {"kernel", "dataset", "generate", "chi", "raise_alpha2_margin"}, "gp");
    GpSettings gs;
    const json k = g.value("kernel", json::object());
    check_keys(k, {"family", "length_scale"}, "gp.kernel");
    const std::string fam = string(k, "family", "gp.kernel", std::string("exponential"));
    if (fam == "exponential")
      gs.kernel.family = KernelFamily::exponential;
    else if (fam == "squared-exponential")
      gs.kernel.family = KernelFamily::squared_exponential;
    else
      throw ConfigError("gp.kernel.family: expected exponential or squared-exponential");
    gs.kernel.length_scale = number(k, "length_scale", "gp.kernel", 1.0);
    if (!(gs.kernel.length_scale > 0)) throw ConfigError("gp.kernel.length_scale must be > 0");
    if (g.contains("dataset") == g.contains("generate"))
      throw ConfigError("gp: exactly one of 'dataset' or 'generate' is required");
    if (g.contains("dataset")) gs.dataset = string(g, "dataset", "gp");
    if (g.contains("generate")) {
      const json& gen = g["generate"];
      check_keys(gen, {"n", "region", "sigma_f", "seed"}, "gp.generate");
      GenerateSpec spec;
      spec.n = static_cast<Eigen::Index>(integer(gen, "n", "gp.generate"));
      if (spec.n < 1) throw ConfigError("gp.generate.n must be >= 1");
      spec.region = box_of(gen.value("region", json::array({-2.0, 2.0})), "gp.generate.region", n);
      for (const auto& [lo, hi] : spec.region)
        if (!(hi > lo)) throw ConfigError("gp.generate.region must be non-degenerate");
      spec.sigma_f = number(gen, "sigma_f", "gp.generate", 0.0);
      if (!(spec.sigma_f >= 0)) throw ConfigError("gp.generate.sigma_f must be >= 0");
      const long long seed = integer(gen, "seed", "gp.generate", 0);
      if (seed < 0) throw ConfigError("gp.generate.seed must be >= 0");
      spec.seed = static_cast<std::uint64_t>(seed);
      gs.generate = spec;
    }
    gs.chi = g.contains("chi") ? scalar_or_vector(g["chi"], "gp.chi", n) : Vectord::Constant(n, 2.0);
    if (!(gs.chi.array() > 0).all()) throw ConfigError("gp.chi must be > 0");
    if (g.contains("raise_alpha2_margin")) {
      gs.raise_alpha2_margin = number(g, "raise_alpha2_margin", "gp");
      if (!(*gs.raise_alpha2_margin > 0)) throw ConfigError("gp.raise_alpha2_margin must be > 0");
    }
    cfg.gp = gs;
  } else if (cfg.mode == ControllerMode::gp_based) {
    throw ConfigError("controller.mode gp-based requires a 'gp' section");
  }

  // sim
  const json sim = doc.value("sim", json::object());
  check_keys(sim, {"x0", "step", "t_end", "method", "threshold", "substepping", "log_every"}, "sim");
  cfg.x0 = sim.contains("x0") ? scalar_or_vector(sim["x0"], "sim.x0", n) : Vectord::Zero(n);
  cfg.step.step_size = number(sim, "step", "sim", 1e-4);
  cfg.step.t_end = number(sim, "t_end", "sim", 5.0);
  const std::string method = string(sim, "method", "sim", std::string("explicit-euler"));
  if (method == "explicit-euler" || method == "euler")
    cfg.step.method = IntegrationMethod::explicit_euler;
  else if (method == "rk4")
    cfg.step.method = IntegrationMethod::rk4;
  else
    throw ConfigError("sim.method: expected explicit-euler or rk4");
  try {
    cfg.step.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("sim: ") + e.what());
  }
  cfg.threshold = number(sim, "threshold", "sim", 1e-2);
  if (!(cfg.threshold > 0)) throw ConfigError("sim.threshold must be > 0");
  cfg.substepping = boolean(sim, "substepping", "sim", true);
  const long long log_every = integer(sim, "log_every", "sim", 1);
  if (log_every < 1) throw ConfigError("sim.log_every must be >= 1");
  cfg.log_every = static_cast<std::size_t>(log_every);

  // montecarlo
  const json mc = doc.value("montecarlo", json::object());
  check_keys(mc, {"runs", "ic_box", "seed", "threads", "require_fraction"}, "montecarlo");
  const long long runs = integer(mc, "runs", "montecarlo", 30);
  if (runs < 1) throw ConfigError("montecarlo.runs must be >= 1");
  cfg.montecarlo.runs = static_cast<std::size_t>(runs);
  cfg.montecarlo.ic_box = box_of(mc.value("ic_box", json::array({-1.0, 1.0})), "montecarlo.ic_box", n);
  const long long mseed = integer(mc, "seed", "montecarlo", 1);
  if (mseed < 0) throw ConfigError("montecarlo.seed must be >= 0");
  cfg.montecarlo.seed = static_cast<std::uint64_t>(mseed);
  const long long threads = integer(mc, "threads", "montecarlo", 1);
  if (threads < 1) throw ConfigError("montecarlo.threads must be >= 1");
  cfg.montecarlo.threads = static_cast<std::size_t>(threads);
  cfg.montecarlo.require_fraction = number(mc, "require_fraction", "montecarlo", 1.0);
  if (!(cfg.montecarlo.require_fraction >= 0 && cfg.montecarlo.require_fraction <= 1))
    throw ConfigError("montecarlo.require_fraction must lie in [0, 1]");

  // output
  const json out = doc.value("output", json::object());
  check_keys(out, {"trajectory", "summary", "dataset_prefix", "runs"}, "output");
  cfg.output.trajectory = string(out, "trajectory", "output", cfg.output.trajectory);
  cfg.output.summary = string(out, "summary", "output", cfg.output.summary);
  cfg.output.dataset_prefix = string(out, "dataset_prefix", "output", cfg.output.dataset_prefix);
  cfg.output.runs = string(out, "runs", "output", cfg.output.runs);

  return cfg;
}

json ExperimentConfig::resolved() const {
  json j;
  j["system"] = {{"builtin", system_name}, {"perturbation", perturbed}};
  if (system_name == "lemma2") j["system"]["alpha"] = lemma2_alpha;
  j["reference"] = reference_json;
  json ctl = {{"mode", to_string(mode)}, {"bound_variant", to_string(bound_variant)}};
  if (!params.empty()) {
    json ch = json::array();
    for (const auto& p : params)
      ch.push_back({{"alpha1", p.sliding.alpha1},
                    {"p", p.sliding.p},
                    {"q", p.sliding.q},
                    {"alpha2", p.alpha2},
                    {"d_bar", p.d_bar},
                    {"include_sqrt_pi_factor", p.include_sqrt_pi_factor},
                    {"boundary_layer", p.boundary_layer}});
    ctl["channels"] = ch;
  }
  if (delta_f_bar) ctl["delta_f_bar"] = vector_json(*delta_f_bar);
  j["controller"] = ctl;
  if (gp) {
    json g = {{"kernel",
               {{"family", to_string(gp->kernel.family)}, {"length_scale", gp->kernel.length_scale}}},
              {"chi", vector_json(gp->chi)}};
    if (gp->dataset) g["dataset"] = *gp->dataset;
    if (gp->generate)
      g["generate"] = {{"n", gp->generate->n},
                       {"region", box_json(gp->generate->region)},
                       {"sigma_f", gp->generate->sigma_f},
                       {"seed", gp->generate->seed}};
    if (gp->raise_alpha2_margin) g["raise_alpha2_margin"] = *gp->raise_alpha2_margin;
    j["gp"] = g;
  }
  j["sim"] = {{"x0", vector_json(x0)},
              {"step", step.step_size},
              {"t_end", step.t_end},
              {"method", to_string(step.method)},
              {"threshold", threshold},
              {"substepping", substepping},
              {"log_every", log_every}};
  j["montecarlo"] = {{"runs", montecarlo.runs},
                     {"ic_box", box_json(montecarlo.ic_box)},
                     {"seed", montecarlo.seed},
                     {"threads", montecarlo.threads},
                     {"require_fraction", montecarlo.require_fraction}};
  j["output"] = {{"trajectory", output.trajectory},
                 {"summary", output.summary},
                 {"dataset_prefix", output.dataset_prefix},
                 {"runs", output.runs}};
  return j;
}

Scenariod ExperimentConfig::scenario() const {
  Scenariod sc;
  sc.system = system;
  sc.reference = reference;
  sc.mode = mode;
  sc.params = params;
  sc.x0 = x0;
  sc.step = step;
  sc.settle_threshold = threshold;
  sc.substepping = substepping;
  sc.log_every = log_every;
  sc.bound_variant = bound_variant;
  sc.delta_f_bar = delta_f_bar;
  if (gp && mode == ControllerMode::gp_based)
    sc.error_bound = ErrorBoundConfig<double>{gp->chi, 0.95};
  return sc;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "': expected path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) {
    if (key.empty()) throw ConfigError("override '" + assignment + "': empty path segment");
    keys.push_back(key);
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const bool last = i + 1 == keys.size();
    const std::string& k = keys[i];
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(k);
      } catch (const std::exception&) {
        throw ConfigError("override '" + assignment + "': '" + k + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + assignment + "': index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object())
        throw ConfigError("override '" + assignment + "': '" + k + "' addresses into a scalar");
      node = &(*node)[k];
    }
    if (last) *node = value;
  }
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + text + "' is not a comma-separated list of numbers");
    }
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

std::shared_ptr<const DriftModel<double>> build_drift_model(const ExperimentConfig& cfg,
                                                            GPDatasetd* dataset_out) {
  if (!cfg.gp) throw ConfigError("no 'gp' section in config");
  GPDatasetd data;
  if (cfg.gp->dataset) {
    data = io::load_dataset(*cfg.gp->dataset);
  } else {
    const GenerateSpec& g = *cfg.gp->generate;
    data = generate_training_data(cfg.system, g.n, g.region, g.sigma_f, g.seed);
  }
  if (data.input_dim() != static_cast<Eigen::Index>(cfg.system.n) ||
      data.output_dim() != static_cast<Eigen::Index>(cfg.system.n))
    throw ConfigError("gp dataset dimensions do not match the system");
  auto model = std::make_shared<const DriftModel<double>>(fit_drift_model(data, cfg.gp->kernel));
  if (dataset_out) *dataset_out = std::move(data);
  return model;
}

}  // namespace fxt::config
