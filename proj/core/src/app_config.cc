// Copyright 2026 The nnmpc Authors
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

#include "nnmpc/app_config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nnmpc/dataset.h"
#include "nnmpc/random.h"

namespace nnmpc {
namespace {

using nlohmann::json;

// Reads fields out of one JSON object, tracking the dotted path for error
// messages and rejecting keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(Name("") + ": expected an object");
  }

  template <typename T>
  void Read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(Name(key) + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(Name(key) + ": expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(Name(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(Name(key) + ": expected a string");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(Name(key) + ": " + e.what());
    }
  }

  void ReadState(const char* key, StateVec& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3 ||
        !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
      throw ConfigError(Name(key) + ": expected an array of 3 numbers");
    }
    out = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }

  Section Child(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : kEmpty, Name(key));
  }

  void RejectUnknown() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(Name(key) + ": unknown field");
    }
  }

 private:
  std::string Name(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void Rethrow(const char* section, const std::exception& e) {
  throw ConfigError(std::string(section) + ": " + e.what());
}

}  // namespace

void AppConfig::Validate() const {
  try {
    plant.Validate();
  } catch (const InvalidArgument& e) {
    Rethrow("plant", e);
  }
  try {
    mpc.Validate();
  } catch (const InvalidArgument& e) {
    Rethrow("mpc", e);
  }
  try {
    train.Validate();
  } catch (const InvalidArgument& e) {
    Rethrow("train", e);
  }
  if (!(ts > 0.0)) throw ConfigError("mpc.Ts: must be positive");
  if (!(u_s >= mpc.u_min && u_s <= mpc.u_max)) {
    throw ConfigError("mpc.u_s: must lie within [u_min, u_max]");
  }
  if (dataset.n_k < 8) throw ConfigError("dataset.nk: must be >= 8");
  if (harness.steps < 1) throw ConfigError("harness.steps: must be >= 1");
  if (harness.n_sims < 1) throw ConfigError("harness.n_sims: must be >= 1");
  if (harness.substeps < 1) throw ConfigError("harness.substeps: must be >= 1");
  if (jobs < 1) throw ConfigError("jobs: must be >= 1");
}

AppConfig ParseAppConfig(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  AppConfig c;
  Section top(root, "");

  Section plant = top.Child("plant");
  plant.Read("k1", c.plant.k1);
  plant.Read("k2", c.plant.k2);
  plant.Read("k3", c.plant.k3);
  plant.Read("F", c.plant.flow);
  plant.Read("V", c.plant.volume);
  plant.Read("cA_feed", c.plant.c_a_feed);
  plant.RejectUnknown();

  Section mpc = top.Child("mpc");
  mpc.Read("N", c.mpc.horizon);
  mpc.Read("Q", c.mpc.output_weight);
  mpc.Read("R", c.mpc.input_weight);
  mpc.ReadState("x_min", c.mpc.state_bounds.lower);
  mpc.ReadState("x_max", c.mpc.state_bounds.upper);
  mpc.Read("u_min", c.mpc.u_min);
  mpc.Read("u_max", c.mpc.u_max);
  mpc.Read("Ts", c.ts);
  mpc.Read("u_s", c.u_s);
  mpc.RejectUnknown();

  Section train = top.Child("train");
  train.Read("max_epochs", c.train.max_epochs);
  train.Read("loss_tolerance", c.train.loss_tolerance);
  train.Read("initial_damping", c.train.initial_damping);
  train.Read("validation_fraction", c.train.validation_fraction);
  train.Read("patience", c.train.patience);
  if (root.contains("train") && root["train"].is_object() &&
      root["train"].contains("seed")) {
    c.train_seed_explicit = true;
  }
  train.Read("seed", c.train.seed);
  train.RejectUnknown();

  Section dataset = top.Child("dataset");
  dataset.Read("nk", c.dataset.n_k);
  dataset.RejectUnknown();

  Section harness = top.Child("harness");
  harness.Read("steps", c.harness.steps);
  harness.Read("n_sims", c.harness.n_sims);
  harness.Read("substeps", c.harness.substeps);
  Section dist = harness.Child("disturbance");
  dist.Read("enabled", c.harness.disturbance.enabled);
  dist.Read("trigger_step", c.harness.disturbance.trigger_step);
  dist.Read("cB_offset", c.harness.disturbance.c_b_offset);
  dist.RejectUnknown();
  harness.RejectUnknown();

  Section io = top.Child("io");
  io.Read("dataset", c.io.dataset);
  io.Read("model", c.io.model);
  io.Read("report", c.io.report);
  io.Read("trajectory", c.io.trajectory);
  io.RejectUnknown();

  top.Read("seed", c.seed);
  top.Read("jobs", c.jobs);
  top.RejectUnknown();

  c.Validate();
  return c;
}

AppConfig LoadAppConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseAppConfig(ss.str());
}

std::string AppConfigToJson(const AppConfig& c) {
  const auto state = [](const StateVec& s) { return json{s.c_a, s.c_b, s.c_c}; };
  json j = {
      {"plant",
       {{"k1", c.plant.k1}, {"k2", c.plant.k2}, {"k3", c.plant.k3},
        {"F", c.plant.flow}, {"V", c.plant.volume}, {"cA_feed", c.plant.c_a_feed}}},
      {"mpc",
       {{"N", c.mpc.horizon}, {"Q", c.mpc.output_weight}, {"R", c.mpc.input_weight},
        {"x_min", state(c.mpc.state_bounds.lower)},
        {"x_max", state(c.mpc.state_bounds.upper)},
        {"u_min", c.mpc.u_min}, {"u_max", c.mpc.u_max}, {"Ts", c.ts}, {"u_s", c.u_s}}},
      {"train",
       {{"max_epochs", c.train.max_epochs},
        {"loss_tolerance", c.train.loss_tolerance},
        {"initial_damping", c.train.initial_damping},
        {"validation_fraction", c.train.validation_fraction},
        {"patience", c.train.patience}}},
      {"dataset", {{"nk", c.dataset.n_k}}},
      {"harness",
       {{"steps", c.harness.steps},
        {"n_sims", c.harness.n_sims},
        {"substeps", c.harness.substeps},
        {"disturbance",
         {{"enabled", c.harness.disturbance.enabled},
          {"trigger_step", c.harness.disturbance.trigger_step},
          {"cB_offset", c.harness.disturbance.c_b_offset}}}}},
      {"io",
       {{"dataset", c.io.dataset}, {"model", c.io.model},
        {"report", c.io.report}, {"trajectory", c.io.trajectory}}},
      {"seed", c.seed},
      {"jobs", c.jobs},
  };
  if (c.train_seed_explicit) j["train"]["seed"] = c.train.seed;
  return j.dump(2);
}

StateVec SteadyState(const AppConfig& config) {
  return FindSteadyState(config.u_s, {2.0, 4.0, 1.0}, config.plant);
}

LinearModel BuildLinearModel(const AppConfig& config) {
  return DiscretizeZoh(Jacobian(SteadyState(config), config.u_s, config.plant),
                       config.ts);
}

CondensedMpc BuildMpc(const AppConfig& config) {
  return Condense(BuildLinearModel(config), config.mpc);
}

TrainConfig MakeTrainConfig(const AppConfig& config) {
  TrainConfig t = config.train;
  if (!config.train_seed_explicit) t.seed = DeriveSeed(config.seed, "train");
  t.jobs = config.jobs;
  return t;
}

SimSettings MakeSimSettings(const AppConfig& config) {
  SimSettings s;
  s.steps = config.harness.steps;
  s.ts = config.ts;
  s.substeps = config.harness.substeps;
  s.disturbance = config.harness.disturbance;
  s.plant = config.plant;
  return s;
}

EvalSettings MakeEvalSettings(const AppConfig& config, int n_sims,
                              std::uint64_t seed) {
  EvalSettings e;
  e.n_sims = n_sims;
  e.seed = DeriveSeed(seed, "evaluate");
  e.sim = MakeSimSettings(config);
  e.jobs = config.jobs;
  return e;
}

TrainingSet GenerateDataset(const AppConfig& config, const CondensedMpc& mpc) {
  const auto grid = GenerateGrid(config.mpc.state_bounds, config.dataset.n_k);
  return LabelWithMpc(grid, mpc, config.jobs);
}

}  // namespace nnmpc
