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

#ifndef NNMPC_APP_CONFIG_H_
#define NNMPC_APP_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "nnmpc/cstr_plant.h"
#include "nnmpc/errors.h"
#include "nnmpc/harness.h"
#include "nnmpc/mpc.h"
#include "nnmpc/neural_net.h"

namespace nnmpc {

// Configuration problem; the message names the offending field.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct DatasetConfig {
  int n_k = 10000;
};

struct HarnessConfig {
  int steps = 100;
  int n_sims = 600;
  int substeps = 10;
  Disturbance disturbance;
};

struct IoConfig {
  std::string dataset = "dataset.csv";
  std::string model = "model.json";
  std::string report = "report.json";
  std::string trajectory = "trajectory.csv";
};

// Everything the command line pipeline needs. Defaults reproduce the
// reactor case study: Table values for the plant, N = 50, Q = 10, R = 0.15,
// Ts = 0.1 s, linearization at q_in = 5 mol/s.
struct AppConfig {
  PlantParams plant;
  MpcConfig mpc;
  double ts = 0.1;
  double u_s = kNominalFeed;
  TrainConfig train;
  bool train_seed_explicit = false;
  DatasetConfig dataset;
  HarnessConfig harness;
  IoConfig io;
  std::uint64_t seed = 1;
  int jobs = 1;

  // Throws ConfigError.
  void Validate() const;
};

// Missing keys keep their defaults; unknown keys and type mismatches are
// rejected with a ConfigError naming the field.
AppConfig ParseAppConfig(const std::string& json_text);
AppConfig LoadAppConfig(const std::filesystem::path& path);
std::string AppConfigToJson(const AppConfig& config);

StateVec SteadyState(const AppConfig& config);
LinearModel BuildLinearModel(const AppConfig& config);
CondensedMpc BuildMpc(const AppConfig& config);

// Training settings with the seed derived from the top-level seed (unless
// the config pins train.seed) and the worker count applied.
TrainConfig MakeTrainConfig(const AppConfig& config);
SimSettings MakeSimSettings(const AppConfig& config);
EvalSettings MakeEvalSettings(const AppConfig& config, int n_sims,
                              std::uint64_t seed);

// Grid generation plus labeling.
TrainingSet GenerateDataset(const AppConfig& config, const CondensedMpc& mpc);

}  // namespace nnmpc

#endif  // NNMPC_APP_CONFIG_H_
