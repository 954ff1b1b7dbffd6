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

#ifndef NNMPC_HARNESS_H_
#define NNMPC_HARNESS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nnmpc/cstr_plant.h"
#include "nnmpc/mpc.h"
#include "nnmpc/neural_net.h"

namespace nnmpc {

// A state-feedback law evaluated once per sampling instant.
class Controller {
 public:
  virtual ~Controller() = default;
  // Returns the feed rate to hold over the next period. May throw
  // InfeasibleError.
  virtual double Step(const StateVec& x) = 0;
  virtual std::string_view tag() const = 0;
  virtual void Reset() {}
};

class MpcController final : public Controller {
 public:
  explicit MpcController(const CondensedMpc& mpc, bool warm_start = true)
      : mpc_(&mpc), rhc_(mpc, warm_start) {}

  double Step(const StateVec& x) override;
  std::string_view tag() const override { return "mpc"; }
  void Reset() override { rhc_.Reset(); }
  int solve_count() const { return rhc_.solve_count(); }

 private:
  const CondensedMpc* mpc_;
  RecedingHorizonController rhc_;
};

// Network output clamped to [u_min, u_max].
class NnController final : public Controller {
 public:
  NnController(const Mlp& model, double u_min, double u_max)
      : model_(&model), u_min_(u_min), u_max_(u_max) {}

  double Step(const StateVec& x) override;
  std::string_view tag() const override { return "nn"; }

 private:
  const Mlp* model_;
  double u_min_;
  double u_max_;
};

// Additive offset on the reactor's c_B at one sampling instant.
struct Disturbance {
  bool enabled = true;
  int trigger_step = 50;
  double c_b_offset = -0.5;  // mol/m^3
};

struct SimSettings {
  int steps = 100;
  double ts = 0.1;
  int substeps = 10;
  Disturbance disturbance;
  PlantParams plant;
};

struct ConstraintViolations {
  std::array<int, 3> state_lower{};
  std::array<int, 3> state_upper{};
  int input_lower = 0;
  int input_upper = 0;

  int inputs() const { return input_lower + input_upper; }
};

struct SimResult {
  std::vector<double> time;       // s, steps + 1 samples
  std::vector<StateVec> states;   // measured state at each sample
  std::vector<double> inputs;     // input held from sample k to k + 1
  std::string controller;
  ConstraintViolations violations;
  double j = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

// Closed loop: measure, ask the controller, hold its action for one period
// on the nonlinear plant. The disturbance is applied to the plant state at
// its trigger step, before the measurement. MPC infeasibility ends the run
// early with `aborted` set. Throws InvalidArgument when x0 lies outside
// `bounds.state_bounds` or steps < 1.
SimResult Simulate(Controller& controller, const StateVec& x0,
                   const SimSettings& settings, const MpcConfig& bounds,
                   const StateVec& x_s);

// sum_t ||x(t) - x_s||^2 over every recorded sample.
double PerformanceJ(const SimResult& result, const StateVec& x_s);

// 100 (J_nn - J_mpc) / J_mpc; negative values are kept. Throws
// InvalidArgument when J_mpc is zero.
double Suboptimality(double j_nn, double j_mpc);

struct RunRecord {
  int index = 0;
  StateVec x0;
  int redraws = 0;
  double j_mpc = 0.0;
  double j_nn = 0.0;
  double suboptimality_pct = 0.0;
  bool mpc_aborted = false;
  double final_c_b_mpc = 0.0;
  double final_c_b_nn = 0.0;
  int mpc_input_violations = 0;
  int nn_input_violations = 0;
};

struct EvalSettings {
  int n_sims = 600;
  std::uint64_t seed = 1;
  SimSettings sim;
  int jobs = 1;
  // When set, replaces the random draws (run i starts at entry i).
  std::optional<std::vector<StateVec>> initial_states;
};

struct EvalReport {
  std::vector<RunRecord> runs;
  double worst_pct = 0.0;
  double median_pct = 0.0;
  double frac_under_1pct = 0.0;
  double frac_under_5pct = 0.0;
  int excluded_runs = 0;
  int nn_input_violations = 0;
  int mpc_input_violations = 0;
  EvalSettings settings;
};

// Runs both controllers from the same initial states against the same plant
// and disturbance, and aggregates their suboptimality. Initial states are
// drawn uniformly from the state box from a stream derived from
// (seed, run index); draws where the MPC is infeasible are redrawn. Runs
// where the MPC aborts are excluded from the statistics.
EvalReport BatchEvaluate(const CondensedMpc& mpc, const Mlp& model,
                         const EvalSettings& settings);

std::string ReportToJson(const EvalReport& report);
void WriteReport(const EvalReport& report, const std::filesystem::path& path);

// Rows `t,cA,cB,cC,u,controller`; u is empty on the final sample.
void WriteTrajectoryCsv(const std::vector<SimResult>& results,
                        const std::filesystem::path& path);

}  // namespace nnmpc

#endif  // NNMPC_HARNESS_H_
