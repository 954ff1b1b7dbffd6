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

// nnmpc: command line front end for the reactor MPC / neural surrogate
// pipeline. Every subcommand prints a JSON summary on stdout.
//
// Exit status: 0 success, 1 domain failure (infeasible, divergence, I/O),
// 2 usage or configuration error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nnmpc/app_config.h"
#include "nnmpc/dataset.h"
#include "nnmpc/errors.h"
#include "nnmpc/harness.h"
#include "nnmpc/linearizer.h"
#include "nnmpc/mpc.h"
#include "nnmpc/neural_net.h"
#include "nnmpc/qp_selftest.h"

namespace {

using nlohmann::json;
using namespace nnmpc;

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

json Matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json Vector(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json State(const StateVec& x) { return {x.c_a, x.c_b, x.c_c}; }

StateVec ParseState(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--state: '" + item + "' is not a number");
    }
  }
  if (v.size() != 3) throw ConfigError("--state: expected cA,cB,cC");
  return {v[0], v[1], v[2]};
}

void Print(const json& j) { std::cout << j.dump(2) << std::endl; }

json KktJson(const KktResiduals& k) {
  return {{"stationarity", k.stationarity},
          {"primal", k.primal},
          {"complementarity", k.complementarity}};
}

// Options shared by all subcommands.
struct GlobalOptions {
  std::string config_path;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

AppConfig ResolveConfig(const GlobalOptions& g) {
  AppConfig c = g.config_path.empty() ? AppConfig{} : LoadAppConfig(g.config_path);
  if (g.jobs) c.jobs = *g.jobs;
  if (g.seed) c.seed = *g.seed;
  c.Validate();
  return c;
}

int CmdSteadyState(const AppConfig& c) {
  const StateVec x_s = SteadyState(c);
  const double residual = Rhs(x_s, c.u_s, c.plant).ToVector().lpNorm<Eigen::Infinity>();
  Print({{"u_s", c.u_s}, {"x_s", State(x_s)}, {"residual_inf", residual}});
  return 0;
}

int CmdLinearize(const AppConfig& c, std::optional<double> ts) {
  const StateVec x_s = SteadyState(c);
  const ContinuousLinearModel cont = Jacobian(x_s, c.u_s, c.plant);
  const LinearModel disc = DiscretizeZoh(cont, ts.value_or(c.ts));
  Print({{"Ts", disc.ts},
         {"x_s", State(x_s)},
         {"u_s", c.u_s},
         {"Ac", Matrix(cont.a)},
         {"Bc", Vector(cont.b)},
         {"A", Matrix(disc.a)},
         {"B", Vector(disc.b)},
         {"C", Matrix(disc.c)},
         {"D", disc.d},
         {"spectral_radius", SpectralRadius(disc.a)}});
  return 0;
}

TrainingSet DoGenerateDataset(const AppConfig& c, const CondensedMpc& mpc,
                              const std::string& out) {
  TrainingSet ts = GenerateDataset(c, mpc);
  WriteDataset(ts, out);
  return ts;
}

json DatasetSummary(const TrainingSet& ts, const std::string& out) {
  return {{"path", out},
          {"grid_points_per_axis", ts.points_per_axis},
          {"grid_size", ts.grid_size},
          {"kept", ts.size()},
          {"dropped", ts.dropped.size()},
          {"mpc_hash", ts.mpc_hash}};
}

Mlp DoTrain(const AppConfig& c, const TrainingSet& ts, const std::string& out,
            json* summary) {
  const TrainResult r = Train(ts, MakeTrainConfig(c));
  SaveMlp(r.model, out);
  const TrainingInfo& info = r.model.training_info();
  *summary = {{"path", out},
              {"epochs", info.epochs},
              {"best_epoch", info.best_epoch},
              {"train_mse", info.train_mse},
              {"validation_mse", info.validation_mse},
              {"validation_rmse", std::sqrt(info.validation_mse)},
              {"seed", info.seed}};
  return r.model;
}

int CmdMpcStep(const AppConfig& c, const std::string& state) {
  const StateVec x = ParseState(state);
  const CondensedMpc mpc = BuildMpc(c);
  const MpcResult r = SolveMpc(mpc, x);
  if (!r.feasible) {
    throw InfeasibleError("MPC problem is " + std::string(ToString(r.qp.status)) +
                          " for the given state");
  }
  Print({{"u0", r.u0},
         {"status", ToString(r.qp.status)},
         {"iterations", r.qp.iterations},
         {"active_constraints", r.qp.active_set.size()},
         {"objective", r.qp.objective},
         {"kkt", KktJson(r.qp.kkt)}});
  return 0;
}

int CmdNnStep(const AppConfig& c, const std::string& state, const std::string& model) {
  const StateVec x = ParseState(state);
  const Mlp m = LoadMlp(model);
  NnController ctrl(m, c.mpc.u_min, c.mpc.u_max);
  Print({{"u0", ctrl.Step(x)}, {"raw", m.Forward(x)}});
  return 0;
}

int CmdSimulate(const AppConfig& c, const std::string& controller,
                const std::optional<std::string>& state, std::optional<int> steps,
                const std::string& model_path, const std::string& out) {
  const CondensedMpc mpc = BuildMpc(c);
  const StateVec x0 = state ? ParseState(*state) : mpc.model.x_s;
  SimSettings sim = MakeSimSettings(c);
  if (steps) sim.steps = *steps;
  std::vector<SimResult> results;
  std::optional<Mlp> model;
  if (controller == "mpc" || controller == "both") {
    MpcController ctrl(mpc);
    results.push_back(Simulate(ctrl, x0, sim, c.mpc, mpc.model.x_s));
  }
  if (controller == "nn" || controller == "both") {
    model = LoadMlp(model_path);
    NnController ctrl(*model, c.mpc.u_min, c.mpc.u_max);
    results.push_back(Simulate(ctrl, x0, sim, c.mpc, mpc.model.x_s));
  }
  WriteTrajectoryCsv(results, out);
  json runs = json::array();
  for (const SimResult& r : results) {
    runs.push_back({{"controller", r.controller},
                    {"J", r.j},
                    {"aborted", r.aborted},
                    {"abort_reason", r.abort_reason},
                    {"final_state", State(r.states.back())},
                    {"input_violations", r.violations.inputs()}});
  }
  Print({{"trajectory", out}, {"x0", State(x0)}, {"steps", sim.steps}, {"runs", runs}});
  return 0;
}

int CmdEvaluate(const AppConfig& c, int n, std::uint64_t seed,
                const std::string& model_path, const std::string& dataset_path,
                const std::string& out) {
  const CondensedMpc mpc = BuildMpc(c);
  json pipeline = json::object();
  Mlp model = [&] {
    if (std::filesystem::exists(model_path)) return LoadMlp(model_path);
    // No model yet: run the whole pipeline so the study is one command.
    const TrainingSet ts = DoGenerateDataset(c, mpc, dataset_path);
    pipeline["dataset"] = DatasetSummary(ts, dataset_path);
    json train_summary;
    Mlp m = DoTrain(c, ts, model_path, &train_summary);
    pipeline["train"] = train_summary;
    return m;
  }();
  const EvalReport report = BatchEvaluate(mpc, model, MakeEvalSettings(c, n, seed));
  WriteReport(report, out);
  json summary = {{"report", out},
                  {"n_sims", n},
                  {"seed", seed},
                  {"worst_pct", report.worst_pct},
                  {"median_pct", report.median_pct},
                  {"frac_under_1pct", report.frac_under_1pct},
                  {"frac_under_5pct", report.frac_under_5pct},
                  {"excluded_runs", report.excluded_runs},
                  {"nn_input_violations", report.nn_input_violations}};
  if (!pipeline.empty()) summary["pipeline"] = pipeline;
  Print(summary);
  return 0;
}

int CmdQpSelfTest(int count, std::uint64_t seed) {
  const QpSelfTestSummary s = RunQpSelfTest(count, seed);
  Print({{"passed", s.passed},
         {"failed", s.failed},
         {"max_objective_gap", s.max_objective_gap},
         {"max_kkt_residual", s.max_kkt_residual}});
  return s.failed == 0 ? 0 : kExitDomain;
}

void PrintError(const char* type, const std::exception& e) {
  std::cout << json{{"error", {{"type", type}, {"message", e.what()}}}}.dump(2)
            << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-network approximation of a reactor MPC"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions global;
  app.add_option("--config", global.config_path, "JSON configuration file");
  app.add_option("--jobs", global.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", global.seed, "Top-level random seed");

  auto* steady = app.add_subcommand("steady-state", "Steady state at the nominal feed");

  auto* linearize = app.add_subcommand("linearize", "Jacobian and ZOH model as JSON");
  std::optional<double> lin_ts;
  linearize->add_option("--ts", lin_ts, "Sampling period [s]")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-dataset", "Grid the state box and label it with the MPC");
  std::optional<int> nk;
  std::optional<std::string> gen_out;
  gen->add_option("--nk", nk, "Requested number of grid samples");
  gen->add_option("--out", gen_out, "Dataset CSV path");

  auto* train = app.add_subcommand("train", "Fit the network to a dataset");
  std::optional<std::string> train_data;
  std::optional<std::string> train_out;
  train->add_option("--data", train_data, "Dataset CSV path");
  train->add_option("--out", train_out, "Model JSON path");

  auto* mpc_step = app.add_subcommand("mpc-step", "One MPC evaluation");
  std::string mpc_state;
  mpc_step->add_option("--state", mpc_state, "cA,cB,cC")->required();

  auto* nn_step = app.add_subcommand("nn-step", "One network evaluation (clamped)");
  std::string nn_state;
  std::optional<std::string> nn_model;
  nn_step->add_option("--state", nn_state, "cA,cB,cC")->required();
  nn_step->add_option("--model", nn_model, "Model JSON path");

  auto* simulate = app.add_subcommand("simulate", "Closed-loop run on the nonlinear plant");
  std::string sim_controller = "both";
  std::optional<std::string> sim_state;
  std::optional<int> sim_steps;
  std::optional<std::string> sim_model;
  std::optional<std::string> sim_out;
  simulate->add_option("--controller", sim_controller, "mpc, nn or both")
      ->check(CLI::IsMember({"mpc", "nn", "both"}));
  simulate->add_option("--state", sim_state, "Initial state cA,cB,cC (default: steady state)");
  simulate->add_option("--steps", sim_steps, "Sampling periods")->check(CLI::PositiveNumber);
  simulate->add_option("--model", sim_model, "Model JSON path");
  simulate->add_option("--out", sim_out, "Trajectory CSV path");

  auto* evaluate = app.add_subcommand("evaluate", "Batch suboptimality study");
  std::optional<int> eval_n;
  std::optional<std::string> eval_model;
  std::optional<std::string> eval_out;
  evaluate->add_option("--n", eval_n, "Number of simulations")->check(CLI::PositiveNumber);
  evaluate->add_option("--model", eval_model, "Model JSON path (trained first if missing)");
  evaluate->add_option("--out", eval_out, "Report JSON path");

  auto* selftest = app.add_subcommand("qp-selftest", "Random QP oracle comparison");
  selftest->group("");
  int selftest_count = 50;
  selftest->add_option("--count", selftest_count, "Number of random problems")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    AppConfig c = ResolveConfig(global);
    if (*steady) return CmdSteadyState(c);
    if (*linearize) return CmdLinearize(c, lin_ts);
    if (*gen) {
      if (nk) c.dataset.n_k = *nk;
      c.Validate();
      const std::string out = gen_out.value_or(c.io.dataset);
      const TrainingSet ts = DoGenerateDataset(c, BuildMpc(c), out);
      Print(DatasetSummary(ts, out));
      return 0;
    }
    if (*train) {
      const TrainingSet ts = ReadDataset(train_data.value_or(c.io.dataset));
      json summary;
      DoTrain(c, ts, train_out.value_or(c.io.model), &summary);
      Print(summary);
      return 0;
    }
    if (*mpc_step) return CmdMpcStep(c, mpc_state);
    if (*nn_step) return CmdNnStep(c, nn_state, nn_model.value_or(c.io.model));
    if (*simulate) {
      return CmdSimulate(c, sim_controller, sim_state, sim_steps,
                         sim_model.value_or(c.io.model),
                         sim_out.value_or(c.io.trajectory));
    }
    if (*evaluate) {
      return CmdEvaluate(c, eval_n.value_or(c.harness.n_sims), c.seed,
                         eval_model.value_or(c.io.model), c.io.dataset,
                         eval_out.value_or(c.io.report));
    }
    if (*selftest) return CmdQpSelfTest(selftest_count, c.seed);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const InfeasibleError& e) {
    PrintError("infeasible", e);
    return kExitDomain;
  } catch (const TrainingError& e) {
    PrintError("training", e);
    return kExitDomain;
  } catch (const ConvergenceError& e) {
    PrintError("convergence", e);
    return kExitDomain;
  } catch (const NumericalError& e) {
    PrintError("numerical", e);
    return kExitDomain;
  } catch (const std::exception& e) {
    PrintError("error", e);
    return kExitDomain;
  }
  return kExitUsage;
}
