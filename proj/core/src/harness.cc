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

#include "nnmpc/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "nnmpc/errors.h"
#include "nnmpc/parallel.h"
#include "nnmpc/random.h"

namespace nnmpc {
namespace {

using nlohmann::json;

constexpr double kBoundTol = 1e-9;
constexpr int kMaxRedraws = 1000;

void CountViolations(const StateVec& x, const StateBox& box,
                     ConstraintViolations& v) {
  const Eigen::Vector3d s = x.ToVector();
  const Eigen::Vector3d lo = box.lower.ToVector();
  const Eigen::Vector3d hi = box.upper.ToVector();
  for (int i = 0; i < 3; ++i) {
    if (s(i) < lo(i) - kBoundTol) ++v.state_lower[i];
    if (s(i) > hi(i) + kBoundTol) ++v.state_upper[i];
  }
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json StateJson(const StateVec& x) { return {x.c_a, x.c_b, x.c_c}; }

// JSON has no representation for non-finite numbers.
json Number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

double MpcController::Step(const StateVec& x) {
  const MpcResult r = rhc_.Step(x);
  if (!r.feasible) {
    throw InfeasibleError(std::string("MPC QP ") +
                          std::string(ToString(r.qp.status)) + " at measured state");
  }
  return r.u0;
}

double NnController::Step(const StateVec& x) {
  return std::clamp(model_->Forward(x), u_min_, u_max_);
}

SimResult Simulate(Controller& controller, const StateVec& x0,
                   const SimSettings& settings, const MpcConfig& bounds,
                   const StateVec& x_s) {
  if (settings.steps < 1) throw InvalidArgument("Simulate: steps must be >= 1");
  if (!(settings.ts > 0.0) || settings.substeps < 1) {
    throw InvalidArgument("Simulate: bad sampling settings");
  }
  if (!x0.IsFinite() || !bounds.state_bounds.Contains(x0, 1e-12)) {
    throw InvalidArgument("Simulate: initial state outside the state box");
  }
  SimResult r;
  r.controller = std::string(controller.tag());
  r.time.reserve(settings.steps + 1);
  r.states.reserve(settings.steps + 1);
  r.inputs.reserve(settings.steps);

  StateVec x = x0;
  const Disturbance& dist = settings.disturbance;
  for (int k = 0; k <= settings.steps; ++k) {
    if (dist.enabled && k == dist.trigger_step) x.c_b += dist.c_b_offset;
    r.time.push_back(k * settings.ts);
    r.states.push_back(x);
    CountViolations(x, bounds.state_bounds, r.violations);
    if (k == settings.steps) break;
    double u = 0.0;
    try {
      u = controller.Step(x);
    } catch (const InfeasibleError& e) {
      r.aborted = true;
      r.abort_reason = e.what();
      break;
    }
    if (u < bounds.u_min - kBoundTol) ++r.violations.input_lower;
    if (u > bounds.u_max + kBoundTol) ++r.violations.input_upper;
    r.inputs.push_back(u);
    x = Integrate(x, u, settings.ts, settings.substeps, settings.plant);
  }
  r.j = PerformanceJ(r, x_s);
  return r;
}

double PerformanceJ(const SimResult& result, const StateVec& x_s) {
  const Eigen::Vector3d s = x_s.ToVector();
  double j = 0.0;
  for (const StateVec& x : result.states) j += (x.ToVector() - s).squaredNorm();
  return j;
}

double Suboptimality(double j_nn, double j_mpc) {
  if (j_mpc == 0.0) {
    throw InvalidArgument("Suboptimality: undefined for J_mpc = 0");
  }
  return 100.0 * (j_nn - j_mpc) / j_mpc;
}

EvalReport BatchEvaluate(const CondensedMpc& mpc, const Mlp& model,
                         const EvalSettings& settings) {
  if (settings.n_sims < 1) throw InvalidArgument("BatchEvaluate: n_sims must be >= 1");
  if (settings.initial_states &&
      static_cast<int>(settings.initial_states->size()) < settings.n_sims) {
    throw InvalidArgument("BatchEvaluate: not enough initial states supplied");
  }
  const MpcConfig& cfg = mpc.config;
  const StateVec& x_s = mpc.model.x_s;
  const StateBox& box = cfg.state_bounds;

  EvalReport report;
  report.settings = settings;
  report.runs.resize(settings.n_sims);
  ParallelFor(static_cast<std::size_t>(settings.n_sims), settings.jobs,
              [&](std::size_t i) {
    RunRecord& rec = report.runs[i];
    rec.index = static_cast<int>(i);
    if (settings.initial_states) {
      rec.x0 = (*settings.initial_states)[i];
    } else {
      Rng rng(DeriveSeed(settings.seed, static_cast<std::uint64_t>(i)));
      QpSolver solver;
      for (;;) {
        rec.x0 = {rng.Uniform(box.lower.c_a, box.upper.c_a),
                  rng.Uniform(box.lower.c_b, box.upper.c_b),
                  rng.Uniform(box.lower.c_c, box.upper.c_c)};
        if (SolveMpc(mpc, rec.x0, solver).feasible) break;
        if (++rec.redraws > kMaxRedraws) {
          throw InvalidArgument("BatchEvaluate: no MPC-feasible initial state found");
        }
      }
    }
    MpcController mpc_ctrl(mpc);
    NnController nn_ctrl(model, cfg.u_min, cfg.u_max);
    const SimResult r_mpc = Simulate(mpc_ctrl, rec.x0, settings.sim, cfg, x_s);
    const SimResult r_nn = Simulate(nn_ctrl, rec.x0, settings.sim, cfg, x_s);
    rec.j_mpc = r_mpc.j;
    rec.j_nn = r_nn.j;
    rec.mpc_aborted = r_mpc.aborted;
    rec.final_c_b_mpc = r_mpc.states.back().c_b;
    rec.final_c_b_nn = r_nn.states.back().c_b;
    rec.mpc_input_violations = r_mpc.violations.inputs();
    rec.nn_input_violations = r_nn.violations.inputs();
    if (rec.j_mpc == 0.0) {
      // Both loops resting at the steady state.
      rec.suboptimality_pct = rec.j_nn == 0.0
          ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      rec.suboptimality_pct = Suboptimality(rec.j_nn, rec.j_mpc);
    }
  });

  std::vector<double> pct;
  for (const RunRecord& rec : report.runs) {
    report.nn_input_violations += rec.nn_input_violations;
    report.mpc_input_violations += rec.mpc_input_violations;
    if (rec.mpc_aborted || !std::isfinite(rec.suboptimality_pct)) {
      ++report.excluded_runs;
      continue;
    }
    pct.push_back(rec.suboptimality_pct);
  }
  if (!pct.empty()) {
    std::sort(pct.begin(), pct.end());
    const std::size_t n = pct.size();
    report.worst_pct = pct.back();
    report.median_pct = n % 2 == 1 ? pct[n / 2] : 0.5 * (pct[n / 2 - 1] + pct[n / 2]);
    const auto under = [&](double limit) {
      return static_cast<double>(std::count_if(pct.begin(), pct.end(),
                                               [&](double v) { return v < limit; })) /
             static_cast<double>(n);
    };
    report.frac_under_1pct = under(1.0);
    report.frac_under_5pct = under(5.0);
  }
  return report;
}

std::string ReportToJson(const EvalReport& report) {
  json runs = json::array();
  for (const RunRecord& r : report.runs) {
    runs.push_back({{"index", r.index},
                    {"x0", StateJson(r.x0)},
                    {"redraws", r.redraws},
                    {"J_mpc", Number(r.j_mpc)},
                    {"J_nn", Number(r.j_nn)},
                    {"suboptimality_pct", Number(r.suboptimality_pct)},
                    {"mpc_aborted", r.mpc_aborted},
                    {"final_cB_mpc", Number(r.final_c_b_mpc)},
                    {"final_cB_nn", Number(r.final_c_b_nn)},
                    {"mpc_input_violations", r.mpc_input_violations},
                    {"nn_input_violations", r.nn_input_violations}});
  }
  const EvalSettings& s = report.settings;
  json j = {
      {"settings",
       {{"n_sims", s.n_sims},
        {"seed", s.seed},
        {"steps", s.sim.steps},
        {"ts", s.sim.ts},
        {"substeps", s.sim.substeps},
        {"disturbance",
         {{"enabled", s.sim.disturbance.enabled},
          {"trigger_step", s.sim.disturbance.trigger_step},
          {"cB_offset", s.sim.disturbance.c_b_offset}}}}},
      {"runs", runs},
      {"aggregate",
       {{"worst_pct", Number(report.worst_pct)},
        {"median_pct", Number(report.median_pct)},
        {"frac_under_1pct", report.frac_under_1pct},
        {"frac_under_5pct", report.frac_under_5pct},
        {"excluded_runs", report.excluded_runs},
        {"nn_input_violations", report.nn_input_violations},
        {"mpc_input_violations", report.mpc_input_violations}}},
  };
  return j.dump(2);
}

void WriteReport(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open " + path.string() + " for writing");
  out << ReportToJson(report) << '\n';
}

void WriteTrajectoryCsv(const std::vector<SimResult>& results,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open " + path.string() + " for writing");
  out << "t,cA,cB,cC,u,controller\n";
  for (const SimResult& r : results) {
    for (std::size_t k = 0; k < r.states.size(); ++k) {
      const StateVec& x = r.states[k];
      out << FormatDouble(r.time[k]) << ',' << FormatDouble(x.c_a) << ','
          << FormatDouble(x.c_b) << ',' << FormatDouble(x.c_c) << ',';
      if (k < r.inputs.size()) out << FormatDouble(r.inputs[k]);
      out << ',' << r.controller << '\n';
    }
  }
}

}  // namespace nnmpc
