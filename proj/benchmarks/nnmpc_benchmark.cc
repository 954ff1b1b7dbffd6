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

// Latency of the per-step operations: plant integration, one MPC solve
// (cold and warm), one network evaluation, and random box QPs.

#include <map>

#include <benchmark/benchmark.h>

#include "nnmpc/cstr_plant.h"
#include "nnmpc/linearizer.h"
#include "nnmpc/mpc.h"
#include "nnmpc/neural_net.h"
#include "nnmpc/qp_selftest.h"
#include "nnmpc/qp_solver.h"

namespace {

using namespace nnmpc;

const CondensedMpc& Mpc(int horizon) {
  static std::map<int, CondensedMpc> cache;
  auto it = cache.find(horizon);
  if (it == cache.end()) {
    MpcConfig cfg;
    cfg.horizon = horizon;
    it = cache.emplace(horizon, Condense(LinearizeAtSteadyState(kNominalFeed, 0.1), cfg)).first;
  }
  return it->second;
}

void BM_Rk4Step(benchmark::State& state) {
  StateVec x{2.0, 3.0, 0.8};
  const PlantParams p;
  for (auto _ : state) {
    benchmark::DoNotOptimize(x = StepRk4(x, 5.0, 0.01, p));
  }
}
BENCHMARK(BM_Rk4Step);

void BM_PlantPeriod(benchmark::State& state) {
  const StateVec x{2.0, 3.0, 0.8};
  for (auto _ : state) benchmark::DoNotOptimize(Integrate(x, 5.0, 0.1, 10, {}));
}
BENCHMARK(BM_PlantPeriod);

void BM_Condense(benchmark::State& state) {
  const LinearModel m = LinearizeAtSteadyState(kNominalFeed, 0.1);
  MpcConfig cfg;
  cfg.horizon = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Condense(m, cfg));
}
BENCHMARK(BM_Condense)->Arg(10)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_MpcSolveCold(benchmark::State& state) {
  const CondensedMpc& c = Mpc(static_cast<int>(state.range(0)));
  const StateVec x{1.0, 2.0, 0.5};
  QpSolver solver;
  for (auto _ : state) benchmark::DoNotOptimize(SolveMpc(c, x, solver));
}
BENCHMARK(BM_MpcSolveCold)->Arg(10)->Arg(50)->Unit(benchmark::kMicrosecond);

// Closed loop from a depleted start, one QP per period, warm started.
void BM_MpcClosedLoopWarm(benchmark::State& state) {
  const CondensedMpc& c = Mpc(50);
  for (auto _ : state) {
    RecedingHorizonController rhc(c);
    StateVec x{1.0, 2.0, 0.5};
    for (int k = 0; k < 20; ++k) x = Integrate(x, rhc.Step(x).u0, 0.1, 10, {});
    benchmark::DoNotOptimize(x);
  }
  state.SetItemsProcessed(state.iterations() * 20);
}
BENCHMARK(BM_MpcClosedLoopWarm)->Unit(benchmark::kMillisecond);

void BM_NnForward(benchmark::State& state) {
  const Mlp m = Mlp::RandomInit(
      Mlp::DefaultTopology(),
      AffineScaler::FromBounds(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(10, 14, 1.1)),
      AffineScaler::FromBounds(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 10.0)),
      1);
  const StateVec x{2.0, 3.0, 0.8};
  for (auto _ : state) benchmark::DoNotOptimize(m.Forward(x));
}
BENCHMARK(BM_NnForward);

void BM_RandomBoxQp(benchmark::State& state) {
  const BoxQp qp = RandomBoxQp(7, 6);
  QpSolver solver;
  for (auto _ : state) benchmark::DoNotOptimize(solver.Solve(qp.problem));
}
BENCHMARK(BM_RandomBoxQp);

}  // namespace

BENCHMARK_MAIN();
