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

#include "nnmpc/mpc.h"

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "nnmpc/errors.h"
#include "nnmpc/random.h"
#include "support/oracles.h"

namespace nnmpc {
namespace {

const LinearModel& Model() {
  static const LinearModel m = LinearizeAtSteadyState(kNominalFeed, 0.1);
  return m;
}

MpcConfig Horizon(int n) {
  MpcConfig c;
  c.horizon = n;
  return c;
}

TEST(CondenseTest, HorizonOneHessian) {
  const CondensedMpc c = Condense(Model(), Horizon(1));
  ASSERT_EQ(c.hessian.rows(), 1);
  const double b2 = Model().b(1);
  EXPECT_NEAR(c.hessian(0, 0), 2.0 * (0.15 + 10.0 * b2 * b2), 1e-15);
  EXPECT_NEAR(c.hessian(0, 0), 0.318, 0.01);
}

TEST(CondenseTest, FreeResponseBlocksArePowers) {
  const CondensedMpc c = Condense(Model(), Horizon(4));
  const Eigen::Matrix3d a = Model().a;
  EXPECT_EQ(Eigen::Matrix3d(c.free_response.middleRows<3>(0)), a);
  EXPECT_LT((c.free_response.middleRows<3>(3) - a * a).norm(), 1e-15);
}

TEST(CondenseTest, PredictionMatchesRecursion) {
  const CondensedMpc c = Condense(Model(), Horizon(5));
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector3d x0(u(gen), u(gen), u(gen));
    Eigen::VectorXd seq(5);
    for (int k = 0; k < 5; ++k) seq(k) = 5.0 * u(gen);
    Eigen::VectorXd stacked(15);
    Eigen::Vector3d x = x0;
    for (int k = 0; k < 5; ++k) {
      x = Model().a * x + Model().b * seq(k);
      stacked.segment<3>(3 * k) = x;
    }
    const Eigen::VectorXd pred = c.free_response * x0 + c.forced_response * seq;
    EXPECT_LT((pred - stacked).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(CondenseTest, CostReproducesStageSum) {
  const int n = 6;
  const CondensedMpc c = Condense(Model(), Horizon(n));
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Vector3d x0(u(gen), u(gen), u(gen));
  Eigen::VectorXd seq(n);
  for (int k = 0; k < n; ++k) seq(k) = u(gen);
  double stage = 0.0;
  Eigen::Vector3d x = x0;
  for (int k = 0; k < n; ++k) {
    x = Model().a * x + Model().b * seq(k);
    const double y = Model().c * x;
    stage += 10.0 * y * y + 0.15 * seq(k) * seq(k);
  }
  // Constant part: sum of Q y_free^2.
  double constant = 0.0;
  Eigen::Vector3d xf = x0;
  for (int k = 0; k < n; ++k) {
    xf = Model().a * xf;
    const double y = Model().c * xf;
    constant += 10.0 * y * y;
  }
  const double condensed = 0.5 * seq.dot(c.hessian * seq) + x0.dot(c.linear_term * seq);
  EXPECT_NEAR(condensed + constant, stage, 1e-12);
}

TEST(CondenseTest, ConstraintCount) {
  const CondensedMpc c = Condense(Model(), MpcConfig{});
  EXPECT_EQ(c.constraint_matrix.rows(), 2 * 50 + 6 * 49);
  EXPECT_EQ(c.hessian.rows(), 50);
  EXPECT_TRUE(c.hessian.isApprox(c.hessian.transpose(), 0.0));
}

TEST(CondenseTest, RejectsBadConfig) {
  MpcConfig c;
  c.horizon = 0;
  EXPECT_THROW(Condense(Model(), c), InvalidArgument);
  c = {};
  c.u_min = 10.0;
  c.u_max = 0.0;
  EXPECT_THROW(Condense(Model(), c), InvalidArgument);
  c = {};
  c.input_weight = 0.0;
  EXPECT_THROW(Condense(Model(), c), InvalidArgument);
  c = {};
  c.state_bounds.lower.c_b = 20.0;
  EXPECT_THROW(Condense(Model(), c), InvalidArgument);
}

TEST(SolveMpcTest, SteadyStateGivesNominalFeed) {
  const CondensedMpc c = Condense(Model(), MpcConfig{});
  const MpcResult r = SolveMpc(c, Model().x_s);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.u0, 5.0, 1e-6);
}

TEST(SolveMpcTest, HighProductLowersFeed) {
  const CondensedMpc c = Condense(Model(), MpcConfig{});
  const MpcResult r = SolveMpc(c, {2.18, 6.0, 0.87});
  ASSERT_TRUE(r.feasible);
  EXPECT_LT(r.u0, 5.0);
  EXPECT_GE(r.u0, 0.0);
}

TEST(SolveMpcTest, FarBelowTargetSaturatesUpperBound) {
  const CondensedMpc c = Condense(Model(), MpcConfig{});
  // Deplete every species: the feed is the only way back up.
  const Eigen::Vector3d dir = -Model().x_s.ToVector().normalized();
  double unconstrained_hint = 0.0;
  for (double scale = 0.05; scale <= 1.0; scale += 0.05) {
    const Eigen::Vector3d x = Model().x_s.ToVector() + scale * Model().x_s.ToVector().norm() * dir;
    const MpcResult r = SolveMpc(c, StateVec::FromVector(x));
    ASSERT_TRUE(r.feasible);
    unconstrained_hint = r.u0;
    if (r.u0 >= 10.0 - 1e-9) {
      EXPECT_EQ(r.u0, 10.0);
      ASSERT_NE(std::find(r.qp.active_set.begin(), r.qp.active_set.end(), 0),
                r.qp.active_set.end());
      EXPECT_GT(r.qp.lambda(0), 0.0);  // row 0 is u_0 <= u_max
      return;
    }
  }
  FAIL() << "upper input bound never became active; last u0 " << unconstrained_hint;
}

TEST(SolveMpcTest, MatchesExplicitStateFormulation) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Vector3d> states = {
      {1.0, 1.0, 0.2}, {5.0, 10.0, 1.0}, {2.2, 1.0, 1.05}, {8.0, 0.5, 0.1}};
  for (int i = 0; i < 6; ++i) states.emplace_back(10 * u(gen), 14 * u(gen), 1.1 * u(gen));
  for (int n = 1; n <= 5; ++n) {
    const CondensedMpc c = Condense(Model(), Horizon(n));
    for (const Eigen::Vector3d& x : states) {
      const MpcResult r = SolveMpc(c, StateVec::FromVector(x));
      if (!r.feasible) continue;
      const Eigen::VectorXd want =
          oracle::ExplicitStateMpc(Model(), c.config, x - Model().x_s.ToVector());
      const Eigen::VectorXd got = r.input_sequence.array() - Model().u_s;
      EXPECT_LT((want - got).lpNorm<Eigen::Infinity>(), 1e-7)
          << "N=" << n << " x=" << x.transpose();
    }
  }
}

TEST(SolveMpcTest, JointWeightScalingKeepsArgmin) {
  MpcConfig base;
  MpcConfig scaled;
  scaled.output_weight *= 7.5;
  scaled.input_weight *= 7.5;
  const CondensedMpc c1 = Condense(Model(), base);
  const CondensedMpc c2 = Condense(Model(), scaled);
  for (const StateVec& x : {StateVec{1, 1, 0.2}, StateVec{2.18, 6.0, 0.87}, StateVec{6, 12, 1.0}}) {
    const MpcResult r1 = SolveMpc(c1, x);
    const MpcResult r2 = SolveMpc(c2, x);
    ASSERT_EQ(r1.feasible, r2.feasible);
    if (r1.feasible) {
      EXPECT_LT((r1.input_sequence - r2.input_sequence).lpNorm<Eigen::Infinity>(), 1e-6);
    }
  }
}

TEST(SolveMpcTest, PredictedStatesRespectBounds) {
  const CondensedMpc c = Condense(Model(), MpcConfig{});
  const StateVec x{2.2, 1.0, 1.05};
  const MpcResult r = SolveMpc(c, x);
  ASSERT_TRUE(r.feasible);
  const Eigen::Vector3d dx = x.ToVector() - Model().x_s.ToVector();
  const Eigen::VectorXd du = r.input_sequence.array() - Model().u_s;
  const Eigen::VectorXd pred = c.free_response * dx + c.forced_response * du;
  const Eigen::Vector3d lo = c.config.state_bounds.lower.ToVector() - Model().x_s.ToVector();
  const Eigen::Vector3d hi = c.config.state_bounds.upper.ToVector() - Model().x_s.ToVector();
  for (int k = 0; k < c.horizon() - 1; ++k) {
    const Eigen::Vector3d xk = pred.segment<3>(3 * k);
    EXPECT_TRUE((xk.array() <= hi.array() + 1e-8).all()) << k;
    EXPECT_TRUE((xk.array() >= lo.array() - 1e-8).all()) << k;
  }
  EXPECT_GE(du.minCoeff(), -5.0 - 1e-8);
  EXPECT_LE(du.maxCoeff(), 5.0 + 1e-8);
}

TEST(SolveMpcTest, NonFiniteMeasurementThrows) {
  const CondensedMpc c = Condense(Model(), Horizon(3));
  EXPECT_THROW(SolveMpc(c, {NAN, 1, 1}), InvalidArgument);
}

TEST(ShiftActiveSetTest, MovesStagesBackByOne) {
  const CondensedMpc c = Condense(Model(), Horizon(4));
  // Input rows: 2k / 2k+1; state rows for stage k start at 8 + 6 (k - 1).
  const std::vector<int> before = {0, 3, 5, 8, 14, 19};
  const std::vector<int> after = c.ShiftActiveSet(before);
  EXPECT_EQ(after, (std::vector<int>{1, 3, 8, 13}));
}

TEST(RecedingHorizonTest, EquilibriumIsInvariant) {
  const CondensedMpc c = Condense(Model(), MpcConfig{});
  RecedingHorizonController rhc(c);
  EXPECT_NEAR(rhc.Step(Model().x_s).u0, 5.0, 1e-9);
  EXPECT_NEAR(rhc.Step(Model().x_s).u0, 5.0, 1e-9);
  EXPECT_EQ(rhc.solve_count(), 2);
}

TEST(RecedingHorizonTest, WarmStartNeverNeedsMoreIterations) {
  const CondensedMpc c = Condense(Model(), MpcConfig{});
  Rng rng(2024);
  for (int run = 0; run < 20; ++run) {
    const StateVec x0{rng.Uniform(0, 10), rng.Uniform(0, 14), rng.Uniform(0, 1.1)};
    RecedingHorizonController warm(c, true);
    RecedingHorizonController cold(c, false);
    StateVec x = x0;
    int warm_iters = 0;
    int cold_iters = 0;
    for (int k = 0; k < 30; ++k) {
      const MpcResult w = warm.Step(x);
      const MpcResult k_cold = cold.Step(x);
      if (!w.feasible || !k_cold.feasible) break;
      EXPECT_NEAR(w.u0, k_cold.u0, 1e-8);
      warm_iters += w.qp.iterations;
      cold_iters += k_cold.qp.iterations;
      x = Integrate(x, w.u0, 0.1, 10, {});
    }
    EXPECT_LE(warm_iters, cold_iters) << "run " << run;
  }
}

}  // namespace
}  // namespace nnmpc
