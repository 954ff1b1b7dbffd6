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

#ifndef NNMPC_QP_SELFTEST_H_
#define NNMPC_QP_SELFTEST_H_

#include <cstdint>

#include <Eigen/Core>

#include "nnmpc/qp_solver.h"

namespace nnmpc {

// Box-constrained QP with a feasible ball around the origin, as used by the
// self-test: G = [I; -I], w = [upper; -lower].
struct BoxQp {
  QpProblem problem;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

// n in [1, max_n], H = M'M + 0.1 I, lower in [-2, -0.5], upper in [0.5, 2].
BoxQp RandomBoxQp(std::uint64_t seed, int max_n = 6);

// Projected gradient with step 1/lambda_max(H), independent of QpSolver.
// Stops after max_iterations or when an iterate stops moving.
Eigen::VectorXd ProjectedGradientBoxQp(const Eigen::MatrixXd& h,
                                       const Eigen::VectorXd& f,
                                       const Eigen::VectorXd& lower,
                                       const Eigen::VectorXd& upper,
                                       long max_iterations = 1000000);

struct QpSelfTestSummary {
  int passed = 0;
  int failed = 0;
  double max_objective_gap = 0.0;
  double max_kkt_residual = 0.0;
};

// Solves `count` random box QPs with QpSolver and compares the objective
// against the projected-gradient oracle (within 1e-6) and the KKT residuals
// against 1e-8.
QpSelfTestSummary RunQpSelfTest(int count, std::uint64_t seed);

}  // namespace nnmpc

#endif  // NNMPC_QP_SELFTEST_H_
