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

#ifndef NNMPC_MPC_H_
#define NNMPC_MPC_H_

#include <span>
#include <vector>

#include <Eigen/Core>

#include "nnmpc/cstr_plant.h"
#include "nnmpc/linearizer.h"
#include "nnmpc/qp_solver.h"

namespace nnmpc {

// Per-component concentration box in mol/m^3.
struct StateBox {
  StateVec lower{0.0, 0.0, 0.0};
  StateVec upper{10.0, 14.0, 1.1};

  bool Contains(const StateVec& x, double tol = 0.0) const;
  void Validate() const;
};

struct MpcConfig {
  int horizon = 50;
  double output_weight = 10.0;  // Q
  double input_weight = 0.15;   // R
  StateBox state_bounds;
  double u_min = 0.0;
  double u_max = 10.0;

  void Validate() const;
};

// Condensed form of the MPC problem in deviation coordinates. With the
// stacked predictions X = [dx_1; ...; dx_N] = Gamma dx_0 + Phi U the cost
//   sum_{k=1..N} Q y_k^2 + sum_{k=0..N-1} R du_k^2
// becomes 0.5 U'HU + dx_0'F U + const, and the input bounds (k = 0..N-1)
// together with the state bounds (k = 1..N-1) become G U <= w0 + E dx_0.
//
// Constraint rows are ordered by stage: rows 2k, 2k+1 are the upper and lower
// bound on du_k; then, for k = 1..N-1, six rows per stage (three upper, three
// lower state bounds).
struct CondensedMpc {
  LinearModel model;
  MpcConfig config;
  Eigen::MatrixXd free_response;    // Gamma, 3N x 3
  Eigen::MatrixXd forced_response;  // Phi, 3N x N
  Eigen::MatrixXd hessian;          // H, N x N
  Eigen::MatrixXd linear_term;      // F, 3 x N
  Eigen::MatrixXd constraint_matrix;      // G
  Eigen::VectorXd constraint_offset;      // w0
  Eigen::MatrixXd constraint_state_gain;  // E

  int horizon() const { return config.horizon; }
  QpProblem BuildQp(const Eigen::Vector3d& dx0) const;
  // Maps an active set of the previous sampling instant onto the rows of the
  // current problem (stage k -> k-1); stage-0 rows are discarded.
  std::vector<int> ShiftActiveSet(std::span<const int> active) const;
};

CondensedMpc Condense(const LinearModel& model, const MpcConfig& config);

struct MpcResult {
  bool feasible = false;
  double u0 = 0.0;                 // absolute, mol/s
  Eigen::VectorXd input_sequence;  // absolute, mol/s
  QpSolution qp;
};

// Solves the MPC problem initialized with x_meas. On success u0 is returned
// in absolute units and lies in [u_min, u_max]. An infeasible QP is reported
// through `feasible == false`, not thrown.
MpcResult SolveMpc(const CondensedMpc& mpc, const StateVec& x_meas,
                   QpSolver& solver, std::span<const int> warm_start = {},
                   const QpOptions& options = {});
MpcResult SolveMpc(const CondensedMpc& mpc, const StateVec& x_meas);

// Receding horizon policy: one QP per call of Step, warm-started from the
// previous solution's active set shifted by one stage.
class RecedingHorizonController {
 public:
  explicit RecedingHorizonController(const CondensedMpc& mpc,
                                     bool warm_start = true);

  MpcResult Step(const StateVec& x_meas);
  void Reset();
  int solve_count() const { return solve_count_; }

 private:
  const CondensedMpc* mpc_;
  QpSolver solver_;
  std::vector<int> previous_active_;
  bool warm_start_;
  int solve_count_ = 0;
};

}  // namespace nnmpc

#endif  // NNMPC_MPC_H_
