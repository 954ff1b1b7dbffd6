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

#ifndef NNMPC_QP_SOLVER_H_
#define NNMPC_QP_SOLVER_H_

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace nnmpc {

// minimize 0.5 z'Hz + f'z  subject to  G z <= w.
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd constraint_matrix;
  Eigen::VectorXd constraint_bound;

  Eigen::Index num_variables() const { return hessian.rows(); }
  Eigen::Index num_constraints() const { return constraint_matrix.rows(); }
  double Objective(const Eigen::VectorXd& z) const;

  // Dimension, finiteness and symmetry (1e-10) checks. Positive
  // definiteness is checked by the solver's factorization.
  void Validate() const;
};

enum class QpStatus { kOptimal, kInfeasible, kIterationLimit };
std::string_view ToString(QpStatus status);

struct KktResiduals {
  double stationarity = 0.0;    // ||Hz + f + G'lambda||_inf
  double primal = 0.0;          // ||max(Gz - w, 0)||_inf
  double complementarity = 0.0; // max_i |lambda_i (Gz - w)_i|
};

KktResiduals ComputeKktResiduals(const QpProblem& problem,
                                 const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& lambda);

struct QpOptions {
  double tolerance = 1e-8;
  // 0 selects the default of 10 * (n + m).
  int max_iterations = 0;
};

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  double objective = 0.0;
  QpStatus status = QpStatus::kIterationLimit;
  KktResiduals kkt;
  // Active-set changes (additions, removals) performed.
  int iterations = 0;
  std::vector<int> active_set;
};

// Goldfarb-Idnani dual active-set method. The iterate is always the minimizer
// over the current working set with nonnegative multipliers; violated
// constraints are added one at a time, so the dual objective increases
// monotonically and infeasibility shows up as an unbounded dual step.
//
// The instance only owns workspace and may be reused across solves; it is not
// re-entrant.
class QpSolver {
 public:
  // `initial_active_set` is an optional warm start. Constraints that are
  // linearly dependent on earlier entries are skipped, and those whose
  // equality-constrained multiplier comes out negative are released before
  // the main iteration starts.
  //
  // Throws InvalidArgument when the problem is malformed or H is not
  // positive definite.
  QpSolution Solve(const QpProblem& problem, const QpOptions& options = {},
                   std::span<const int> initial_active_set = {});

 private:
  void AddToFactorization(Eigen::VectorXd& d);
  void DropFromFactorization(int k);
  void SolveEqualityProblem(const QpProblem& problem);

  Eigen::MatrixXd j_;
  Eigen::MatrixXd r_;
  Eigen::VectorXd x_;
  Eigen::VectorXd d_;
  std::vector<int> active_;
  std::vector<double> u_;
  int q_ = 0;
};

}  // namespace nnmpc

#endif  // NNMPC_QP_SOLVER_H_
