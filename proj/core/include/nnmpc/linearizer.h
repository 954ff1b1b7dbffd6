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

#ifndef NNMPC_LINEARIZER_H_
#define NNMPC_LINEARIZER_H_

#include <Eigen/Core>

#include "nnmpc/cstr_plant.h"

namespace nnmpc {

// First-order Taylor model dx/dt = Ac (x - x_s) + Bc (u - u_s).
struct ContinuousLinearModel {
  Eigen::Matrix3d a;
  Eigen::Vector3d b;
  StateVec x_s;
  double u_s = 0.0;
};

// Discrete model in deviation coordinates:
//   dx[k+1] = A dx[k] + B du[k],  y[k] = C dx[k] + D du[k]
// with dx = x - x_s, du = u - u_s. The output is the c_B deviation.
struct LinearModel {
  Eigen::Matrix3d a;
  Eigen::Vector3d b;
  Eigen::RowVector3d c;
  double d = 0.0;
  double ts = 0.0;
  StateVec x_s;
  double u_s = 0.0;
};

// Analytic Jacobian of Rhs at (x, q_in).
ContinuousLinearModel Jacobian(const StateVec& x, double q_in,
                               const PlantParams& p);

// exp(m) by scaling and squaring a truncated Taylor series; the series is cut
// once a term falls below `tolerance` in the 1-norm.
Eigen::MatrixXd MatrixExponential(const Eigen::MatrixXd& m,
                                  double tolerance = 1e-12);

// Zero-order-hold discretization using the augmented block
// exp([[Ac, Bc], [0, 0]] * ts) = [[A, B], [0, I]].
LinearModel DiscretizeZoh(const ContinuousLinearModel& m, double ts);

// Linearizes around the computed steady state for feed u_s and discretizes.
LinearModel LinearizeAtSteadyState(double u_s, double ts,
                                   const PlantParams& p = {});

double SpectralRadius(const Eigen::Matrix3d& a);

}  // namespace nnmpc

#endif  // NNMPC_LINEARIZER_H_
