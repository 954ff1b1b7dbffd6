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
#include <cmath>
#include <string>

#include "nnmpc/errors.h"

namespace nnmpc {
namespace {

constexpr int kStates = 3;

}  // namespace

bool StateBox::Contains(const StateVec& x, double tol) const {
  const Eigen::Vector3d v = x.ToVector();
  const Eigen::Vector3d lo = lower.ToVector();
  const Eigen::Vector3d hi = upper.ToVector();
  return (v.array() >= lo.array() - tol).all() &&
         (v.array() <= hi.array() + tol).all();
}

void StateBox::Validate() const {
  if (!lower.IsFinite() || !upper.IsFinite()) {
    throw InvalidArgument("state bounds must be finite");
  }
  const Eigen::Vector3d lo = lower.ToVector();
  const Eigen::Vector3d hi = upper.ToVector();
  static constexpr const char* kNames[3] = {"cA", "cB", "cC"};
  for (int i = 0; i < 3; ++i) {
    if (!(lo(i) < hi(i))) {
      throw InvalidArgument("state bounds: x_min[" + std::to_string(i) + "] (" + kNames[i] +
                            ") must be below x_max[" + std::to_string(i) + "]");
    }
  }
}

void MpcConfig::Validate() const {
  if (horizon < 1) throw InvalidArgument("mpc.N must be >= 1");
  if (!(output_weight > 0.0) || !std::isfinite(output_weight)) {
    throw InvalidArgument("mpc.Q must be positive");
  }
  if (!(input_weight > 0.0) || !std::isfinite(input_weight)) {
    throw InvalidArgument("mpc.R must be positive");
  }
  state_bounds.Validate();
  if (!(u_min < u_max) || !std::isfinite(u_min) || !std::isfinite(u_max)) {
    throw InvalidArgument("mpc input bounds: u_min must be below u_max");
  }
}

CondensedMpc Condense(const LinearModel& model, const MpcConfig& config) {
  config.Validate();
  if (!model.a.allFinite() || !model.b.allFinite() || !model.c.allFinite()) {
    throw InvalidArgument("Condense: non-finite model");
  }
  if (model.d != 0.0) {
    throw InvalidArgument("Condense: direct feedthrough is not supported");
  }
  const int n = config.horizon;
  CondensedMpc out;
  out.model = model;
  out.config = config;

  // Gamma block k holds A^{k+1}; Phi block (k, j) holds A^{k-j} B for j <= k.
  out.free_response.resize(kStates * n, kStates);
  out.forced_response.setZero(kStates * n, n);
  Eigen::Matrix3d a_pow = model.a;
  for (int k = 0; k < n; ++k) {
    out.free_response.middleRows<kStates>(kStates * k) = a_pow;
    a_pow = model.a * a_pow;
  }
  Eigen::Vector3d a_pow_b = model.b;
  for (int lag = 0; lag < n; ++lag) {
    for (int j = 0; j + lag < n; ++j) {
      out.forced_response.block<kStates, 1>(kStates * (j + lag), j) = a_pow_b;
    }
    a_pow_b = model.a * a_pow_b;
  }

  // Output predictions y_k = C dx_k for k = 1..N.
  Eigen::MatrixXd gamma_y(n, kStates);
  Eigen::MatrixXd phi_y(n, n);
  for (int k = 0; k < n; ++k) {
    gamma_y.row(k) = model.c * out.free_response.middleRows<kStates>(kStates * k);
    phi_y.row(k) = model.c * out.forced_response.middleRows<kStates>(kStates * k);
  }
  const double q = config.output_weight;
  const double r = config.input_weight;
  out.hessian = 2.0 * q * (phi_y.transpose() * phi_y);
  out.hessian.diagonal().array() += 2.0 * r;
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
  out.linear_term = 2.0 * q * gamma_y.transpose() * phi_y;

  const Eigen::Vector3d x_s = model.x_s.ToVector();
  const Eigen::Vector3d dx_hi = config.state_bounds.upper.ToVector() - x_s;
  const Eigen::Vector3d dx_lo = config.state_bounds.lower.ToVector() - x_s;
  const double du_hi = config.u_max - model.u_s;
  const double du_lo = config.u_min - model.u_s;

  const int m = 2 * n + 2 * kStates * (n - 1);
  out.constraint_matrix.setZero(m, n);
  out.constraint_offset.resize(m);
  out.constraint_state_gain.setZero(m, kStates);
  for (int k = 0; k < n; ++k) {
    out.constraint_matrix(2 * k, k) = 1.0;
    out.constraint_offset(2 * k) = du_hi;
    out.constraint_matrix(2 * k + 1, k) = -1.0;
    out.constraint_offset(2 * k + 1) = -du_lo;
  }
  for (int k = 1; k < n; ++k) {
    // dx_k is block k-1 of the stacked prediction.
    const int row = 2 * n + 2 * kStates * (k - 1);
    const auto phi_k = out.forced_response.middleRows<kStates>(kStates * (k - 1));
    const auto gamma_k = out.free_response.middleRows<kStates>(kStates * (k - 1));
    out.constraint_matrix.middleRows<kStates>(row) = phi_k;
    out.constraint_offset.segment<kStates>(row) = dx_hi;
    out.constraint_state_gain.middleRows<kStates>(row) = -gamma_k;
    out.constraint_matrix.middleRows<kStates>(row + kStates) = -phi_k;
    out.constraint_offset.segment<kStates>(row + kStates) = -dx_lo;
    out.constraint_state_gain.middleRows<kStates>(row + kStates) = gamma_k;
  }
  return out;
}

QpProblem CondensedMpc::BuildQp(const Eigen::Vector3d& dx0) const {
  QpProblem p;
  p.hessian = hessian;
  p.gradient = linear_term.transpose() * dx0;
  p.constraint_matrix = constraint_matrix;
  p.constraint_bound = constraint_offset + constraint_state_gain * dx0;
  return p;
}

std::vector<int> CondensedMpc::ShiftActiveSet(std::span<const int> active) const {
  const int n = config.horizon;
  const int input_rows = 2 * n;
  std::vector<int> out;
  out.reserve(active.size());
  for (const int row : active) {
    if (row < 0) continue;
    if (row < input_rows) {
      if (row >= 2) out.push_back(row - 2);
    } else {
      const int local = row - input_rows;
      if (local >= 2 * kStates && local < 2 * kStates * (n - 1)) {
        out.push_back(row - 2 * kStates);
      }
    }
  }
  return out;
}

MpcResult SolveMpc(const CondensedMpc& mpc, const StateVec& x_meas,
                   QpSolver& solver, std::span<const int> warm_start,
                   const QpOptions& options) {
  if (!x_meas.IsFinite()) throw InvalidArgument("SolveMpc: non-finite state");
  const Eigen::Vector3d dx0 = x_meas.ToVector() - mpc.model.x_s.ToVector();
  MpcResult out;
  out.qp = solver.Solve(mpc.BuildQp(dx0), options, warm_start);
  out.feasible = out.qp.status == QpStatus::kOptimal;
  if (!out.feasible) return out;
  const double u_s = mpc.model.u_s;
  out.input_sequence = out.qp.z.array() + u_s;
  // Inputs held at an active bound are reported at the bound itself rather
  // than at z + u_s, which can miss it by an ulp.
  for (const int row : out.qp.active_set) {
    if (row < 2 * mpc.horizon()) {
      out.input_sequence(row / 2) = row % 2 == 0 ? mpc.config.u_max : mpc.config.u_min;
    }
  }
  // The QP certifies the bound to within its tolerance; clamping removes
  // the residual rounding so the applied action is exactly physical.
  out.u0 = std::clamp(out.input_sequence(0), mpc.config.u_min, mpc.config.u_max);
  return out;
}

MpcResult SolveMpc(const CondensedMpc& mpc, const StateVec& x_meas) {
  QpSolver solver;
  return SolveMpc(mpc, x_meas, solver);
}

RecedingHorizonController::RecedingHorizonController(const CondensedMpc& mpc,
                                                     bool warm_start)
    : mpc_(&mpc), warm_start_(warm_start) {}

MpcResult RecedingHorizonController::Step(const StateVec& x_meas) {
  const std::vector<int> guess =
      warm_start_ ? mpc_->ShiftActiveSet(previous_active_) : std::vector<int>{};
  MpcResult result = SolveMpc(*mpc_, x_meas, solver_, guess);
  ++solve_count_;
  if (result.feasible) {
    previous_active_ = result.qp.active_set;
  } else {
    previous_active_.clear();
  }
  return result;
}

void RecedingHorizonController::Reset() {
  previous_active_.clear();
  solve_count_ = 0;
}

}  // namespace nnmpc
