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

#include "nnmpc/qp_selftest.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "nnmpc/random.h"

namespace nnmpc {

BoxQp RandomBoxQp(std::uint64_t seed, int max_n) {
  Rng rng(seed);
  const int n = 1 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(max_n)));
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(-1.0, 1.0);
  BoxQp out;
  out.problem.hessian = m.transpose() * m;
  out.problem.hessian.diagonal().array() += 0.1;
  out.problem.gradient.resize(n);
  out.lower.resize(n);
  out.upper.resize(n);
  for (int i = 0; i < n; ++i) {
    out.problem.gradient(i) = rng.Uniform(-4.0, 4.0);
    out.lower(i) = rng.Uniform(-2.0, -0.5);
    out.upper(i) = rng.Uniform(0.5, 2.0);
  }
  out.problem.constraint_matrix.resize(2 * n, n);
  out.problem.constraint_matrix << Eigen::MatrixXd::Identity(n, n),
      -Eigen::MatrixXd::Identity(n, n);
  out.problem.constraint_bound.resize(2 * n);
  out.problem.constraint_bound << out.upper, -out.lower;
  return out;
}

Eigen::VectorXd ProjectedGradientBoxQp(const Eigen::MatrixXd& h,
                                       const Eigen::VectorXd& f,
                                       const Eigen::VectorXd& lower,
                                       const Eigen::VectorXd& upper,
                                       long max_iterations) {
  const double l_max =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .maxCoeff();
  const double step = 1.0 / l_max;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(f.size()).cwiseMax(lower).cwiseMin(upper);
  for (long it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd next =
        (z - step * (h * z + f)).cwiseMax(lower).cwiseMin(upper);
    const bool still = (next - z).lpNorm<Eigen::Infinity>() == 0.0;
    z = next;
    if (still) break;
  }
  return z;
}

QpSelfTestSummary RunQpSelfTest(int count, std::uint64_t seed) {
  QpSelfTestSummary s;
  QpSolver solver;
  for (int i = 0; i < count; ++i) {
    const BoxQp qp = RandomBoxQp(DeriveSeed(seed, static_cast<std::uint64_t>(i)));
    const QpSolution sol = solver.Solve(qp.problem);
    const Eigen::VectorXd z_ref = ProjectedGradientBoxQp(
        qp.problem.hessian, qp.problem.gradient, qp.lower, qp.upper);
    const double gap = std::abs(sol.objective - qp.problem.Objective(z_ref));
    const double kkt = std::max({sol.kkt.stationarity, sol.kkt.primal,
                                 sol.kkt.complementarity});
    s.max_objective_gap = std::max(s.max_objective_gap, gap);
    s.max_kkt_residual = std::max(s.max_kkt_residual, kkt);
    if (sol.status == QpStatus::kOptimal && gap < 1e-6 && kkt < 1e-8) {
      ++s.passed;
    } else {
      ++s.failed;
    }
  }
  return s;
}

}  // namespace nnmpc
