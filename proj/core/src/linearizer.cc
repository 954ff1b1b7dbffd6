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

#include "nnmpc/linearizer.h"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "nnmpc/errors.h"

namespace nnmpc {

ContinuousLinearModel Jacobian(const StateVec& x, double q_in,
                               const PlantParams& p) {
  if (!x.IsFinite() || !std::isfinite(q_in)) {
    throw InvalidArgument("Jacobian: non-finite state or input");
  }
  const double d = p.dilution();
  ContinuousLinearModel m;
  m.a << -p.k1 - d, 0.0, 2.0 * p.k2 * x.c_c,
         0.0, -d, 2.0 * p.k3 * x.c_c,
         p.k1, 0.0, -d - 2.0 * (p.k2 + p.k3) * x.c_c;
  m.b << 0.0, 0.0, 1.0;
  m.x_s = x;
  m.u_s = q_in;
  return m;
}

Eigen::MatrixXd MatrixExponential(const Eigen::MatrixXd& m, double tolerance) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("MatrixExponential: matrix must be square");
  }
  if (!m.allFinite()) throw NumericalError("MatrixExponential: non-finite input");
  const Eigen::Index n = m.rows();
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd scaled = m / std::ldexp(1.0, squarings);

  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 60; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().colwise().sum().maxCoeff() < tolerance) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  if (!sum.allFinite()) throw NumericalError("MatrixExponential: overflow");
  return sum;
}

LinearModel DiscretizeZoh(const ContinuousLinearModel& m, double ts) {
  if (!(ts > 0.0) || !std::isfinite(ts)) {
    throw InvalidArgument("DiscretizeZoh: sampling period must be positive");
  }
  Eigen::Matrix4d aug = Eigen::Matrix4d::Zero();
  aug.topLeftCorner<3, 3>() = m.a * ts;
  aug.topRightCorner<3, 1>() = m.b * ts;
  const Eigen::MatrixXd e = MatrixExponential(aug);
  LinearModel out;
  out.a = e.topLeftCorner(3, 3);
  out.b = e.topRightCorner(3, 1);
  if (!out.a.allFinite() || !out.b.allFinite()) {
    throw NumericalError("DiscretizeZoh: non-finite result");
  }
  out.c << 0.0, 1.0, 0.0;
  out.d = 0.0;
  out.ts = ts;
  out.x_s = m.x_s;
  out.u_s = m.u_s;
  return out;
}

LinearModel LinearizeAtSteadyState(double u_s, double ts, const PlantParams& p) {
  const StateVec x_s = FindSteadyState(u_s, {2.0, 4.0, 1.0}, p);
  return DiscretizeZoh(Jacobian(x_s, u_s, p), ts);
}

double SpectralRadius(const Eigen::Matrix3d& a) {
  return Eigen::EigenSolver<Eigen::Matrix3d>(a, false)
      .eigenvalues()
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace nnmpc
