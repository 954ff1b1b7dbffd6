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

#include "nnmpc/qp_solver.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "nnmpc/errors.h"

namespace nnmpc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative size below which the part of a constraint normal outside the
// working-set span is treated as zero.
constexpr double kDependenceTol = 1e-11;

}  // namespace

double QpProblem::Objective(const Eigen::VectorXd& z) const {
  return 0.5 * z.dot(hessian * z) + gradient.dot(z);
}

void QpProblem::Validate() const {
  const Eigen::Index n = hessian.rows();
  if (n == 0 || hessian.cols() != n) {
    throw InvalidArgument("QpProblem: Hessian must be square and non-empty");
  }
  if (gradient.size() != n) {
    throw InvalidArgument("QpProblem: gradient size does not match Hessian");
  }
  if (constraint_matrix.rows() > 0 && constraint_matrix.cols() != n) {
    throw InvalidArgument("QpProblem: constraint matrix has wrong column count");
  }
  if (constraint_bound.size() != constraint_matrix.rows()) {
    throw InvalidArgument("QpProblem: bound size does not match constraints");
  }
  if (!hessian.allFinite() || !gradient.allFinite() ||
      !constraint_matrix.allFinite() || !constraint_bound.allFinite()) {
    throw InvalidArgument("QpProblem: non-finite data");
  }
  if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw InvalidArgument("QpProblem: Hessian is not symmetric");
  }
}

std::string_view ToString(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal:
      return "optimal";
    case QpStatus::kInfeasible:
      return "infeasible";
    case QpStatus::kIterationLimit:
      return "iteration-limit";
  }
  return "unknown";
}

KktResiduals ComputeKktResiduals(const QpProblem& problem,
                                 const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& lambda) {
  KktResiduals res;
  Eigen::VectorXd grad = problem.hessian * z + problem.gradient;
  if (problem.num_constraints() > 0) {
    grad.noalias() += problem.constraint_matrix.transpose() * lambda;
    const Eigen::VectorXd slack =
        problem.constraint_matrix * z - problem.constraint_bound;
    res.primal = std::max(0.0, slack.maxCoeff());
    res.complementarity = lambda.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  res.stationarity = grad.lpNorm<Eigen::Infinity>();
  return res;
}

void QpSolver::AddToFactorization(Eigen::VectorXd& d) {
  const int n = static_cast<int>(j_.rows());
  // Rotate the tail of d into position q_, carrying J along.
  for (int i = n - 1; i > q_; --i) {
    const double a = d(i - 1);
    const double b = d(i);
    if (b == 0.0) continue;
    const double h = std::hypot(a, b);
    const double c = a / h;
    const double s = b / h;
    d(i - 1) = h;
    d(i) = 0.0;
    for (int row = 0; row < n; ++row) {
      const double ji = j_(row, i - 1);
      const double jk = j_(row, i);
      j_(row, i - 1) = c * ji + s * jk;
      j_(row, i) = -s * ji + c * jk;
    }
  }
  r_.col(q_).head(q_ + 1) = d.head(q_ + 1);
  ++q_;
}

void QpSolver::DropFromFactorization(int k) {
  const int n = static_cast<int>(j_.rows());
  for (int col = k; col < q_ - 1; ++col) {
    r_.col(col).head(q_) = r_.col(col + 1).head(q_);
  }
  r_.col(q_ - 1).setZero();
  // Restore triangularity of the Hessenberg block left behind.
  for (int col = k; col < q_ - 1; ++col) {
    const double a = r_(col, col);
    const double b = r_(col + 1, col);
    if (b == 0.0) continue;
    const double h = std::hypot(a, b);
    const double c = a / h;
    const double s = b / h;
    for (int cc = col; cc < q_ - 1; ++cc) {
      const double ra = r_(col, cc);
      const double rb = r_(col + 1, cc);
      r_(col, cc) = c * ra + s * rb;
      r_(col + 1, cc) = -s * ra + c * rb;
    }
    r_(col + 1, col) = 0.0;
    for (int row = 0; row < n; ++row) {
      const double ja = j_(row, col);
      const double jb = j_(row, col + 1);
      j_(row, col) = c * ja + s * jb;
      j_(row, col + 1) = -s * ja + c * jb;
    }
  }
  active_.erase(active_.begin() + k);
  u_.erase(u_.begin() + k);
  --q_;
}

// Minimizer over the working set treated as equalities, and its multipliers:
//   x = -J2 J2' f + J1 R^{-T} b_A,   u = R^{-1} J1' (Hx + f)
// with normals n_i = -G_i and right-hand sides b_i = -w_i.
void QpSolver::SolveEqualityProblem(const QpProblem& problem) {
  const Eigen::Index n = j_.rows();
  const auto j1 = j_.leftCols(q_);
  const auto j2 = j_.rightCols(n - q_);
  x_ = -(j2 * (j2.transpose() * problem.gradient));
  if (q_ == 0) return;
  Eigen::VectorXd b(q_);
  for (int i = 0; i < q_; ++i) b(i) = -problem.constraint_bound(active_[i]);
  const auto r = r_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>();
  x_.noalias() += j1 * r.transpose().solve(b);
  const Eigen::VectorXd u =
      r.solve(j1.transpose() * (problem.hessian * x_ + problem.gradient));
  for (int i = 0; i < q_; ++i) u_[i] = u(i);
}

QpSolution QpSolver::Solve(const QpProblem& problem, const QpOptions& options,
                           std::span<const int> initial_active_set) {
  problem.Validate();
  if (!(options.tolerance > 0.0)) {
    throw InvalidArgument("QpSolver: tolerance must be positive");
  }
  const int n = static_cast<int>(problem.num_variables());
  const int m = static_cast<int>(problem.num_constraints());
  const int max_iterations =
      options.max_iterations > 0 ? options.max_iterations : 10 * (n + m);
  const double violation_tol = 1e-3 * options.tolerance;

  Eigen::LLT<Eigen::MatrixXd> llt(problem.hessian);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument("QpSolver: Hessian is not positive definite");
  }
  // J = L^{-T}; R empty.
  j_ = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  r_.setZero(n, n);
  d_.resize(n);
  active_.clear();
  u_.clear();
  q_ = 0;

  const auto& g = problem.constraint_matrix;
  const auto& w = problem.constraint_bound;
  Eigen::VectorXd row_norm(m);
  for (int i = 0; i < m; ++i) row_norm(i) = g.row(i).norm();
  std::vector<char> is_active(m, 0);

  QpSolution sol;
  sol.status = QpStatus::kOptimal;
  int iterations = 0;

  // Warm start: load the guessed working set, then release constraints with
  // negative multipliers until the start is dual feasible.
  for (const int idx : initial_active_set) {
    if (idx < 0 || idx >= m || is_active[idx] || q_ >= n) continue;
    if (row_norm(idx) == 0.0) continue;
    d_.noalias() = -(j_.transpose() * g.row(idx).transpose());
    if (d_.tail(n - q_).norm() <= kDependenceTol * d_.norm()) continue;
    AddToFactorization(d_);
    active_.push_back(idx);
    u_.push_back(0.0);
    is_active[idx] = 1;
  }
  SolveEqualityProblem(problem);
  while (q_ > 0) {
    const auto it = std::min_element(u_.begin(), u_.end());
    if (*it >= 0.0) break;
    const int k = static_cast<int>(it - u_.begin());
    is_active[active_[k]] = 0;
    DropFromFactorization(k);
    ++iterations;
    SolveEqualityProblem(problem);
  }

  Eigen::VectorXd slack(m);
  Eigen::VectorXd z_dir(n);
  Eigen::VectorXd r_dir;
  bool done = false;
  while (!done) {
    // Step 1: most violated constraint, scaled by its row norm.
    if (m > 0) slack.noalias() = w - g * x_;
    int p = -1;
    double worst = 0.0;
    for (int i = 0; i < m; ++i) {
      if (is_active[i] || slack(i) >= -violation_tol) continue;
      if (row_norm(i) == 0.0) {
        sol.status = QpStatus::kInfeasible;
        done = true;
        break;
      }
      const double v = slack(i) / row_norm(i);
      if (v < worst) {
        worst = v;
        p = i;
      }
    }
    if (done || p < 0) break;
    if (iterations >= max_iterations) {
      sol.status = QpStatus::kIterationLimit;
      break;
    }

    double u_plus = 0.0;
    // Step 2: move along the primal/dual directions until p becomes active
    // or a working-set multiplier hits zero.
    for (;;) {
      d_.noalias() = -(j_.transpose() * g.row(p).transpose());
      const double d_tail_sq = d_.tail(n - q_).squaredNorm();
      const bool dependent =
          d_tail_sq <= kDependenceTol * kDependenceTol * d_.squaredNorm();
      if (!dependent) {
        z_dir.noalias() = j_.rightCols(n - q_) * d_.tail(n - q_);
      }
      r_dir = r_.topLeftCorner(q_, q_)
                  .triangularView<Eigen::Upper>()
                  .solve(d_.head(q_));

      double t1 = kInf;
      int blocking = -1;
      const double r_floor =
          1e-14 * (1.0 + (q_ > 0 ? r_dir.lpNorm<Eigen::Infinity>() : 0.0));
      for (int k = 0; k < q_; ++k) {
        if (r_dir(k) > r_floor) {
          const double ratio = u_[k] / r_dir(k);
          if (ratio < t1) {
            t1 = ratio;
            blocking = k;
          }
        }
      }
      const double s_p = w(p) - g.row(p).dot(x_);
      const double t2 = dependent ? kInf : std::max(0.0, -s_p) / d_tail_sq;
      const double t = std::min(t1, t2);

      if (t == kInf) {
        sol.status = QpStatus::kInfeasible;
        done = true;
        break;
      }
      if (iterations >= max_iterations) {
        sol.status = QpStatus::kIterationLimit;
        done = true;
        break;
      }
      ++iterations;
      for (int k = 0; k < q_; ++k) u_[k] -= t * r_dir(k);
      u_plus += t;
      if (t2 == kInf) {
        // Dual-only step: p is dependent on the working set.
        is_active[active_[blocking]] = 0;
        DropFromFactorization(blocking);
        continue;
      }
      x_.noalias() += t * z_dir;
      if (t2 <= t1) {
        AddToFactorization(d_);
        active_.push_back(p);
        u_.push_back(u_plus);
        is_active[p] = 1;
        break;
      }
      is_active[active_[blocking]] = 0;
      DropFromFactorization(blocking);
    }
  }

  // Polish the final iterate on its working set to remove accumulated drift.
  if (sol.status == QpStatus::kOptimal) SolveEqualityProblem(problem);

  sol.z = x_;
  sol.lambda = Eigen::VectorXd::Zero(m);
  for (int k = 0; k < q_; ++k) sol.lambda(active_[k]) = u_[k];
  sol.objective = problem.Objective(sol.z);
  sol.kkt = ComputeKktResiduals(problem, sol.z, sol.lambda);
  sol.iterations = iterations;
  sol.active_set = active_;
  return sol;
}

}  // namespace nnmpc
