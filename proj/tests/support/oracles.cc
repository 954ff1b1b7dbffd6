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

#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace oracle {

Eigen::Vector3d PlantRhs(const Eigen::Vector3d& x, double q_in,
                         const nnmpc::PlantParams& p) {
  const double ca = x(0);
  const double cb = x(1);
  const double cc = x(2);
  const double d = p.flow / p.volume;
  const double cc2 = cc * cc;
  Eigen::Vector3d dx;
  dx(0) = -p.k1 * ca + d * (p.c_a_feed - ca) + p.k2 * cc2;
  dx(1) = -d * cb + p.k3 * cc2;
  dx(2) = p.k1 * ca - d * cc - (p.k2 + p.k3) * cc2 + q_in;
  return dx;
}

Eigen::Vector3d FineIntegrate(const Eigen::Vector3d& x, double q_in,
                              double duration, double h,
                              const nnmpc::PlantParams& p) {
  const long steps = std::max(1L, std::lround(duration / h));
  const double dt = duration / static_cast<double>(steps);
  Eigen::Vector3d y = x;
  for (long i = 0; i < steps; ++i) {
    const Eigen::Vector3d k1 = PlantRhs(y, q_in, p);
    const Eigen::Vector3d k2 = PlantRhs(y + 0.5 * dt * k1, q_in, p);
    const Eigen::Vector3d k3 = PlantRhs(y + 0.5 * dt * k2, q_in, p);
    const Eigen::Vector3d k4 = PlantRhs(y + dt * k3, q_in, p);
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

Eigen::Vector3d ClosedFormSteadyState(double q_in, const nnmpc::PlantParams& p) {
  const double d = p.flow / p.volume;
  // a c^2 + b c + c0 = 0 after substituting cA(cC) and cB(cC).
  const double a = p.k1 * p.k2 / (p.k1 + d) - (p.k2 + p.k3);
  const double b = -d;
  const double c0 = p.k1 * d * p.c_a_feed / (p.k1 + d) + q_in;
  const double disc = b * b - 4.0 * a * c0;
  const double r1 = (-b + std::sqrt(disc)) / (2.0 * a);
  const double r2 = (-b - std::sqrt(disc)) / (2.0 * a);
  const double cc = std::max(r1, r2);
  const double ca = (d * p.c_a_feed + p.k2 * cc * cc) / (p.k1 + d);
  const double cb = p.k3 * cc * cc / d;
  return {ca, cb, cc};
}

Eigen::Matrix3d FiniteDifferenceJacobian(const Eigen::Vector3d& x, double q_in,
                                         const nnmpc::PlantParams& p,
                                         double step) {
  Eigen::Matrix3d j;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d hi = x;
    Eigen::Vector3d lo = x;
    hi(i) += step;
    lo(i) -= step;
    j.col(i) = (PlantRhs(hi, q_in, p) - PlantRhs(lo, q_in, p)) / (2.0 * step);
  }
  return j;
}

BoxProblem RandomBoxProblem(std::uint64_t seed, int max_n) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int n = std::uniform_int_distribution<int>(1, max_n)(gen);
  BoxProblem p;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = unit(gen);
  }
  p.h = m.transpose() * m + 0.5 * Eigen::MatrixXd::Identity(n, n);
  p.f.resize(n);
  p.lower.resize(n);
  p.upper.resize(n);
  for (int i = 0; i < n; ++i) {
    p.f(i) = 3.0 * unit(gen);
    p.lower(i) = -1.0 - 0.5 * (unit(gen) + 1.0);
    p.upper(i) = 0.5 + 0.75 * (unit(gen) + 1.0);
  }
  return p;
}

Eigen::VectorXd ProjectedGradient(const BoxProblem& p, long iterations) {
  const double lmax =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.h).eigenvalues().maxCoeff();
  const double step = 1.0 / lmax;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p.f.size());
  for (long k = 0; k < iterations; ++k) {
    Eigen::VectorXd next = (z - step * (p.h * z + p.f)).cwiseMax(p.lower).cwiseMin(p.upper);
    if ((next - z).lpNorm<Eigen::Infinity>() == 0.0) break;
    z = std::move(next);
  }
  return z;
}

double BoxObjective(const BoxProblem& p, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(p.h * z) + p.f.dot(z);
}

Eigen::VectorXd ExplicitStateMpc(const nnmpc::LinearModel& model,
                                 const nnmpc::MpcConfig& config,
                                 const Eigen::Vector3d& dx0) {
  const int n = config.horizon;
  const int nv = n + 3 * n;
  const int ne = 3 * n;
  const double inf = std::numeric_limits<double>::infinity();
  auto ux = [n](int k) { return n + 3 * (k - 1); };  // column of x_k, k >= 1

  // Cost: sum_{k=1..N} Q (C x_k)^2 + R sum_{k=0..N-1} u_k^2.
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(nv, nv);
  for (int k = 0; k < n; ++k) p(k, k) = 2.0 * config.input_weight;
  const Eigen::Matrix3d ctc = model.c.transpose() * model.c;
  for (int k = 1; k <= n; ++k) {
    p.block<3, 3>(ux(k), ux(k)) = 2.0 * config.output_weight * ctc;
  }

  // Rows 0..ne-1: x_{k+1} - A x_k - B u_k = (A dx0 for k = 0, else 0).
  // Rows ne..ne+nv-1: identity on every variable with its box.
  const int m = ne + nv;
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(m, nv);
  Eigen::VectorXd lo(m);
  Eigen::VectorXd hi(m);
  for (int k = 0; k < n; ++k) {
    const int r = 3 * k;
    big.block<3, 3>(r, ux(k + 1)) = Eigen::Matrix3d::Identity();
    if (k > 0) big.block<3, 3>(r, ux(k)) = -model.a;
    big.block<3, 1>(r, k) = -model.b;
    const Eigen::Vector3d rhs = k == 0 ? Eigen::Vector3d(model.a * dx0) : Eigen::Vector3d::Zero();
    lo.segment<3>(r) = rhs;
    hi.segment<3>(r) = rhs;
  }
  big.bottomRows(nv) = Eigen::MatrixXd::Identity(nv, nv);
  const Eigen::Vector3d x_s = model.x_s.ToVector();
  for (int k = 0; k < n; ++k) {
    lo(ne + k) = config.u_min - model.u_s;
    hi(ne + k) = config.u_max - model.u_s;
  }
  for (int k = 1; k <= n; ++k) {
    for (int i = 0; i < 3; ++i) {
      const int r = ne + ux(k) + i;
      if (k < n) {
        lo(r) = config.state_bounds.lower.ToVector()(i) - x_s(i);
        hi(r) = config.state_bounds.upper.ToVector()(i) - x_s(i);
      } else {
        lo(r) = -inf;
        hi(r) = inf;
      }
    }
  }

  // ADMM on  min 1/2 v'Pv  s.t.  lo <= big v <= hi.
  const double sigma = 1e-6;
  Eigen::VectorXd rho = Eigen::VectorXd::Constant(m, 0.1);
  rho.head(ne).setConstant(100.0);
  const Eigen::MatrixXd kkt = p + sigma * Eigen::MatrixXd::Identity(nv, nv) +
                              big.transpose() * rho.asDiagonal() * big;
  const Eigen::LLT<Eigen::MatrixXd> llt(kkt);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  const double alpha = 1.6;
  for (int it = 0; it < 200000; ++it) {
    const Eigen::VectorXd rhs =
        sigma * v + big.transpose() * (rho.cwiseProduct(z) - y);
    const Eigen::VectorXd v_tilde = llt.solve(rhs);
    const Eigen::VectorXd z_tilde = big * v_tilde;
    const Eigen::VectorXd v_next = alpha * v_tilde + (1.0 - alpha) * v;
    const Eigen::VectorXd z_relax = alpha * z_tilde + (1.0 - alpha) * z;
    const Eigen::VectorXd z_next =
        (z_relax + y.cwiseQuotient(rho)).cwiseMax(lo).cwiseMin(hi);
    y += rho.cwiseProduct(z_relax - z_next);
    const double primal = (big * v_next - z_next).lpNorm<Eigen::Infinity>();
    const double dual = (rho.cwiseProduct(z_next - z)).lpNorm<Eigen::Infinity>();
    v = v_next;
    z = z_next;
    if (it > 100 && primal < 1e-11 && dual < 1e-11) break;
  }

  // Polish: equalities plus every box row carrying a clearly signed
  // multiplier, then one exact KKT solve.
  std::vector<int> active;
  for (int r = 0; r < m; ++r) {
    if (r < ne || std::abs(y(r)) > 1e-7) active.push_back(r);
  }
  const int na = static_cast<int>(active.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(nv + na, nv + na);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv + na);
  system.topLeftCorner(nv, nv) = p;
  for (int i = 0; i < na; ++i) {
    const int r = active[i];
    system.block(nv + i, 0, 1, nv) = big.row(r);
    system.block(0, nv + i, nv, 1) = big.row(r).transpose();
    rhs(nv + i) = (r < ne || y(r) < 0.0) ? lo(r) : hi(r);
  }
  const Eigen::VectorXd sol = system.fullPivLu().solve(rhs);
  return sol.head(n);
}

double KahanJ(const std::vector<nnmpc::StateVec>& states,
              const nnmpc::StateVec& x_s) {
  double sum = 0.0;
  double carry = 0.0;
  for (const nnmpc::StateVec& x : states) {
    const double terms[3] = {x.c_a - x_s.c_a, x.c_b - x_s.c_b, x.c_c - x_s.c_c};
    for (double t : terms) {
      const double y = t * t - carry;
      const double next = sum + y;
      carry = (next - sum) - y;
      sum = next;
    }
  }
  return sum;
}

namespace {

using Real = long double;

// Evaluated in long double so that central differences of the result are
// limited by truncation rather than by cancellation.
Real ExtendedLoss(const nnmpc::Mlp& model, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& labels) {
  const auto& in = model.input_scaler();
  const auto& out = model.output_scaler();
  const auto& layers = model.layers();
  Real loss = 0.0L;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    std::vector<Real> h(inputs.cols());
    for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
      h[k] = (static_cast<Real>(inputs(i, k)) - in.center(k)) / in.half_range(k);
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Eigen::MatrixXd& w = layers[l].weights;
      std::vector<Real> next(w.rows());
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        Real z = layers[l].bias(r);
        for (Eigen::Index c = 0; c < w.cols(); ++c) z += static_cast<Real>(w(r, c)) * h[c];
        next[r] = l + 1 < layers.size() ? 2.0L / (1.0L + std::exp(z)) - 1.0L : z;
      }
      h = std::move(next);
    }
    const Real target = (static_cast<Real>(labels(i)) - out.center(0)) / out.half_range(0);
    loss += (target - h[0]) * (target - h[0]);
  }
  return loss;
}

}  // namespace

double ScaledLoss(const nnmpc::Mlp& model, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& labels) {
  return static_cast<double>(ExtendedLoss(model, inputs, labels));
}

Eigen::VectorXd FiniteDifferenceLossGradient(const nnmpc::Mlp& model,
                                             const Eigen::MatrixXd& inputs,
                                             const Eigen::VectorXd& labels,
                                             double step) {
  const Eigen::VectorXd theta = model.GetParameters();
  Eigen::VectorXd g(theta.size());
  nnmpc::Mlp probe = model;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    const double hi = theta(i) + step;
    const double lo = theta(i) - step;
    t(i) = hi;
    probe.SetParameters(t);
    const Real up = ExtendedLoss(probe, inputs, labels);
    t(i) = lo;
    probe.SetParameters(t);
    const Real down = ExtendedLoss(probe, inputs, labels);
    // Divide by the step actually taken after rounding theta +- step.
    g(i) = static_cast<double>((up - down) / (static_cast<Real>(hi) - static_cast<Real>(lo)));
  }
  return g;
}

}  // namespace oracle
