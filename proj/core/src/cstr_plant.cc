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

#include "nnmpc/cstr_plant.h"

#include <cmath>
#include <string>

#include <Eigen/LU>

#include "nnmpc/errors.h"
#include "nnmpc/linearizer.h"

namespace nnmpc {

void PlantParams::Validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw InvalidArgument(std::string("plant parameter '") + name +
                            "' must be finite and positive");
    }
  };
  check(k1, "k1");
  check(k2, "k2");
  check(k3, "k3");
  check(flow, "F");
  check(volume, "V");
  check(c_a_feed, "cA_feed");
}

bool StateVec::IsFinite() const {
  return std::isfinite(c_a) && std::isfinite(c_b) && std::isfinite(c_c);
}

StateVec Rhs(const StateVec& x, double q_in, const PlantParams& p) {
  if (!x.IsFinite() || !std::isfinite(q_in)) {
    throw InvalidArgument("Rhs: non-finite state or input");
  }
  const double d = p.dilution();
  const double cc2 = x.c_c * x.c_c;
  return {
      -p.k1 * x.c_a + d * (p.c_a_feed - x.c_a) + p.k2 * cc2,
      -d * x.c_b + p.k3 * cc2,
      p.k1 * x.c_a - d * x.c_c - (p.k2 + p.k3) * cc2 + q_in,
  };
}

StateVec StepRk4(const StateVec& x, double q_in, double dt,
                 const PlantParams& p) {
  if (!(dt >= 0.0)) throw InvalidArgument("StepRk4: dt must be >= 0");
  const Eigen::Vector3d x0 = x.ToVector();
  auto f = [&](const Eigen::Vector3d& v) {
    return Rhs(StateVec::FromVector(v), q_in, p).ToVector();
  };
  const Eigen::Vector3d k1 = f(x0);
  const Eigen::Vector3d k2 = f(x0 + 0.5 * dt * k1);
  const Eigen::Vector3d k3 = f(x0 + 0.5 * dt * k2);
  const Eigen::Vector3d k4 = f(x0 + dt * k3);
  return StateVec::FromVector(x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

StateVec Integrate(const StateVec& x, double q_in, double duration,
                   int substeps, const PlantParams& p) {
  if (substeps < 1) throw InvalidArgument("Integrate: substeps must be >= 1");
  const double dt = duration / substeps;
  StateVec out = x;
  for (int i = 0; i < substeps; ++i) out = StepRk4(out, q_in, dt, p);
  return out;
}

StateVec FindSteadyState(double q_in, const StateVec& guess,
                         const PlantParams& p) {
  p.Validate();
  if (!guess.IsFinite() || !std::isfinite(q_in)) {
    throw InvalidArgument("FindSteadyState: non-finite guess or input");
  }
  constexpr int kMaxIterations = 100;
  Eigen::Vector3d x = guess.ToVector();
  Eigen::Vector3d r = Rhs(guess, q_in, p).ToVector();
  for (int it = 0; it < kMaxIterations; ++it) {
    if (r.lpNorm<Eigen::Infinity>() < 1e-13) break;
    const Eigen::Matrix3d jac =
        Jacobian(StateVec::FromVector(x), q_in, p).a;
    const Eigen::Vector3d step = jac.partialPivLu().solve(-r);
    // Backtracking on the residual norm keeps far-off guesses on track.
    double t = 1.0;
    Eigen::Vector3d trial = x + step;
    Eigen::Vector3d r_trial = Rhs(StateVec::FromVector(trial), q_in, p).ToVector();
    while (r_trial.norm() > r.norm() && t > 1e-4) {
      t *= 0.5;
      trial = x + t * step;
      r_trial = Rhs(StateVec::FromVector(trial), q_in, p).ToVector();
    }
    if (!trial.allFinite()) throw NumericalError("FindSteadyState: diverged");
    x = trial;
    r = r_trial;
  }
  if (!(r.lpNorm<Eigen::Infinity>() < kSteadyStateTolerance)) {
    throw ConvergenceError("FindSteadyState: no convergence in 100 iterations");
  }
  return StateVec::FromVector(x);
}

StateVec NominalSteadyState(const PlantParams& p) {
  return FindSteadyState(kNominalFeed, {2.0, 4.0, 1.0}, p);
}

}  // namespace nnmpc
