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

#ifndef NNMPC_CSTR_PLANT_H_
#define NNMPC_CSTR_PLANT_H_

#include <Eigen/Core>

namespace nnmpc {

// Kinetic and flow parameters of the A <-> 2C -> B reactor.
struct PlantParams {
  double k1 = 1.0;        // m^3/(mol s)
  double k2 = 3.0;        // m^3/(mol s)
  double k3 = 5.0;        // m^3/(mol s)
  double flow = 3.0;      // F, m^3/s
  double volume = 3.0;    // V, m^3
  double c_a_feed = 2.0;  // mol/m^3

  double dilution() const { return flow / volume; }

  // Throws InvalidArgument unless every field is finite and positive.
  void Validate() const;

  friend bool operator==(const PlantParams&, const PlantParams&) = default;
};

// Concentrations [c_A, c_B, c_C] in mol/m^3.
struct StateVec {
  double c_a = 0.0;
  double c_b = 0.0;
  double c_c = 0.0;

  Eigen::Vector3d ToVector() const { return {c_a, c_b, c_c}; }
  static StateVec FromVector(const Eigen::Vector3d& v) {
    return {v(0), v(1), v(2)};
  }
  bool IsFinite() const;

  friend bool operator==(const StateVec&, const StateVec&) = default;
};

// Right-hand side of the species balances. `q_in` is the molar feed of C
// in mol/s. Throws InvalidArgument on non-finite arguments.
StateVec Rhs(const StateVec& x, double q_in, const PlantParams& p);

// One classical Runge-Kutta step of length dt with q_in held constant.
StateVec StepRk4(const StateVec& x, double q_in, double dt,
                 const PlantParams& p);

// Advances the plant over `duration` seconds under a zero-order held input,
// using `substeps` equal RK4 steps.
StateVec Integrate(const StateVec& x, double q_in, double duration,
                   int substeps, const PlantParams& p);

// Newton iteration on Rhs(x, q_in) = 0 using the analytic Jacobian.
// The returned state satisfies ||Rhs||_inf < 1e-10; throws ConvergenceError
// after 100 iterations otherwise.
StateVec FindSteadyState(double q_in, const StateVec& guess,
                         const PlantParams& p);

// Steady state at the nominal feed q_in = 5 mol/s.
StateVec NominalSteadyState(const PlantParams& p = {});

inline constexpr double kNominalFeed = 5.0;
inline constexpr double kSteadyStateTolerance = 1e-10;

}  // namespace nnmpc

#endif  // NNMPC_CSTR_PLANT_H_
