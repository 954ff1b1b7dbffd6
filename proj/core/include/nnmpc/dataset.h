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

#ifndef NNMPC_DATASET_H_
#define NNMPC_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nnmpc/cstr_plant.h"
#include "nnmpc/mpc.h"

namespace nnmpc {

// Grid samples labeled with the MPC's first optimal action (absolute units).
struct TrainingSet {
  std::vector<StateVec> samples;
  std::vector<double> labels;
  std::vector<int> grid_indices;  // grid position of each kept sample
  std::vector<int> dropped;       // grid positions of infeasible samples
  int points_per_axis = 0;
  int grid_size = 0;
  StateBox bounds;
  double u_min = 0.0;
  double u_max = 10.0;
  std::string mpc_hash;

  std::size_t size() const { return samples.size(); }
  Eigen::MatrixXd InputMatrix() const;  // rows [cA cB cC]
  Eigen::VectorXd LabelVector() const;
  TrainingSet Subset(std::span<const int> rows) const;
};

// round(n_k^(1/3)); throws InvalidArgument when n_k < 8.
int PointsPerAxis(int n_k);

// Cartesian product of PointsPerAxis(n_k) equidistant values per axis,
// endpoints included, with c_C varying fastest.
std::vector<StateVec> GenerateGrid(const StateBox& bounds, int n_k);

// Solves the MPC at every sample. Infeasible samples go to `dropped`.
// Output is in sample order and independent of `jobs`. Throws
// InvalidArgument when more than half of the samples are infeasible.
TrainingSet LabelWithMpc(std::span<const StateVec> samples,
                         const CondensedMpc& mpc, int jobs = 1);

// Seeded shuffle, then the first round(fraction * n) rows become the
// validation part.
std::pair<std::vector<int>, std::vector<int>> SplitIndices(std::size_t n,
                                                           double fraction,
                                                           std::uint64_t seed);
std::pair<TrainingSet, TrainingSet> Split(const TrainingSet& data,
                                          double fraction, std::uint64_t seed);

// Stable fingerprint of the MPC settings and model matrices.
std::string MpcConfigHash(const CondensedMpc& mpc);

// CSV `cA,cB,cC,u` with 17 significant digits, plus `<path>.meta.json`
// holding grid shape, bounds, hash and dropped indices.
void WriteDataset(const TrainingSet& data, const std::filesystem::path& csv);
TrainingSet ReadDataset(const std::filesystem::path& csv);

}  // namespace nnmpc

#endif  // NNMPC_DATASET_H_
