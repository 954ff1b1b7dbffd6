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

#ifndef NNMPC_RANDOM_H_
#define NNMPC_RANDOM_H_

#include <cstdint>
#include <string_view>

namespace nnmpc {

// Small portable generator (SplitMix64). The standard library distributions
// are implementation-defined, so every random draw in the project goes
// through this class to keep output files identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t Next();
  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer on [0, bound). bound must be positive.
  std::uint64_t Below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

// Derives an independent seed for a named sub-stream.
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view name);
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index);

}  // namespace nnmpc

#endif  // NNMPC_RANDOM_H_
