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

#include "nnmpc/random.h"

namespace nnmpc {
namespace {

std::uint64_t Mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::Next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return Mix(state_);
}

double Rng::Uniform() {
  return static_cast<double>(Next() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::Below(std::uint64_t bound) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = -bound % bound;
  for (;;) {
    const std::uint64_t r = Next();
    if (r >= limit) return r % bound;
  }
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, then mixed with the parent seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return Mix(seed ^ Mix(h));
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index) {
  return Mix(Mix(seed) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

}  // namespace nnmpc
