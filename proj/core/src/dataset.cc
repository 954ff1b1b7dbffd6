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

#include "nnmpc/dataset.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "nnmpc/errors.h"
#include "nnmpc/parallel.h"
#include "nnmpc/random.h"

namespace nnmpc {
namespace {

using nlohmann::json;

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json BoxToJson(const StateBox& b) {
  return {{"lower", {b.lower.c_a, b.lower.c_b, b.lower.c_c}},
          {"upper", {b.upper.c_a, b.upper.c_b, b.upper.c_c}}};
}

StateVec StateFromJson(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

std::filesystem::path MetaPath(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".meta.json");
}

}  // namespace

Eigen::MatrixXd TrainingSet::InputMatrix() const {
  Eigen::MatrixXd x(samples.size(), 3);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    x.row(i) = samples[i].ToVector().transpose();
  }
  return x;
}

Eigen::VectorXd TrainingSet::LabelVector() const {
  return Eigen::Map<const Eigen::VectorXd>(labels.data(),
                                           static_cast<Eigen::Index>(labels.size()));
}

TrainingSet TrainingSet::Subset(std::span<const int> rows) const {
  TrainingSet out;
  out.points_per_axis = points_per_axis;
  out.grid_size = grid_size;
  out.bounds = bounds;
  out.u_min = u_min;
  out.u_max = u_max;
  out.mpc_hash = mpc_hash;
  out.samples.reserve(rows.size());
  out.labels.reserve(rows.size());
  for (const int r : rows) {
    out.samples.push_back(samples.at(r));
    out.labels.push_back(labels.at(r));
    if (!grid_indices.empty()) out.grid_indices.push_back(grid_indices.at(r));
  }
  return out;
}

int PointsPerAxis(int n_k) {
  if (n_k < 8) {
    throw InvalidArgument("grid needs at least 8 samples (2 per axis)");
  }
  return static_cast<int>(std::lround(std::cbrt(static_cast<double>(n_k))));
}

std::vector<StateVec> GenerateGrid(const StateBox& bounds, int n_k) {
  bounds.Validate();
  const int m = PointsPerAxis(n_k);
  auto axis = [m](double lo, double hi) {
    std::vector<double> v(m);
    for (int i = 0; i < m; ++i) {
      v[i] = i == m - 1 ? hi : lo + (hi - lo) * i / (m - 1);
    }
    return v;
  };
  const auto a = axis(bounds.lower.c_a, bounds.upper.c_a);
  const auto b = axis(bounds.lower.c_b, bounds.upper.c_b);
  const auto c = axis(bounds.lower.c_c, bounds.upper.c_c);
  std::vector<StateVec> out;
  out.reserve(static_cast<std::size_t>(m) * m * m);
  for (const double ca : a) {
    for (const double cb : b) {
      for (const double cc : c) out.push_back({ca, cb, cc});
    }
  }
  return out;
}

TrainingSet LabelWithMpc(std::span<const StateVec> samples,
                         const CondensedMpc& mpc, int jobs) {
  const std::size_t n = samples.size();
  std::vector<double> labels(n, 0.0);
  std::vector<char> feasible(n, 0);
  const std::size_t workers = std::max(1, jobs);
  // One solver per contiguous block; cold starts keep every label
  // independent of how the grid is partitioned.
  ParallelFor(workers, jobs, [&](std::size_t w) {
    QpSolver solver;
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    for (std::size_t i = begin; i < end; ++i) {
      const MpcResult r = SolveMpc(mpc, samples[i], solver);
      feasible[i] = r.feasible;
      if (r.feasible) labels[i] = r.u0;
    }
  });

  TrainingSet out;
  out.grid_size = static_cast<int>(n);
  out.points_per_axis = static_cast<int>(std::lround(std::cbrt(static_cast<double>(n))));
  out.bounds = mpc.config.state_bounds;
  out.u_min = mpc.config.u_min;
  out.u_max = mpc.config.u_max;
  out.mpc_hash = MpcConfigHash(mpc);
  for (std::size_t i = 0; i < n; ++i) {
    if (feasible[i]) {
      out.samples.push_back(samples[i]);
      out.labels.push_back(labels[i]);
      out.grid_indices.push_back(static_cast<int>(i));
    } else {
      out.dropped.push_back(static_cast<int>(i));
    }
  }
  if (2 * out.dropped.size() > n) {
    throw InvalidArgument("more than half of the grid is infeasible for the MPC; "
                          "check the state and input bounds");
  }
  return out;
}

std::pair<std::vector<int>, std::vector<int>> SplitIndices(std::size_t n,
                                                           double fraction,
                                                           std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("Split: empty set");
  if (!(fraction > 0.0 && fraction <= 0.5)) {
    throw InvalidArgument("Split: validation fraction must be in (0, 0.5]");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.Below(i + 1)]);
  }
  const auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  std::vector<int> validation(order.begin(), order.begin() + n_val);
  std::vector<int> train(order.begin() + n_val, order.end());
  return {std::move(train), std::move(validation)};
}

std::pair<TrainingSet, TrainingSet> Split(const TrainingSet& data,
                                          double fraction, std::uint64_t seed) {
  const auto [train, validation] = SplitIndices(data.size(), fraction, seed);
  return {data.Subset(train), data.Subset(validation)};
}

std::string MpcConfigHash(const CondensedMpc& mpc) {
  std::ostringstream os;
  const MpcConfig& c = mpc.config;
  os << c.horizon << ';' << FormatDouble(c.output_weight) << ';'
     << FormatDouble(c.input_weight) << ';' << FormatDouble(c.u_min) << ';'
     << FormatDouble(c.u_max) << ';' << FormatDouble(mpc.model.ts) << ';'
     << FormatDouble(mpc.model.u_s) << ';';
  for (const StateVec& s : {c.state_bounds.lower, c.state_bounds.upper, mpc.model.x_s}) {
    os << FormatDouble(s.c_a) << ',' << FormatDouble(s.c_b) << ','
       << FormatDouble(s.c_c) << ';';
  }
  for (const double v : mpc.model.a.reshaped()) os << FormatDouble(v) << ',';
  for (const double v : mpc.model.b) os << FormatDouble(v) << ',';
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : os.str()) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void WriteDataset(const TrainingSet& data, const std::filesystem::path& csv) {
  {
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw InvalidArgument("cannot open " + csv.string() + " for writing");
    out << "cA,cB,cC,u\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      const StateVec& s = data.samples[i];
      out << FormatDouble(s.c_a) << ',' << FormatDouble(s.c_b) << ','
          << FormatDouble(s.c_c) << ',' << FormatDouble(data.labels[i]) << '\n';
    }
  }
  json meta = {
      {"grid_points_per_axis", data.points_per_axis},
      {"grid_size", data.grid_size},
      {"kept", data.size()},
      {"state_bounds", BoxToJson(data.bounds)},
      {"input_bounds", {data.u_min, data.u_max}},
      {"mpc_hash", data.mpc_hash},
      {"dropped", data.dropped},
  };
  std::ofstream out(MetaPath(csv), std::ios::binary);
  if (!out) throw InvalidArgument("cannot write dataset metadata");
  out << meta.dump(2) << '\n';
}

TrainingSet ReadDataset(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw InvalidArgument("cannot open dataset " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("cA,cB,cC,u", 0) != 0) {
    throw InvalidArgument("dataset " + csv.string() + ": expected header cA,cB,cC,u");
  }
  TrainingSet out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    double v[4];
    std::istringstream ls(line);
    for (int k = 0; k < 4; ++k) {
      std::string field;
      if (!std::getline(ls, field, ',')) {
        throw InvalidArgument("dataset row " + std::to_string(row) + ": expected 4 fields");
      }
      try {
        v[k] = std::stod(field);
      } catch (const std::exception&) {
        throw InvalidArgument("dataset row " + std::to_string(row) + ": bad number");
      }
    }
    out.samples.push_back({v[0], v[1], v[2]});
    out.labels.push_back(v[3]);
  }
  const auto meta_path = MetaPath(csv);
  if (std::filesystem::exists(meta_path)) {
    std::ifstream mi(meta_path);
    const json meta = json::parse(mi);
    out.points_per_axis = meta.value("grid_points_per_axis", 0);
    out.grid_size = meta.value("grid_size", 0);
    out.bounds.lower = StateFromJson(meta.at("state_bounds").at("lower"));
    out.bounds.upper = StateFromJson(meta.at("state_bounds").at("upper"));
    out.u_min = meta.at("input_bounds").at(0).get<double>();
    out.u_max = meta.at("input_bounds").at(1).get<double>();
    out.mpc_hash = meta.value("mpc_hash", "");
    out.dropped = meta.value("dropped", std::vector<int>{});
  }
  return out;
}

}  // namespace nnmpc
