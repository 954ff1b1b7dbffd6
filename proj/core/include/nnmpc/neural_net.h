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

#ifndef NNMPC_NEURAL_NET_H_
#define NNMPC_NEURAL_NET_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nnmpc/cstr_plant.h"
#include "nnmpc/dataset.h"

namespace nnmpc {

// 2 / (1 + exp(alpha z)) - 1, which equals -tanh(alpha z / 2). Saturates to
// the +-1 limits instead of overflowing for large |alpha z|.
double Activation(double alpha, double z);

// Per-dimension affine map onto [-1, 1]: s = (x - center) / half_range.
struct AffineScaler {
  Eigen::VectorXd center;
  Eigen::VectorXd half_range;

  static AffineScaler FromBounds(const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi);
  Eigen::VectorXd Scale(const Eigen::VectorXd& x) const;
  Eigen::VectorXd Descale(const Eigen::VectorXd& s) const;
  void Validate(Eigen::Index dim) const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

struct TrainingInfo {
  std::uint64_t seed = 0;
  int epochs = 0;
  int best_epoch = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

// Feed-forward network: every layer but the last applies Activation(1, .)
// to its affine pre-activation; the last layer is linear. The per-node
// steepness is folded into the incoming weights.
class Mlp {
 public:
  static std::vector<int> DefaultTopology() { return {3, 4, 4, 4, 4, 1}; }

  // Zero weights and biases.
  Mlp(std::vector<int> layer_sizes, AffineScaler input_scaler,
      AffineScaler output_scaler);

  // Weights uniform in +-1/sqrt(fan_in), biases likewise.
  static Mlp RandomInit(std::vector<int> layer_sizes,
                        AffineScaler input_scaler, AffineScaler output_scaler,
                        std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  const AffineScaler& input_scaler() const { return input_scaler_; }
  const AffineScaler& output_scaler() const { return output_scaler_; }
  const TrainingInfo& training_info() const { return info_; }
  void set_training_info(const TrainingInfo& info) { info_ = info; }

  int num_parameters() const;
  // Layer by layer: weights row-major, then bias.
  Eigen::VectorXd GetParameters() const;
  void SetParameters(const Eigen::VectorXd& params);

  // Scaled input -> scaled output. Throws NumericalError naming the layer
  // when a non-finite value appears.
  Eigen::VectorXd ForwardScaled(const Eigen::VectorXd& s) const;
  Eigen::VectorXd Forward(const Eigen::VectorXd& x) const;
  // Single-output convenience for the controller: state -> feed rate.
  double Forward(const StateVec& x) const;

  void Validate() const;

 private:
  std::vector<int> layer_sizes_;
  std::vector<DenseLayer> layers_;
  AffineScaler input_scaler_;
  AffineScaler output_scaler_;
  TrainingInfo info_;
};

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

// Sum of squared residuals in scaled output space and its exact gradient
// with respect to GetParameters(). Inputs are rows of absolute states,
// labels absolute feed rates. Single-output networks only.
LossGradient LossAndGradient(const Mlp& model, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& labels);

struct TrainConfig {
  int max_epochs = 1000;
  double loss_tolerance = 1e-12;   // training MSE improvement over `patience`
  double initial_damping = 1e-3;   // Levenberg-Marquardt mu
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  int patience = 50;
  int jobs = 1;

  void Validate() const;
};

struct TrainResult {
  Mlp model;
  std::vector<double> train_mse;       // per epoch, scaled units
  std::vector<double> validation_mse;  // per epoch, scaled units
  int best_epoch = 0;
};

// Levenberg-Marquardt on the sum-of-squares objective over the training
// split, with gradient-descent steps as fallback when the damped normal
// equations fail. Returns the parameters with the best validation error.
// Throws TrainingError when the loss becomes non-finite.
TrainResult TrainOnSplit(const Eigen::MatrixXd& train_inputs,
                         const Eigen::VectorXd& train_labels,
                         const Eigen::MatrixXd& validation_inputs,
                         const Eigen::VectorXd& validation_labels,
                         const TrainConfig& config, Mlp initial);

// Splits the set with config.validation_fraction and trains the default
// topology with bounds-based scalers.
TrainResult Train(const TrainingSet& data, const TrainConfig& config);

// Root-mean-square error in scaled output units.
double ScaledRmse(const Mlp& model, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& labels);

std::string MlpToJson(const Mlp& model);
Mlp MlpFromJson(const std::string& text);
void SaveMlp(const Mlp& model, const std::filesystem::path& path);
Mlp LoadMlp(const std::filesystem::path& path);

}  // namespace nnmpc

#endif  // NNMPC_NEURAL_NET_H_
