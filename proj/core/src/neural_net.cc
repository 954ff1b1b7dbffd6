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

#include "nnmpc/neural_net.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>

#include "json.hpp"
#include "nnmpc/errors.h"
#include "nnmpc/parallel.h"
#include "nnmpc/random.h"

namespace nnmpc {
namespace {

using nlohmann::json;

// d/dz of Activation(1, z) expressed through its value.
inline double ActivationSlope(double sigma) { return -0.5 * (1.0 - sigma * sigma); }

// Per-thread buffers for one forward/backward pass.
struct Workspace {
  std::vector<Eigen::VectorXd> act;    // act[0] = input, act[l+1] = layer l output
  std::vector<Eigen::VectorXd> delta;  // d(output)/d(pre-activation of layer l)

  explicit Workspace(const std::vector<int>& sizes) {
    for (const int s : sizes) act.emplace_back(s);
    for (std::size_t l = 1; l < sizes.size(); ++l) delta.emplace_back(sizes[l]);
  }
};

double ForwardInto(const std::vector<DenseLayer>& layers, Workspace& ws) {
  const std::size_t n_layers = layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto& next = ws.act[l + 1];
    next.noalias() = layers[l].weights * ws.act[l];
    next += layers[l].bias;
    if (l + 1 < n_layers) {
      for (Eigen::Index i = 0; i < next.size(); ++i) next(i) = Activation(1.0, next(i));
    }
  }
  return ws.act[n_layers](0);
}

// Writes d(output)/d(params) into `row`, following GetParameters() order.
void BackwardInto(const std::vector<DenseLayer>& layers, Workspace& ws,
                  Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  const std::size_t n_layers = layers.size();
  ws.delta[n_layers - 1].setOnes();
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) {
      ws.delta[l].noalias() = layers[l + 1].weights.transpose() * ws.delta[l + 1];
      for (Eigen::Index i = 0; i < ws.delta[l].size(); ++i) {
        ws.delta[l](i) *= ActivationSlope(ws.act[l + 1](i));
      }
    }
  }
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& w = layers[l].weights;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        row(offset++) = ws.delta[l](r) * ws.act[l](c);
      }
    }
    for (Eigen::Index r = 0; r < w.rows(); ++r) row(offset++) = ws.delta[l](r);
  }
}

Eigen::MatrixXd ScaleRows(const AffineScaler& scaler, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd s(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    s.row(i) = ((x.row(i).transpose() - scaler.center).array() /
                scaler.half_range.array())
                   .transpose();
  }
  return s;
}

Eigen::VectorXd ScaleLabels(const AffineScaler& scaler, const Eigen::VectorXd& u) {
  return (u.array() - scaler.center(0)) / scaler.half_range(0);
}

void CheckSingleOutput(const Mlp& model) {
  if (model.layer_sizes().back() != 1) {
    throw InvalidArgument("single-output network required");
  }
}

// Predictions (and optionally the Jacobian rows) for scaled inputs.
class BatchEvaluator {
 public:
  BatchEvaluator(const Mlp& shape, const Eigen::MatrixXd& scaled_inputs, int jobs)
      : inputs_(scaled_inputs), jobs_(std::max(jobs, 1)), sizes_(shape.layer_sizes()) {}

  Eigen::VectorXd Predict(const std::vector<DenseLayer>& layers,
                          Eigen::MatrixXd* jacobian) const {
    const Eigen::Index n = inputs_.rows();
    Eigen::VectorXd out(n);
    const std::size_t workers = static_cast<std::size_t>(jobs_);
    ParallelFor(workers, jobs_, [&](std::size_t w) {
      Workspace ws(sizes_);
      const Eigen::Index begin = n * static_cast<Eigen::Index>(w) / static_cast<Eigen::Index>(workers);
      const Eigen::Index end = n * static_cast<Eigen::Index>(w + 1) / static_cast<Eigen::Index>(workers);
      for (Eigen::Index i = begin; i < end; ++i) {
        ws.act[0] = inputs_.row(i).transpose();
        out(i) = ForwardInto(layers, ws);
        if (jacobian != nullptr) BackwardInto(layers, ws, jacobian->row(i));
      }
    });
    return out;
  }

 private:
  const Eigen::MatrixXd& inputs_;
  int jobs_;
  std::vector<int> sizes_;
};

json VectorToJson(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd VectorFromJson(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double Activation(double alpha, double z) {
  // 2/(1+e^t) - 1 = -expm1(t)/(2+expm1(t)); evaluating expm1 at -|t| keeps
  // the argument bounded and avoids cancellation near zero.
  const double t = alpha * z;
  if (t >= 0.0) {
    const double em = std::expm1(-t);
    return em / (2.0 + em);
  }
  const double em = std::expm1(t);
  return -em / (2.0 + em);
}

AffineScaler AffineScaler::FromBounds(const Eigen::VectorXd& lo,
                                      const Eigen::VectorXd& hi) {
  AffineScaler s;
  s.center = 0.5 * (lo + hi);
  s.half_range = 0.5 * (hi - lo);
  return s;
}

Eigen::VectorXd AffineScaler::Scale(const Eigen::VectorXd& x) const {
  return (x - center).cwiseQuotient(half_range);
}

Eigen::VectorXd AffineScaler::Descale(const Eigen::VectorXd& s) const {
  return center + s.cwiseProduct(half_range);
}

void AffineScaler::Validate(Eigen::Index dim) const {
  if (center.size() != dim || half_range.size() != dim) {
    throw InvalidArgument("scaler dimension mismatch");
  }
  if (!center.allFinite() || !half_range.allFinite() ||
      !(half_range.array() > 0.0).all()) {
    throw InvalidArgument("scaler half-ranges must be finite and positive");
  }
}

Mlp::Mlp(std::vector<int> layer_sizes, AffineScaler input_scaler,
         AffineScaler output_scaler)
    : layer_sizes_(std::move(layer_sizes)),
      input_scaler_(std::move(input_scaler)),
      output_scaler_(std::move(output_scaler)) {
  if (layer_sizes_.size() < 2) throw InvalidArgument("Mlp needs at least two layer sizes");
  for (const int s : layer_sizes_) {
    if (s < 1) throw InvalidArgument("Mlp layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(layer_sizes_[l + 1], layer_sizes_[l]),
                       Eigen::VectorXd::Zero(layer_sizes_[l + 1])});
  }
  input_scaler_.Validate(layer_sizes_.front());
  output_scaler_.Validate(layer_sizes_.back());
}

Mlp Mlp::RandomInit(std::vector<int> layer_sizes, AffineScaler input_scaler,
                    AffineScaler output_scaler, std::uint64_t seed) {
  Mlp m(std::move(layer_sizes), std::move(input_scaler), std::move(output_scaler));
  Rng rng(seed);
  for (auto& layer : m.layers_) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.Uniform(-limit, limit);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      layer.bias(r) = rng.Uniform(-limit, limit);
    }
  }
  return m;
}

int Mlp::num_parameters() const {
  int n = 0;
  for (const auto& l : layers_) n += static_cast<int>(l.weights.size() + l.bias.size());
  return n;
}

Eigen::VectorXd Mlp::GetParameters() const {
  Eigen::VectorXd p(num_parameters());
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) p(k++) = l.weights(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) p(k++) = l.bias(r);
  }
  return p;
}

void Mlp::SetParameters(const Eigen::VectorXd& params) {
  if (params.size() != num_parameters()) {
    throw InvalidArgument("SetParameters: wrong parameter count");
  }
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = params(k++);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = params(k++);
  }
}

Eigen::VectorXd Mlp::ForwardScaled(const Eigen::VectorXd& s) const {
  if (s.size() != layer_sizes_.front()) throw InvalidArgument("Forward: input size");
  Eigen::VectorXd a = s;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weights * a + layers_[l].bias;
    if (l + 1 < layers_.size()) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = Activation(1.0, z(i));
    }
    if (!z.allFinite()) {
      throw NumericalError("Mlp::Forward: non-finite value in layer " + std::to_string(l));
    }
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd Mlp::Forward(const Eigen::VectorXd& x) const {
  return output_scaler_.Descale(ForwardScaled(input_scaler_.Scale(x)));
}

double Mlp::Forward(const StateVec& x) const {
  CheckSingleOutput(*this);
  Eigen::VectorXd v(3);
  v << x.c_a, x.c_b, x.c_c;
  return Forward(v)(0);
}

void Mlp::Validate() const {
  input_scaler_.Validate(layer_sizes_.front());
  output_scaler_.Validate(layer_sizes_.back());
  if (layers_.size() + 1 != layer_sizes_.size()) throw InvalidArgument("Mlp: layer count");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.rows() != layer_sizes_[l + 1] ||
        layer.weights.cols() != layer_sizes_[l] ||
        layer.bias.size() != layer_sizes_[l + 1]) {
      throw InvalidArgument("Mlp: layer " + std::to_string(l) + " has wrong shape");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw InvalidArgument("Mlp: layer " + std::to_string(l) + " has non-finite weights");
    }
  }
}

LossGradient LossAndGradient(const Mlp& model, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& labels) {
  CheckSingleOutput(model);
  if (inputs.rows() == 0) throw InvalidArgument("LossAndGradient: empty batch");
  if (inputs.rows() != labels.size() || inputs.cols() != model.layer_sizes().front()) {
    throw InvalidArgument("LossAndGradient: inputs and labels do not match");
  }
  const Eigen::MatrixXd s = ScaleRows(model.input_scaler(), inputs);
  const Eigen::VectorXd target = ScaleLabels(model.output_scaler(), labels);
  Workspace ws(model.layer_sizes());
  Eigen::RowVectorXd row(model.num_parameters());
  LossGradient out;
  out.gradient = Eigen::VectorXd::Zero(model.num_parameters());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    ws.act[0] = s.row(i).transpose();
    const double y = ForwardInto(model.layers(), ws);
    BackwardInto(model.layers(), ws, row);
    const double e = target(i) - y;
    out.loss += e * e;
    out.gradient -= 2.0 * e * row.transpose();
  }
  return out;
}

void TrainConfig::Validate() const {
  if (max_epochs < 1) throw InvalidArgument("train.max_epochs must be positive");
  if (!(loss_tolerance > 0.0)) throw InvalidArgument("train.loss_tolerance must be positive");
  if (!(initial_damping > 0.0)) throw InvalidArgument("train.initial_damping must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5)) {
    throw InvalidArgument("train.validation_fraction must be in (0, 0.5]");
  }
  if (patience < 1) throw InvalidArgument("train.patience must be positive");
}

TrainResult TrainOnSplit(const Eigen::MatrixXd& train_inputs,
                         const Eigen::VectorXd& train_labels,
                         const Eigen::MatrixXd& validation_inputs,
                         const Eigen::VectorXd& validation_labels,
                         const TrainConfig& config, Mlp initial) {
  config.Validate();
  CheckSingleOutput(initial);
  initial.Validate();
  if (train_inputs.rows() == 0 || train_inputs.rows() != train_labels.size() ||
      validation_inputs.rows() != validation_labels.size()) {
    throw InvalidArgument("TrainOnSplit: empty or mismatched data");
  }
  const Eigen::MatrixXd xs = ScaleRows(initial.input_scaler(), train_inputs);
  const Eigen::VectorXd ys = ScaleLabels(initial.output_scaler(), train_labels);
  const Eigen::MatrixXd xv = ScaleRows(initial.input_scaler(), validation_inputs);
  const Eigen::VectorXd yv = ScaleLabels(initial.output_scaler(), validation_labels);
  const BatchEvaluator train_eval(initial, xs, config.jobs);
  const BatchEvaluator val_eval(initial, xv, config.jobs);
  const double n_train = static_cast<double>(xs.rows());

  Mlp model = std::move(initial);
  const int p = model.num_parameters();
  Eigen::MatrixXd jac(xs.rows(), p);
  Eigen::VectorXd params = model.GetParameters();

  auto validation_mse = [&](const Mlp& m) {
    if (xv.rows() == 0) return 0.0;
    return (yv - val_eval.Predict(m.layers(), nullptr)).squaredNorm() /
           static_cast<double>(xv.rows());
  };

  Eigen::VectorXd residual = ys - train_eval.Predict(model.layers(), &jac);
  double loss = residual.squaredNorm();
  if (!std::isfinite(loss)) throw TrainingError("non-finite initial loss", 0);

  TrainResult result{model, {}, {}, 0};
  double best_val = validation_mse(model);
  double mu = config.initial_damping;
  double gd_step = 1e-3;
  Mlp trial = model;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const Eigen::VectorXd g = jac.transpose() * residual;
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(p, p);
    jtj.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
    jtj = jtj.selfadjointView<Eigen::Lower>();

    bool accepted = false;
    double trial_loss = loss;
    while (mu <= 1e10) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal().array() += mu;
      Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd step = llt.solve(g);
        if (step.allFinite()) {
          trial.SetParameters(params + step);
          trial_loss = (ys - train_eval.Predict(trial.layers(), nullptr)).squaredNorm();
          if (trial_loss < loss) {
            accepted = true;
            mu = std::max(mu * 0.1, 1e-15);
            break;
          }
        }
      }
      mu *= 10.0;
    }
    if (!accepted) {
      // Damped normal equations gave nothing: plain gradient descent on the
      // sum of squares with a backtracking step.
      mu = config.initial_damping;
      const Eigen::VectorXd grad = -2.0 * g;
      for (int tries = 0; tries < 30 && !accepted; ++tries) {
        trial.SetParameters(params - gd_step * grad);
        trial_loss = (ys - train_eval.Predict(trial.layers(), nullptr)).squaredNorm();
        if (trial_loss < loss) {
          accepted = true;
          gd_step *= 1.5;
        } else {
          gd_step *= 0.5;
        }
      }
    }
    if (accepted) {
      if (!std::isfinite(trial_loss)) {
        throw TrainingError("training loss became non-finite", epoch);
      }
      params = trial.GetParameters();
      model.SetParameters(params);
      residual = ys - train_eval.Predict(model.layers(), &jac);
      loss = residual.squaredNorm();
    }
    if (!std::isfinite(loss)) throw TrainingError("training loss became non-finite", epoch);

    const double val = validation_mse(model);
    if (!std::isfinite(val)) throw TrainingError("validation loss became non-finite", epoch);
    result.train_mse.push_back(loss / n_train);
    result.validation_mse.push_back(val);
    if (val < best_val) {
      best_val = val;
      result.model = model;
      result.best_epoch = epoch;
    }
    if (!accepted) break;
    const auto& hist = result.train_mse;
    if (epoch > config.patience &&
        hist[epoch - 1 - config.patience] - hist[epoch - 1] < config.loss_tolerance) {
      break;
    }
  }

  TrainingInfo info;
  info.seed = config.seed;
  info.epochs = static_cast<int>(result.train_mse.size());
  info.best_epoch = result.best_epoch;
  info.train_mse =
      (ys - train_eval.Predict(result.model.layers(), nullptr)).squaredNorm() / n_train;
  info.validation_mse = validation_mse(result.model);
  result.model.set_training_info(info);
  return result;
}

TrainResult Train(const TrainingSet& data, const TrainConfig& config) {
  config.Validate();
  if (data.size() == 0) throw InvalidArgument("Train: empty dataset");
  const auto [train, validation] =
      SplitIndices(data.size(), config.validation_fraction,
                   DeriveSeed(config.seed, "split"));
  const TrainingSet tr = data.Subset(train);
  const TrainingSet va = data.Subset(validation);
  const AffineScaler in = AffineScaler::FromBounds(data.bounds.lower.ToVector(),
                                                   data.bounds.upper.ToVector());
  const AffineScaler out = AffineScaler::FromBounds(
      Eigen::VectorXd::Constant(1, data.u_min), Eigen::VectorXd::Constant(1, data.u_max));
  Mlp init = Mlp::RandomInit(Mlp::DefaultTopology(), in, out,
                             DeriveSeed(config.seed, "init"));
  return TrainOnSplit(tr.InputMatrix(), tr.LabelVector(), va.InputMatrix(),
                      va.LabelVector(), config, std::move(init));
}

double ScaledRmse(const Mlp& model, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& labels) {
  CheckSingleOutput(model);
  if (inputs.rows() == 0) throw InvalidArgument("ScaledRmse: empty batch");
  const Eigen::MatrixXd s = ScaleRows(model.input_scaler(), inputs);
  const Eigen::VectorXd y = ScaleLabels(model.output_scaler(), labels);
  const BatchEvaluator eval(model, s, 1);
  return std::sqrt((y - eval.Predict(model.layers(), nullptr)).squaredNorm() /
                   static_cast<double>(s.rows()));
}

std::string MlpToJson(const Mlp& model) {
  json weights = json::array();
  json biases = json::array();
  for (const auto& l : model.layers()) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    weights.push_back(w);
    biases.push_back(VectorToJson(l.bias));
  }
  const TrainingInfo& info = model.training_info();
  json j = {
      {"topology", model.layer_sizes()},
      {"activation", "2/(1+exp(z))-1"},
      {"weights", weights},
      {"biases", biases},
      {"input_scaler",
       {{"center", VectorToJson(model.input_scaler().center)},
        {"half_range", VectorToJson(model.input_scaler().half_range)}}},
      {"output_scaler",
       {{"center", VectorToJson(model.output_scaler().center)},
        {"half_range", VectorToJson(model.output_scaler().half_range)}}},
      {"training",
       {{"seed", info.seed},
        {"epochs", info.epochs},
        {"best_epoch", info.best_epoch},
        {"final_train_mse", info.train_mse},
        {"final_validation_mse", info.validation_mse}}},
  };
  return j.dump(2);
}

Mlp MlpFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    AffineScaler in{VectorFromJson(j.at("input_scaler").at("center")),
                    VectorFromJson(j.at("input_scaler").at("half_range"))};
    AffineScaler out{VectorFromJson(j.at("output_scaler").at("center")),
                     VectorFromJson(j.at("output_scaler").at("half_range"))};
    Mlp m(j.at("topology").get<std::vector<int>>(), std::move(in), std::move(out));
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    auto& layers = m.mutable_layers();
    if (weights.size() != layers.size() || biases.size() != layers.size()) {
      throw InvalidArgument("model file: layer count does not match topology");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = weights.at(l).get<std::vector<double>>();
      const auto b = biases.at(l).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != layers[l].weights.size() ||
          static_cast<Eigen::Index>(b.size()) != layers[l].bias.size()) {
        throw InvalidArgument("model file: layer " + std::to_string(l) + " has wrong size");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < layers[l].weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layers[l].weights.cols(); ++c) {
          layers[l].weights(r, c) = w[k++];
        }
      }
      for (Eigen::Index r = 0; r < layers[l].bias.size(); ++r) layers[l].bias(r) = b[r];
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      TrainingInfo info;
      info.seed = t.value("seed", std::uint64_t{0});
      info.epochs = t.value("epochs", 0);
      info.best_epoch = t.value("best_epoch", 0);
      info.train_mse = t.value("final_train_mse", 0.0);
      info.validation_mse = t.value("final_validation_mse", 0.0);
      m.set_training_info(info);
    }
    m.Validate();
    return m;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("model file: ") + e.what());
  }
}

void SaveMlp(const Mlp& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open " + path.string() + " for writing");
  out << MlpToJson(model) << '\n';
}

Mlp LoadMlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return MlpFromJson(ss.str());
}

}  // namespace nnmpc
