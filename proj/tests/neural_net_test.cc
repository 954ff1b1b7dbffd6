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
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "nnmpc/errors.h"
#include "support/oracles.h"

namespace nnmpc {
namespace {

AffineScaler StateScaler() {
  return AffineScaler::FromBounds(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(10, 14, 1.1));
}

AffineScaler FeedScaler() {
  return AffineScaler::FromBounds(Eigen::VectorXd::Constant(1, 0.0),
                                  Eigen::VectorXd::Constant(1, 10.0));
}

AffineScaler UnitScaler(int dim) {
  return AffineScaler::FromBounds(Eigen::VectorXd::Constant(dim, -1.0),
                                  Eigen::VectorXd::Constant(dim, 1.0));
}

Eigen::MatrixXd RandomStates(int rows, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(rows, 3);
  for (int i = 0; i < rows; ++i) x.row(i) << 10 * u(gen), 14 * u(gen), 1.1 * u(gen);
  return x;
}

Eigen::VectorXd Predict(const Mlp& m, const Eigen::MatrixXd& x) {
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = m.Forward(x.row(i).transpose())(0);
  return y;
}

TEST(ActivationTest, ZeroMapsToZero) {
  for (double a : {0.1, 1.0, 7.0, -3.0}) EXPECT_EQ(Activation(a, 0.0), 0.0);
}

TEST(ActivationTest, KnownValueAndLimits) {
  EXPECT_NEAR(Activation(1.0, 1.0), 2.0 / (1.0 + std::exp(1.0)) - 1.0, 1e-16);
  EXPECT_NEAR(Activation(1.0, 1.0), -0.46212, 5e-6);
  EXPECT_EQ(Activation(1.0, 1e6), -1.0);
  EXPECT_EQ(Activation(1.0, -1e6), 1.0);
  EXPECT_TRUE(std::isfinite(Activation(1.0, 800.0)));
}

TEST(ActivationTest, NegativeHalfTanhIdentity) {
  for (int i = 0; i <= 6000; ++i) {
    const double z = -30.0 + 0.01 * i;
    EXPECT_NEAR(Activation(1.0, z), -std::tanh(z / 2.0), 1e-12) << z;
  }
}

TEST(ScalerTest, RoundTrip) {
  const AffineScaler s = StateScaler();
  const Eigen::Vector3d x(3.3, 12.1, 0.4);
  EXPECT_LT((s.Descale(s.Scale(x)) - x).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LT((s.Scale(Eigen::Vector3d(10, 14, 1.1)) - Eigen::Vector3d::Ones()).norm(), 1e-15);
}

TEST(ScalerTest, RejectsDegenerateRange) {
  EXPECT_THROW(AffineScaler::FromBounds(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)).Validate(2),
               InvalidArgument);
}

TEST(MlpTest, ZeroNetworkReturnsOutputCenter) {
  const Mlp m(Mlp::DefaultTopology(), StateScaler(), FeedScaler());
  EXPECT_EQ(m.Forward(StateVec{1, 2, 0.3}), 5.0);
  EXPECT_EQ(m.num_parameters(), 16 + 20 * 3 + 5);
}

TEST(MlpTest, SinglePathComposesActivation) {
  Mlp m(Mlp::DefaultTopology(), UnitScaler(3), UnitScaler(1));
  auto& layers = m.mutable_layers();
  layers[0].weights(0, 1) = 1.0;  // picks the second input
  for (int l = 1; l < 5; ++l) layers[l].weights(0, 0) = 1.0;
  for (double x : {-0.7, 0.0, 0.3, 0.95}) {
    double want = x;
    for (int l = 0; l < 4; ++l) want = 2.0 / (1.0 + std::exp(want)) - 1.0;
    const double got = m.Forward(Eigen::Vector3d(0.2, x, -0.5))(0);
    EXPECT_NEAR(got, want, 1e-15) << x;
  }
}

TEST(MlpTest, ParameterVectorRoundTrip) {
  const Mlp m = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 9);
  Mlp copy(Mlp::DefaultTopology(), StateScaler(), FeedScaler());
  copy.SetParameters(m.GetParameters());
  EXPECT_EQ(copy.GetParameters(), m.GetParameters());
  EXPECT_EQ(copy.layers()[0].weights(0, 1), m.GetParameters()(1));
  EXPECT_THROW(copy.SetParameters(Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST(MlpTest, InitializationRespectsFanIn) {
  const Mlp m = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 3);
  for (const DenseLayer& l : m.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weights.cols()));
    EXPECT_LE(l.weights.cwiseAbs().maxCoeff(), bound);
    EXPECT_LE(l.bias.cwiseAbs().maxCoeff(), bound);
  }
}

TEST(MlpTest, NonFiniteReportsLayer) {
  Mlp m(Mlp::DefaultTopology(), UnitScaler(3), UnitScaler(1));
  m.mutable_layers()[4].weights(0, 0) = INFINITY;
  m.mutable_layers()[3].bias(0) = 1.0;  // makes the layer-4 input nonzero
  try {
    m.ForwardScaled(Eigen::Vector3d::Zero());
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 4"), std::string::npos) << e.what();
  }
}

TEST(LossGradientTest, PerfectFitHasZeroGradient) {
  const Mlp m = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 4);
  const Eigen::MatrixXd x = RandomStates(10, 1);
  const LossGradient lg = LossAndGradient(m, x, Predict(m, x));
  EXPECT_LT(lg.loss, 1e-28);
  EXPECT_LT(lg.gradient.lpNorm<Eigen::Infinity>(), 1e-13);
}

TEST(LossGradientTest, SingleLinearLayerByHand) {
  Mlp m = Mlp::RandomInit({3, 1}, UnitScaler(3), UnitScaler(1), 2);
  const Eigen::Vector3d x(0.3, -0.4, 0.8);
  const double label = 0.25;
  const double y_hat = m.ForwardScaled(x)(0);
  const LossGradient lg = LossAndGradient(m, x.transpose(), Eigen::VectorXd::Constant(1, label));
  EXPECT_NEAR(lg.loss, (label - y_hat) * (label - y_hat), 1e-15);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(lg.gradient(i), -2.0 * (label - y_hat) * x(i), 1e-15);
  EXPECT_NEAR(lg.gradient(3), -2.0 * (label - y_hat), 1e-15);
}

TEST(LossGradientTest, MatchesCentralDifferencesOnFiveSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Mlp m = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), seed);
    const Eigen::MatrixXd x = RandomStates(10, 100 + seed);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    Eigen::VectorXd labels(10);
    for (int i = 0; i < 10; ++i) labels(i) = u(gen);
    const LossGradient lg = LossAndGradient(m, x, labels);
    EXPECT_NEAR(lg.loss, oracle::ScaledLoss(m, x, labels), 1e-12 * lg.loss);
    const Eigen::VectorXd fd = oracle::FiniteDifferenceLossGradient(m, x, labels);
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const double rel = std::abs(lg.gradient(i) - fd(i)) /
                         std::max(std::abs(lg.gradient(i)), std::abs(fd(i)));
      EXPECT_LT(rel, 1e-6) << "seed " << seed << " parameter " << i << " analytic "
                           << lg.gradient(i) << " fd " << fd(i);
    }
  }
}

TEST(LossGradientTest, EmptyBatchThrows) {
  const Mlp m = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 4);
  EXPECT_THROW(LossAndGradient(m, Eigen::MatrixXd(0, 3), Eigen::VectorXd(0)), InvalidArgument);
}

TEST(TrainTest, StudentRecoversTeacher) {
  const Mlp teacher = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 77);
  const Eigen::MatrixXd x_train = RandomStates(1500, 1);
  const Eigen::MatrixXd x_val = RandomStates(300, 2);
  const Eigen::MatrixXd x_test = RandomStates(500, 3);
  TrainConfig cfg;
  cfg.max_epochs = 1000;
  const Mlp student = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 5);
  const TrainResult r = TrainOnSplit(x_train, Predict(teacher, x_train), x_val,
                                     Predict(teacher, x_val), cfg, student);
  EXPECT_LT(ScaledRmse(r.model, x_test, Predict(teacher, x_test)), 1e-3);
}

TEST(TrainTest, ConstantLabelsAreFitExactly) {
  const Eigen::MatrixXd x = RandomStates(200, 4);
  const Eigen::VectorXd labels = Eigen::VectorXd::Constant(200, 3.7);
  TrainConfig cfg;
  cfg.max_epochs = 3000;
  cfg.loss_tolerance = 1e-30;
  const Mlp init = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 6);
  const TrainResult r =
      TrainOnSplit(x.topRows(180), labels.head(180), x.bottomRows(20), labels.tail(20), cfg, init);
  EXPECT_LT((Predict(r.model, x).array() - 3.7).abs().maxCoeff(), 1e-6);
}

TEST(TrainTest, HistoryIsRecordedAndBestEpochKept) {
  const Mlp teacher = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 8);
  const Eigen::MatrixXd x = RandomStates(200, 9);
  const Eigen::VectorXd y = Predict(teacher, x);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  const Mlp init = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 10);
  const TrainResult r =
      TrainOnSplit(x.topRows(160), y.head(160), x.bottomRows(40), y.tail(40), cfg, init);
  ASSERT_FALSE(r.validation_mse.empty());
  EXPECT_EQ(r.train_mse.size(), r.validation_mse.size());
  const double best = *std::min_element(r.validation_mse.begin(), r.validation_mse.end());
  EXPECT_NEAR(r.model.training_info().validation_mse, best, 1e-15);
  const double rmse = ScaledRmse(r.model, x.bottomRows(40), y.tail(40));
  EXPECT_NEAR(rmse * rmse, best, 1e-12);
}

TEST(TrainTest, RejectsBadConfig) {
  TrainConfig c;
  c.validation_fraction = 0.6;
  EXPECT_THROW(c.Validate(), InvalidArgument);
  c = {};
  c.max_epochs = 0;
  EXPECT_THROW(c.Validate(), InvalidArgument);
}

TEST(SerializationTest, RoundTripIsBitwise) {
  Mlp m = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 12);
  m.set_training_info({42, 17, 11, 1.0 / 3.0, 2.0 / 7.0});
  const Mlp back = MlpFromJson(MlpToJson(m));
  EXPECT_EQ(back.GetParameters(), m.GetParameters());
  EXPECT_EQ(back.training_info().seed, 42u);
  EXPECT_EQ(back.training_info().validation_mse, 2.0 / 7.0);
  const Eigen::MatrixXd x = RandomStates(100, 13);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    EXPECT_EQ(back.Forward(xi)(0), m.Forward(xi)(0));
  }
  EXPECT_EQ(MlpToJson(back), MlpToJson(m));
}

TEST(SerializationTest, FileRoundTrip) {
  const Mlp m = Mlp::RandomInit(Mlp::DefaultTopology(), StateScaler(), FeedScaler(), 14);
  const auto path = std::filesystem::temp_directory_path() / "nnmpc_model_roundtrip.json";
  SaveMlp(m, path);
  EXPECT_EQ(LoadMlp(path).GetParameters(), m.GetParameters());
  std::filesystem::remove(path);
}

TEST(SerializationTest, MalformedModelThrows) {
  EXPECT_THROW(MlpFromJson("{\"topology\": [3, 1]}"), InvalidArgument);
  EXPECT_THROW(MlpFromJson("not json"), InvalidArgument);
  EXPECT_THROW(LoadMlp("/nonexistent/model.json"), InvalidArgument);
}

}  // namespace
}  // namespace nnmpc
