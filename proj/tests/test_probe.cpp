/*
 * Copyright 2026 The flea-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "flea/cli/probe_run.hpp"
#include "flea/probe/probe.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace flea {
namespace {

using testing::random_matrix;

ModelParams<Real> linear_decoder(int dims, double bias) {
  std::vector<DenseLayer<Real>> layers(2);
  for (auto& l : layers) {
    l.weight = MatrixXr::Identity(dims, dims);
    l.bias = VectorXr::Zero(dims);
    l.activation = Activation::kLinear;
  }
  layers[1].bias.setConstant(bias);
  return ModelParams<Real>(layers, 1);
}

std::vector<bool> alternating(int n) {
  std::vector<bool> flags(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) flags[static_cast<std::size_t>(i)] = i % 2 == 0;
  return flags;
}

TEST(ReconstructionMse, ExactAndShiftedOutputs) {
  Rng rng(1);
  const MatrixXr x = random_matrix(10, 3, rng);
  EXPECT_EQ(reconstruction_mse(linear_decoder(3, 0.0), x, x), 0.0);
  EXPECT_NEAR(reconstruction_mse(linear_decoder(3, 1.0), x, x), 1.0, 1e-14);
}

TEST(ReconstructionMse, TwoPairOracle) {
  MatrixXr f(2, 2), x(2, 2);
  f << 1, 2, 3, 4;
  x << 0, 0, 1, 1;
  // Outputs equal f: errors (1,2) and (2,3), squared sum 1+4+4+9 = 18 over 4 entries.
  EXPECT_DOUBLE_EQ(reconstruction_mse(linear_decoder(2, 0.0), f, x), 18.0 / 4.0);
  EXPECT_THROW(reconstruction_mse(linear_decoder(2, 0.0), f, x.topRows(1)), ShapeError);
}

TEST(Reconstructor, LearnsAnInvertibleMap) {
  Rng rng(2);
  const MatrixXr x = random_matrix(600, 4, rng);
  const MatrixXr f = (0.5 * x).eval();
  DecoderConfig cfg;
  cfg.epochs = 60;
  const auto r = train_reconstructor(f.topRows(500), x.topRows(500), cfg, 3);
  EXPECT_LT(reconstruction_mse(r.decoder, f.bottomRows(100), x.bottomRows(100)), 0.05);
  EXPECT_EQ(r.epoch_mse.size(), 60u);
  EXPECT_LT(r.epoch_mse.back(), r.epoch_mse.front());
}

TEST(Reconstructor, IndependentFeaturesHitTheNoiseFloor) {
  Rng rng(4);
  const MatrixXr x = random_matrix(600, 4, rng);
  const MatrixXr f = random_matrix(600, 6, rng);
  const auto r = train_reconstructor(f.topRows(500), x.topRows(500), {}, 5);
  // Best possible held-out prediction is the mean; input variance is 1.
  EXPECT_GT(reconstruction_mse(r.decoder, f.bottomRows(100), x.bottomRows(100)), 0.8);
}

TEST(Reconstructor, SeededAndValidated) {
  Rng rng(6);
  const MatrixXr x = random_matrix(50, 3, rng);
  DecoderConfig cfg;
  cfg.epochs = 3;
  const auto a = train_reconstructor(x, x, cfg, 7);
  const auto b = train_reconstructor(x, x, cfg, 7);
  EXPECT_TRUE(a.decoder == b.decoder);
  EXPECT_EQ(a.final_mse, b.final_mse);
  EXPECT_THROW(train_reconstructor(x.topRows(5), x.topRows(5), cfg, 7), ShapeError);
  EXPECT_THROW(train_reconstructor(x, x.topRows(20), cfg, 7), ShapeError);
}

TEST(ContextAttack, ObviousMarkerIsFound) {
  Rng rng(8);
  const int n = 1000;
  MatrixXr feats = random_matrix(n, 5, rng);
  const auto flags = alternating(n);
  for (int i = 0; i < n; ++i) feats(i, 4) += flags[static_cast<std::size_t>(i)] ? 6.0 : 0.0;
  const auto rep = context_attack(feats, flags, {20, 80, 320}, 9);
  ASSERT_EQ(rep.curve.size(), 3u);
  EXPECT_EQ(rep.kind, "context");
  EXPECT_GE(rep.curve.back(), 0.98);
  EXPECT_EQ(samples_to_reach(rep, 0.9), 20);
}

TEST(ContextAttack, UnrelatedFlagsStayAtChance) {
  Rng rng(10);
  const int n = 4000;
  const MatrixXr feats = random_matrix(n, 5, rng);
  auto flags = alternating(n);
  std::shuffle(flags.begin(), flags.end(), rng);
  const auto rep = context_attack(feats, flags, {100, 400}, 11);
  for (double acc : rep.curve) EXPECT_NEAR(acc, 0.5, 0.05);
  EXPECT_EQ(samples_to_reach(rep, 0.9), -1);
}

TEST(ContextAttack, ValidatesInputs) {
  Rng rng(12);
  const MatrixXr feats = random_matrix(100, 3, rng);
  EXPECT_THROW(context_attack(feats, alternating(99), {10}, 1), ShapeError);
  EXPECT_THROW(context_attack(feats, std::vector<bool>(100, true), {10}, 1), ShapeError);
  EXPECT_THROW(context_attack(feats, alternating(100), {1000}, 1), ShapeError);
}

TEST(AttackReport, JsonRoundTrip) {
  AttackReport r;
  r.kind = "reconstruction";
  r.train_sizes = {100};
  r.curve = {0.123456789012345};
  r.lambda2 = 3;
  r.mean_dcor = 0.4;
  r.seed = 9;
  const auto back = AttackReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_EQ(back.kind, r.kind);
  EXPECT_EQ(back.train_sizes, r.train_sizes);
  EXPECT_EQ(back.curve, r.curve);
  EXPECT_EQ(back.seed, r.seed);
}

TEST(GroupAverages, SameFlagGroups) {
  MatrixXr rows(25, 1);
  std::vector<bool> flags(25);
  for (int i = 0; i < 25; ++i) {
    flags[static_cast<std::size_t>(i)] = i < 12;
    rows(i, 0) = i < 12 ? 1.0 : -1.0;
  }
  std::vector<bool> gflags;
  const MatrixXr avg = group_averages(rows, flags, 5, 3, &gflags);
  // 12 flagged rows give 2 groups, 13 unflagged give 2; leftovers are dropped.
  ASSERT_EQ(avg.rows(), 4);
  ASSERT_EQ(gflags.size(), 4u);
  for (Eigen::Index g = 0; g < 4; ++g) EXPECT_EQ(avg(g, 0), gflags[static_cast<std::size_t>(g)] ? 1.0 : -1.0);
  EXPECT_EQ(std::count(gflags.begin(), gflags.end(), true), 2);
}

TEST(ReconstructionProbe, ReportsHeldOutMse) {
  std::vector<DenseLayer<Real>> layers(2);
  layers[0].weight = MatrixXr::Identity(3, 3);
  layers[0].bias = VectorXr::Zero(3);
  layers[0].activation = Activation::kLinear;
  layers[1].weight = MatrixXr::Ones(2, 3);
  layers[1].bias = VectorXr::Zero(2);
  layers[1].activation = Activation::kLinear;
  const ModelParams<Real> model(layers, 1);
  Rng rng(13);
  const MatrixXr attacker = random_matrix(400, 3, rng);
  const MatrixXr heldout = random_matrix(100, 3, rng);
  const auto rep = reconstruction_probe(model, attacker, heldout, 3.0, 1);
  EXPECT_EQ(rep.kind, "reconstruction");
  ASSERT_EQ(rep.curve.size(), 1u);
  EXPECT_EQ(rep.train_sizes, std::vector<int>{400});
  EXPECT_LT(rep.curve[0], 0.05);
  EXPECT_EQ(rep.lambda2, 3.0);
}

}  // namespace
}  // namespace flea
