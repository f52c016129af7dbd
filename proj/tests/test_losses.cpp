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
#include "flea/loss/losses.hpp"
#include "flea/loss/total.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace flea {
namespace {

using testing::random_distributions;
using testing::random_matrix;
using testing::random_model;

double ce_oracle(const MatrixXr& z, const MatrixXr& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double norm = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) norm += std::exp(z(i, c));
    for (Eigen::Index c = 0; c < z.cols(); ++c) total -= y(i, c) * std::log(std::exp(z(i, c)) / norm);
  }
  return total / static_cast<double>(z.rows());
}

double kl_oracle(const MatrixXr& zl, const MatrixXr& zg) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < zl.rows(); ++i) {
    double nl = 0.0, ng = 0.0;
    for (Eigen::Index c = 0; c < zl.cols(); ++c) {
      nl += std::exp(zl(i, c));
      ng += std::exp(zg(i, c));
    }
    for (Eigen::Index c = 0; c < zl.cols(); ++c) {
      const double pl = std::exp(zl(i, c)) / nl, pg = std::exp(zg(i, c)) / ng;
      total -= pl * std::log(pg / pl);
    }
  }
  return total / static_cast<double>(zl.rows());
}

MatrixXr fd_logits(const MatrixXr& z, const std::function<double(const MatrixXr&)>& f) {
  MatrixXr g(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      MatrixXr up = z, down = z;
      up(i, c) += 1e-6;
      down(i, c) -= 1e-6;
      g(i, c) = (f(up) - f(down)) / 2e-6;
    }
  return g;
}

TEST(LossClf, MatchesDirectFormula) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXr z = random_matrix(7, 4, rng, 2.0);
    const MatrixXr y = random_distributions(7, 4, rng);
    EXPECT_NEAR(loss_clf<Real>(z, y), ce_oracle(z, y), 1e-12);
  }
}

TEST(LossClf, OneHotOfUniformLogitsIsLogC) {
  const MatrixXr z = MatrixXr::Zero(3, 5);
  MatrixXr y = MatrixXr::Zero(3, 5);
  y(0, 1) = y(1, 4) = y(2, 0) = 1.0;
  EXPECT_NEAR(loss_clf<Real>(z, y), std::log(5.0), 1e-15);
}

TEST(LossClf, StableForLargeLogits) {
  MatrixXr z(1, 3);
  z << 1000.0, 0.0, -1000.0;
  MatrixXr y(1, 3);
  y << 1.0, 0.0, 0.0;
  const double l = loss_clf<Real>(z, y);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 0.0, 1e-12);
}

TEST(LossClf, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  const MatrixXr z = random_matrix(5, 3, rng);
  const MatrixXr y = random_distributions(5, 3, rng);
  MatrixXr g;
  loss_clf<Real>(z, y, &g);
  const MatrixXr fd = fd_logits(z, [&](const MatrixXr& zz) { return loss_clf<Real>(zz, y); });
  EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LossClf, RejectsShapeMismatch) {
  EXPECT_THROW(loss_clf<Real>(MatrixXr::Zero(2, 3), MatrixXr::Zero(2, 4)), ShapeError);
}

TEST(LossDis, MatchesDirectFormulaAndIsNonNegative) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXr a = random_matrix(6, 5, rng, 1.5);
    const MatrixXr b = random_matrix(6, 5, rng, 1.5);
    const double l = loss_dis<Real>(a, b);
    EXPECT_NEAR(l, kl_oracle(a, b), 1e-12);
    EXPECT_GE(l, 0.0);
  }
}

TEST(LossDis, ZeroForIdenticalAndShiftedLogits) {
  Rng rng(4);
  const MatrixXr a = random_matrix(4, 3, rng);
  EXPECT_NEAR(loss_dis<Real>(a, a), 0.0, 1e-15);
  const MatrixXr shifted = (a.array() + 7.0).matrix();
  EXPECT_NEAR(loss_dis<Real>(a, shifted), 0.0, 1e-12);
}

TEST(LossDis, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  const MatrixXr a = random_matrix(4, 3, rng);
  const MatrixXr b = random_matrix(4, 3, rng);
  MatrixXr ga, gb;
  loss_dis<Real>(a, b, &ga, &gb);
  const MatrixXr fa = fd_logits(a, [&](const MatrixXr& z) { return loss_dis<Real>(z, b); });
  const MatrixXr fb = fd_logits(b, [&](const MatrixXr& z) { return loss_dis<Real>(a, z); });
  EXPECT_LT((ga - fa).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((gb - fb).cwiseAbs().maxCoeff(), 1e-8);
}

struct TotalCase {
  ModelParams<Real> model;
  ModelParams<Real> snapshot;
  Batch<Real> batch;
  FeatureBatch<Real> buffer;
  VectorXr betas;
};

TotalCase make_case(std::uint64_t seed) {
  TotalCase c;
  c.model = random_model({4, 6, 5, 3}, 1, seed);
  c.snapshot = random_model({4, 6, 5, 3}, 1, seed + 1000);
  Rng rng(seed);
  c.batch.inputs = random_matrix(6, 4, rng);
  c.batch.labels = random_distributions(6, 3, rng);
  c.buffer.features = random_matrix(6, 6, rng, 0.5);
  c.buffer.labels = random_distributions(6, 3, rng);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  c.betas.resize(6);
  for (auto& b : c.betas) b = u(rng);
  return c;
}

TEST(TotalLoss, GradientMatchesFiniteDifferencesWithAndWithoutBuffer) {
  for (bool with_buffer : {false, true})
    for (auto w : {LossWeights{1.0, 3.0}, LossWeights{0.0, 0.0}, LossWeights{2.5, 0.0}, LossWeights{0.0, 1.5}}) {
      const TotalCase c = make_case(with_buffer ? 31 : 32);
      const FeatureBatch<Real>* buf = with_buffer ? &c.buffer : nullptr;
      const auto out = grad_total_loss<Real>(c.model, c.snapshot, c.batch, buf, c.betas, w);
      auto f = [&](const ModelParams<Real>& m) {
        return grad_total_loss<Real>(m, c.snapshot, c.batch, buf, c.betas, w).loss.total;
      };
      const VectorXr fd = testing::numeric_gradient(c.model, f);
      EXPECT_LT(testing::max_relative_error(out.grads.to_flat(), fd, 1e-5), 1e-4)
          << "buffer=" << with_buffer << " l1=" << w.lambda_dis << " l2=" << w.lambda_dec;
    }
}

TEST(TotalLoss, IsExactLinearCombinationOfTerms) {
  const TotalCase c = make_case(40);
  const auto terms = grad_total_loss<Real>(c.model, c.snapshot, c.batch, &c.buffer, c.betas, {0.0, 0.0});
  const auto mixed = grad_total_loss<Real>(c.model, c.snapshot, c.batch, &c.buffer, c.betas, {2.0, 4.0});
  EXPECT_EQ(mixed.loss.clf, terms.loss.clf);
  EXPECT_EQ(mixed.loss.dis, terms.loss.dis);
  EXPECT_EQ(mixed.loss.dec, terms.loss.dec);
  EXPECT_EQ(mixed.loss.total, terms.loss.clf + 2.0 * terms.loss.dis + 4.0 * terms.loss.dec);
}

TEST(TotalLoss, SingleRowBatchSkipsDecorrelation) {
  TotalCase c = make_case(45);
  c.batch.inputs = c.batch.inputs.topRows(1).eval();
  c.batch.labels = c.batch.labels.topRows(1).eval();
  c.buffer.features = c.buffer.features.topRows(1).eval();
  c.buffer.labels = c.buffer.labels.topRows(1).eval();
  c.betas = c.betas.head(1).eval();
  const auto with = grad_total_loss<Real>(c.model, c.snapshot, c.batch, &c.buffer, c.betas, {1.0, 3.0});
  const auto without = grad_total_loss<Real>(c.model, c.snapshot, c.batch, &c.buffer, c.betas, {1.0, 0.0});
  EXPECT_EQ(with.loss.dec, 0.0);
  EXPECT_EQ(with.loss.total, without.loss.total);
  EXPECT_TRUE(with.grads == without.grads);
}

TEST(TotalLoss, DistillationVanishesAgainstOwnSnapshot) {
  TotalCase c = make_case(41);
  const auto out = grad_total_loss<Real>(c.model, c.model, c.batch, &c.buffer, c.betas, {1.0, 0.0});
  EXPECT_NEAR(out.loss.dis, 0.0, 1e-15);
  const auto plain = grad_total_loss<Real>(c.model, c.model, c.batch, &c.buffer, c.betas, {0.0, 0.0});
  EXPECT_LT((out.grads.to_flat() - plain.grads.to_flat()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TotalLoss, BetaOneIgnoresBuffer) {
  const TotalCase c = make_case(42);
  const VectorXr ones = VectorXr::Ones(6);
  const auto a = grad_total_loss<Real>(c.model, c.snapshot, c.batch, &c.buffer, ones, {1.0, 3.0});
  const auto b = grad_total_loss<Real>(c.model, c.snapshot, c.batch, nullptr, ones, {1.0, 3.0});
  EXPECT_NEAR(a.loss.total, b.loss.total, 1e-14);
  EXPECT_LT((a.grads.to_flat() - b.grads.to_flat()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TotalLoss, NonFiniteTermIsNamed) {
  TotalCase c = make_case(43);
  c.batch.inputs(0, 0) = std::numeric_limits<double>::infinity();
  try {
    grad_total_loss<Real>(c.model, c.snapshot, c.batch, nullptr, c.betas, {1.0, 3.0});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("L_"), std::string::npos);
  }
}

TEST(TotalLoss, RejectsMismatchedBufferAndSnapshot) {
  TotalCase c = make_case(44);
  FeatureBatch<Real> small{c.buffer.features.topRows(3), c.buffer.labels.topRows(3)};
  EXPECT_THROW(grad_total_loss<Real>(c.model, c.snapshot, c.batch, &small, c.betas, {1.0, 3.0}), ShapeError);
  const auto other = random_model({4, 7, 5, 3}, 1, 1);
  EXPECT_THROW(grad_total_loss<Real>(c.model, other, c.batch, nullptr, c.betas, {1.0, 3.0}), ShapeError);
  EXPECT_THROW(grad_total_loss<Real>(c.model, c.snapshot, c.batch, nullptr, c.betas, {-1.0, 3.0}), ConfigError);
}

}  // namespace
}  // namespace flea
