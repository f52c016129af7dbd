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
#include "flea/loss/dcor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/QR>

namespace flea {
namespace {

using testing::dcor_oracle;
using testing::random_matrix;

TEST(DoubleCenter, RowsAndColumnsSumToZero) {
  Rng rng(1);
  const MatrixXr x = random_matrix(9, 3, rng);
  const MatrixXr e = double_center(squared_distance_matrix(x));
  EXPECT_LT(e.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(e.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(double_center(MatrixXr::Zero(2, 3)), ShapeError);
}

TEST(SquaredDistance, MatchesPairwiseDefinition) {
  Rng rng(2);
  const MatrixXr x = random_matrix(5, 4, rng);
  const MatrixXr e = squared_distance_matrix(x);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(e(i, k), (x.row(i) - x.row(k)).squaredNorm());
}

TEST(Dcor, MatchesLoopOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> nd(2, 24), dd(1, 8);
    const int n = nd(rng);
    const MatrixXr x = random_matrix(n, dd(rng), rng);
    const MatrixXr f = random_matrix(n, dd(rng), rng);
    const double c = distance_correlation<Real>(x, f);
    EXPECT_NEAR(c, dcor_oracle(x, f), 1e-10);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(Dcor, OneForIdentityAndSimilarityMaps) {
  Rng rng(4);
  const MatrixXr x = random_matrix(16, 5, rng);
  EXPECT_NEAR(distance_correlation<Real>(x, x), 1.0, 1e-12);
  const MatrixXr q = Eigen::HouseholderQR<MatrixXr>(random_matrix(5, 5, rng)).householderQ();
  const MatrixXr f = (3.0 * x * q).rowwise() + Eigen::RowVectorXd::Constant(5, 2.0);
  EXPECT_NEAR(distance_correlation<Real>(x, f), 1.0, 1e-12);
}

TEST(Dcor, ZeroForConstantBatch) {
  Rng rng(5);
  const MatrixXr x = random_matrix(8, 3, rng);
  const MatrixXr f = MatrixXr::Constant(8, 4, 1.5);
  EXPECT_EQ(distance_correlation<Real>(x, f), 0.0);
}

TEST(Dcor, SymmetricAndScaleInvariant) {
  Rng rng(6);
  const MatrixXr x = random_matrix(12, 3, rng);
  const MatrixXr f = random_matrix(12, 6, rng);
  EXPECT_NEAR(distance_correlation<Real>(x, f), distance_correlation<Real>(f, x), 1e-14);
  EXPECT_NEAR(distance_correlation<Real>(x, f), distance_correlation<Real>(x, MatrixXr(7.0 * f)), 1e-12);
}

TEST(Dcor, RejectsBadShapes) {
  EXPECT_THROW(distance_correlation<Real>(MatrixXr::Zero(3, 2), MatrixXr::Zero(4, 2)), ShapeError);
  EXPECT_THROW(distance_correlation<Real>(MatrixXr::Zero(1, 2), MatrixXr::Zero(1, 2)), ShapeError);
}

TEST(Dcor, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXr x = random_matrix(10, 4, rng);
    const MatrixXr f = random_matrix(10, 3, rng);
    const auto r = distance_correlation_with_grad<Real>(x, f, true);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index d = 0; d < f.cols(); ++d) {
        MatrixXr up = f, down = f;
        up(i, d) += 1e-6;
        down(i, d) -= 1e-6;
        const double fd = (distance_correlation_with_grad<Real>(x, up, false).raw -
                           distance_correlation_with_grad<Real>(x, down, false).raw) / 2e-6;
        EXPECT_NEAR(r.grad_f(i, d), fd, 1e-7);
      }
  }
}

TEST(Dcor, NearZeroForIndependentNoiseOnLargeBatches) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    const MatrixXr x = random_matrix(400, 4, rng);
    const MatrixXr f = random_matrix(400, 4, rng);
    EXPECT_LT(distance_correlation<Real>(x, f), 0.2);
  }
}

}  // namespace
}  // namespace flea
