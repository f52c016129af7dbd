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
#pragma once

#include "flea/data/dataset.hpp"
#include "flea/loss/total.hpp"
#include "flea/nn/adam.hpp"
#include "flea/rng.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace flea {

struct MixupParams {
  double a = 2.0;
  // Pins every interpolation weight; used for ablations and reductions.
  std::optional<double> fixed_beta;

  void validate() const {
    if (!(a > 0.0)) throw ConfigError("Beta shape a must be > 0");
    if (fixed_beta && !(*fixed_beta >= 0.0 && *fixed_beta <= 1.0))
      throw ConfigError("fixed beta must lie in [0, 1]");
  }
};

/// n i.i.d. draws from Beta(a, a) via two Gamma(a, 1) variates.
VectorXr sample_beta(const MixupParams& params, int n, Rng& rng);
VectorXr sample_beta(const MixupParams& params, int n, std::uint64_t seed);

struct LocalConfig {
  int epochs = 5;
  int batch_size = 32;
  MixupParams mixup;
  LossWeights weights;
  AdamConfig adam;
};

/// Rows a client trains on, materialized.
struct LocalTable {
  MatrixXr inputs;
  MatrixXr labels;  // label distributions

  Eigen::Index size() const { return inputs.rows(); }
};

LocalTable client_table(const Dataset& parent, const ClientDataset& client);

struct LocalResult {
  ModelParams<Real> model;
  std::vector<LossBreakdown<Real>> batch_losses;

  LossBreakdown<Real> mean_loss() const;
};

/// Per-batch objective: returns loss and gradient for `model` on `batch`.
/// The rng is a stream private to the client, separate from batch shuffling.
using BatchObjective =
    std::function<LossAndGrad<Real>(const ModelParams<Real>&, const Batch<Real>&, Rng&)>;

/// E epochs of shuffled mini-batches with a fresh Adam state. Batch order is
/// drawn from its own stream so objectives that consume randomness do not
/// perturb it.
LocalResult train_local(const ModelParams<Real>& init, const LocalTable& table,
                        const LocalConfig& cfg, int round, std::uint64_t stream_seed,
                        const BatchObjective& objective);

/// FLea client update. With round == 1 the buffer is ignored and training uses
/// L_clf + l2 * L_dec on the local data alone; afterwards every local batch is
/// mixed with an equally sized batch drawn with replacement from `buffer`.
LocalResult flea_local_train(const ModelParams<Real>& init, const ModelParams<Real>& snapshot,
                             const Dataset& parent, const ClientDataset& client,
                             const FeatureBatch<Real>& buffer, const LocalConfig& cfg, int round,
                             std::uint64_t stream_seed);

/// Rows drawn uniformly with replacement.
FeatureBatch<Real> draw_rows(const FeatureBatch<Real>& source, Eigen::Index count, Rng& rng);

}  // namespace flea
