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
#include "flea/local/train.hpp"

#include <algorithm>

namespace flea {

VectorXr sample_beta(const MixupParams& params, int n, Rng& rng) {
  params.validate();
  if (n < 1) throw ConfigError("sample_beta: n must be >= 1");
  VectorXr out(n);
  for (int i = 0; i < n; ++i)
    out(i) = params.fixed_beta ? *params.fixed_beta : sample_beta_symmetric(params.a, rng);
  return out;
}

VectorXr sample_beta(const MixupParams& params, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_beta(params, n, rng);
}

LocalTable client_table(const Dataset& parent, const ClientDataset& client) {
  return {parent.rows(client.indices), parent.one_hot(client.indices)};
}

LossBreakdown<Real> LocalResult::mean_loss() const {
  LossBreakdown<Real> m;
  if (batch_losses.empty()) return m;
  for (const auto& b : batch_losses) {
    m.clf += b.clf;
    m.dis += b.dis;
    m.dec += b.dec;
    m.total += b.total;
  }
  const auto n = static_cast<Real>(batch_losses.size());
  m.clf /= n;
  m.dis /= n;
  m.dec /= n;
  m.total /= n;
  return m;
}

FeatureBatch<Real> draw_rows(const FeatureBatch<Real>& source, Eigen::Index count, Rng& rng) {
  if (source.rows() == 0) throw ShapeError("cannot draw rows from an empty buffer");
  std::uniform_int_distribution<Eigen::Index> pick(0, source.rows() - 1);
  FeatureBatch<Real> out;
  out.features.resize(count, source.features.cols());
  out.labels.resize(count, source.labels.cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto r = pick(rng);
    out.features.row(i) = source.features.row(r);
    out.labels.row(i) = source.labels.row(r);
  }
  return out;
}

LocalResult train_local(const ModelParams<Real>& init, const LocalTable& table,
                        const LocalConfig& cfg, int round, std::uint64_t stream_seed,
                        const BatchObjective& objective) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  LocalResult result{init, {}};
  if (cfg.epochs == 0 || table.size() == 0) return result;

  Rng order_rng = make_rng(stream_seed, {1});
  Rng aux_rng = make_rng(stream_seed, {2});
  auto opt = OptimizerState<Real>::fresh(init, cfg.adam);
  const int n = static_cast<int>(table.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = permutation(n, order_rng);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int len = std::min(cfg.batch_size, n - start);
      Batch<Real> batch;
      batch.inputs.resize(len, table.inputs.cols());
      batch.labels.resize(len, table.labels.cols());
      for (int i = 0; i < len; ++i) {
        const int r = order[static_cast<std::size_t>(start + i)];
        batch.inputs.row(i) = table.inputs.row(r);
        batch.labels.row(i) = table.labels.row(r);
      }
      auto step = objective(result.model, batch, aux_rng);
      adam_update(opt, result.model, step.grads, round);
      result.batch_losses.push_back(step.loss);
    }
  }
  return result;
}

LocalResult flea_local_train(const ModelParams<Real>& init, const ModelParams<Real>& snapshot,
                             const Dataset& parent, const ClientDataset& client,
                             const FeatureBatch<Real>& buffer, const LocalConfig& cfg, int round,
                             std::uint64_t stream_seed) {
  cfg.mixup.validate();
  cfg.weights.validate();
  const bool augment = round > 1;
  if (augment) {
    if (buffer.rows() == 0)
      throw ShapeError("flea_local_train: round " + std::to_string(round) +
                       " needs a non-empty feature buffer");
    if (buffer.features.cols() != init.feature_width())
      throw ShapeError("flea_local_train: buffer feature width " +
                       std::to_string(buffer.features.cols()) + " != model split width " +
                       std::to_string(init.feature_width()));
    if (buffer.labels.cols() != init.num_classes())
      throw ShapeError("flea_local_train: buffer label width does not match the model");
  }
  // The first round has neither shared features nor a meaningful teacher.
  LossWeights weights = cfg.weights;
  if (!augment) weights.lambda_dis = 0.0;

  const BatchObjective objective = [&](const ModelParams<Real>& model, const Batch<Real>& batch,
                                       Rng& rng) {
    if (!augment) return grad_total_loss<Real>(model, snapshot, batch, nullptr, VectorXr(), weights);
    const auto rows = batch.inputs.rows();
    const FeatureBatch<Real> drawn = draw_rows(buffer, rows, rng);
    const VectorXr betas = sample_beta(cfg.mixup, static_cast<int>(rows), rng);
    return grad_total_loss<Real>(model, snapshot, batch, &drawn, betas, weights);
  };
  return train_local(init, client_table(parent, client), cfg, round, stream_seed, objective);
}

}  // namespace flea
