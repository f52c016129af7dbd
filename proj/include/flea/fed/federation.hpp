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
#include "flea/local/train.hpp"
#include "flea/metrics/metrics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flea {

enum class Strategy { kFlea, kFedAvg, kFedProx, kFedMix, kFedData };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// Round-scoped global feature buffer. A buffer built at the end of round t
/// is tagged t + 1 and fully replaces its predecessor.
struct FeatureBuffer {
  int round = 1;
  std::vector<FeatureRecord> records;
  std::vector<int> contributors;  // ascending client ids

  bool empty() const { return records.empty(); }
  FeatureBatch<Real> stacked() const { return stack_records(records); }
};

struct SharedPool {
  enum class Kind { kRawData, kBatchAverages };
  Kind kind = Kind::kRawData;
  MatrixXr samples;
  MatrixXr labels;

  Eigen::Index size() const { return samples.rows(); }
};

/// ceil(fraction * num_clients) distinct ids, ascending, seeded by (seed, round).
std::vector<int> sample_clients(int num_clients, double fraction, int round, std::uint64_t seed);

/// Weighted mean sum_k (|D_k| / sum_j |D_j|) * theta_k, accumulated in list order.
ModelParams<Real> aggregate_fedavg(const std::vector<ModelParams<Real>>& models,
                                   const std::vector<int>& sizes);

/// Activations of a seeded max(1, round(alpha * |D_k|)) subset of the client's
/// rows under `model`, with one-hot labels.
std::vector<FeatureRecord> extract_features(const ModelParams<Real>& model, const Dataset& parent,
                                            const ClientDataset& client, double alpha,
                                            std::uint64_t seed);

/// Concatenates per-client records and shuffles them into the buffer for `round`.
FeatureBuffer merge_buffers(const std::vector<std::vector<FeatureRecord>>& locals, int round,
                            std::uint64_t seed);

struct PoolConfig {
  double raw_fraction = 0.1;  // FedData: share of each client's rows
  int group_size = 10;        // FedMix: rows averaged per shared sample
};

SharedPool prepare_shared_pool(const Dataset& parent, const std::vector<ClientDataset>& clients,
                               SharedPool::Kind kind, std::uint64_t seed,
                               const PoolConfig& cfg = {});

struct StrategyConfig {
  Strategy strategy = Strategy::kFlea;
  LocalConfig local;
  double prox_rho = 0.01;
  double client_fraction = 0.1;
  double alpha = 0.1;  // share of local data contributed to the feature buffer
  PoolConfig pool;
  int threads = 1;
  std::uint64_t seed = 0;
};

/// One client's update under a baseline strategy (everything but FLea).
LocalResult baseline_local_train(Strategy strategy, const ModelParams<Real>& init,
                                 const ModelParams<Real>& snapshot, const Dataset& parent,
                                 const ClientDataset& client, const SharedPool* pool,
                                 const StrategyConfig& cfg, int round, std::uint64_t stream_seed);

struct RoundState {
  ModelParams<Real> global;
  int round = 1;  // the round about to run
  FeatureBuffer buffer;
  std::optional<SharedPool> pool;
  ExposureMatrix exposure;
};

/// Fresh state: seeded initial model, empty buffer, zero exposure, and the
/// shared pool for strategies that need one.
RoundState initial_state(const Architecture& arch, const Dataset& parent,
                         const std::vector<ClientDataset>& clients, const StrategyConfig& cfg);

struct CommStats {
  long model_downloads = 0;
  long model_uploads = 0;
  long records_downloaded = 0;
  long records_uploaded = 0;
};

struct RoundResult {
  RoundState state;  // ready for the next round
  std::vector<int> participants;
  LossBreakdown<Real> mean_loss;
  CommStats comm;
};

/// Derived stream for client `client` in `round`; independent of scheduling.
std::uint64_t client_stream(std::uint64_t seed, int round, int client);

/// Executes one communication round. Clients train on up to `cfg.threads`
/// threads; aggregation waits for all of them. `forced_participants`
/// overrides client sampling (scripted schedules, tests).
RoundResult run_round(const RoundState& state, const Dataset& parent,
                      const std::vector<ClientDataset>& clients, const StrategyConfig& cfg,
                      const std::optional<std::vector<int>>& forced_participants = std::nullopt);

}  // namespace flea
