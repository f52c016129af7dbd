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
#include "flea/fed/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <set>
#include <thread>

namespace flea {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kFlea: return "flea";
    case Strategy::kFedAvg: return "fedavg";
    case Strategy::kFedProx: return "fedprox";
    case Strategy::kFedMix: return "fedmix";
    case Strategy::kFedData: return "feddata";
  }
  return "flea";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "flea") return Strategy::kFlea;
  if (s == "fedavg") return Strategy::kFedAvg;
  if (s == "fedprox") return Strategy::kFedProx;
  if (s == "fedmix") return Strategy::kFedMix;
  if (s == "feddata") return Strategy::kFedData;
  throw ConfigError("unknown strategy '" + s + "' (expected flea, fedavg, fedprox, fedmix, feddata)");
}

std::vector<int> sample_clients(int num_clients, double fraction, int round, std::uint64_t seed) {
  if (num_clients < 1) throw ConfigError("sample_clients: need at least one client");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("client fraction must lie in (0, 1]");
  const int count = std::clamp(static_cast<int>(std::ceil(fraction * num_clients - 1e-9)), 1,
                               num_clients);
  if (count == num_clients) return iota_vector(num_clients);
  Rng rng = make_rng(seed, {tag(Stream::kClients), static_cast<std::uint64_t>(round)});
  auto ids = sample_without_replacement(num_clients, count, rng);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ModelParams<Real> aggregate_fedavg(const std::vector<ModelParams<Real>>& models,
                                   const std::vector<int>& sizes) {
  if (models.empty()) throw AggregationError("aggregate_fedavg: no models");
  if (sizes.size() != models.size())
    throw AggregationError("aggregate_fedavg: " + std::to_string(models.size()) + " models but " +
                           std::to_string(sizes.size()) + " sizes");
  long total = 0;
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (sizes[k] < 1)
      throw AggregationError("aggregate_fedavg: client index " + std::to_string(k) +
                             " reports size " + std::to_string(sizes[k]));
    if (!models[k].same_shape(models.front()))
      throw AggregationError("aggregate_fedavg: client index " + std::to_string(k) +
                             " has a different model shape");
    total += sizes[k];
  }
  ModelParams<Real> out = models.front().zeros_like();
  for (std::size_t k = 0; k < models.size(); ++k)
    out.axpy(static_cast<Real>(sizes[k]) / static_cast<Real>(total), models[k]);
  return out;
}

std::vector<FeatureRecord> extract_features(const ModelParams<Real>& model, const Dataset& parent,
                                            const ClientDataset& client, double alpha,
                                            std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  const int n = client.size();
  if (n == 0) return {};
  const int count = std::clamp(static_cast<int>(std::lround(alpha * n)), 1, n);
  Rng rng(seed);
  std::vector<int> rows;
  for (int pos : sample_without_replacement(n, count, rng))
    rows.push_back(client.indices[static_cast<std::size_t>(pos)]);
  const MatrixXr acts = forward_front(model, parent.rows(rows));
  std::vector<FeatureRecord> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    FeatureRecord r;
    r.activation = acts.row(static_cast<Eigen::Index>(i)).transpose();
    r.soft_label = VectorXr::Zero(parent.num_classes);
    r.soft_label(parent.labels[static_cast<std::size_t>(rows[i])]) = 1.0;
    r.origin_client = client.client_id;
    out.push_back(std::move(r));
  }
  return out;
}

FeatureBuffer merge_buffers(const std::vector<std::vector<FeatureRecord>>& locals, int round,
                            std::uint64_t seed) {
  FeatureBuffer buf;
  buf.round = round;
  std::set<int> contributors;
  for (const auto& list : locals) {
    for (const auto& r : list) {
      if (!buf.records.empty() &&
          r.activation.size() != buf.records.front().activation.size())
        throw ShapeError("merge_buffers: record width " + std::to_string(r.activation.size()) +
                         " != " + std::to_string(buf.records.front().activation.size()));
      buf.records.push_back(r);
      contributors.insert(r.origin_client);
    }
  }
  Rng rng = make_rng(seed, {tag(Stream::kMerge), static_cast<std::uint64_t>(round)});
  std::shuffle(buf.records.begin(), buf.records.end(), rng);
  buf.contributors.assign(contributors.begin(), contributors.end());
  return buf;
}

SharedPool prepare_shared_pool(const Dataset& parent, const std::vector<ClientDataset>& clients,
                               SharedPool::Kind kind, std::uint64_t seed, const PoolConfig& cfg) {
  std::vector<VectorXr> xs;
  std::vector<VectorXr> ys;
  for (const auto& c : clients) {
    const int n = c.size();
    if (n == 0) continue;
    Rng rng = make_rng(seed, {tag(Stream::kPool), static_cast<std::uint64_t>(c.client_id)});
    if (kind == SharedPool::Kind::kRawData) {
      const int count = std::clamp(static_cast<int>(std::lround(cfg.raw_fraction * n)), 1, n);
      for (int pos : sample_without_replacement(n, count, rng)) {
        const int row = c.indices[static_cast<std::size_t>(pos)];
        xs.push_back(parent.inputs.row(row).transpose());
        VectorXr y = VectorXr::Zero(parent.num_classes);
        y(parent.labels[static_cast<std::size_t>(row)]) = 1.0;
        ys.push_back(std::move(y));
      }
    } else {
      if (cfg.group_size < 1) throw ConfigError("pool group size must be >= 1");
      const auto order = permutation(n, rng);
      for (int start = 0; start < n; start += cfg.group_size) {
        const int len = std::min(cfg.group_size, n - start);
        VectorXr x = VectorXr::Zero(parent.dims());
        VectorXr y = VectorXr::Zero(parent.num_classes);
        for (int i = 0; i < len; ++i) {
          const int row = c.indices[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
          x += parent.inputs.row(row).transpose();
          y(parent.labels[static_cast<std::size_t>(row)]) += 1.0;
        }
        xs.push_back(x / len);
        ys.push_back(y / len);
      }
    }
  }
  if (xs.empty()) throw ConfigError("shared pool would be empty");
  SharedPool pool;
  pool.kind = kind;
  pool.samples.resize(static_cast<Eigen::Index>(xs.size()), parent.dims());
  pool.labels.resize(static_cast<Eigen::Index>(ys.size()), parent.num_classes);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    pool.samples.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    pool.labels.row(static_cast<Eigen::Index>(i)) = ys[i].transpose();
  }
  return pool;
}

LocalResult baseline_local_train(Strategy strategy, const ModelParams<Real>& init,
                                 const ModelParams<Real>& snapshot, const Dataset& parent,
                                 const ClientDataset& client, const SharedPool* pool,
                                 const StrategyConfig& cfg, int round, std::uint64_t stream_seed) {
  const bool needs_pool = strategy == Strategy::kFedMix || strategy == Strategy::kFedData;
  if (strategy == Strategy::kFlea)
    throw ConfigError("baseline_local_train does not run FLea; use flea_local_train");
  if (needs_pool && (pool == nullptr || pool->size() == 0))
    throw ConfigError(to_string(strategy) + " requires a shared pool");
  if (!needs_pool && pool != nullptr)
    throw ConfigError(to_string(strategy) + " does not use a shared pool");

  const LossWeights plain{0.0, 0.0};
  auto cross_entropy = [&](const ModelParams<Real>& model, const Batch<Real>& batch) {
    return grad_total_loss<Real>(model, snapshot, batch, nullptr, VectorXr(), plain);
  };

  LocalTable table = client_table(parent, client);
  BatchObjective objective;
  switch (strategy) {
    case Strategy::kFedAvg:
      objective = [&](const ModelParams<Real>& m, const Batch<Real>& b, Rng&) {
        return cross_entropy(m, b);
      };
      break;
    case Strategy::kFedProx: {
      if (!(cfg.prox_rho >= 0.0)) throw ConfigError("FedProx rho must be >= 0");
      const Real rho = cfg.prox_rho;
      objective = [&, rho](const ModelParams<Real>& m, const Batch<Real>& b, Rng&) {
        auto out = cross_entropy(m, b);
        if (rho > 0.0) {
          ModelParams<Real> diff = m;
          diff.axpy(-1.0, snapshot);
          out.grads.axpy(rho, diff);
          out.loss.total += 0.5 * rho * diff.to_flat().squaredNorm();
        }
        return out;
      };
      break;
    }
    case Strategy::kFedData: {
      LocalTable joined;
      joined.inputs.resize(table.size() + pool->size(), table.inputs.cols());
      joined.labels.resize(table.size() + pool->size(), table.labels.cols());
      joined.inputs << table.inputs, pool->samples;
      joined.labels << table.labels, pool->labels;
      table = std::move(joined);
      objective = [&](const ModelParams<Real>& m, const Batch<Real>& b, Rng&) {
        return cross_entropy(m, b);
      };
      break;
    }
    case Strategy::kFedMix: {
      cfg.local.mixup.validate();
      const FeatureBatch<Real> pool_rows{pool->samples, pool->labels};
      objective = [&, pool_rows](const ModelParams<Real>& m, const Batch<Real>& b, Rng& rng) {
        const auto rows = b.inputs.rows();
        const FeatureBatch<Real> drawn = draw_rows(pool_rows, rows, rng);
        const VectorXr betas = sample_beta(cfg.local.mixup, static_cast<int>(rows), rng);
        const auto mixed = mixup<Real>(b.inputs, b.labels, drawn, betas);
        return cross_entropy(m, Batch<Real>{mixed.features, mixed.labels});
      };
      break;
    }
    case Strategy::kFlea: break;
  }
  return train_local(init, table, cfg.local, round, stream_seed, objective);
}

RoundState initial_state(const Architecture& arch, const Dataset& parent,
                         const std::vector<ClientDataset>& clients, const StrategyConfig& cfg) {
  RoundState s;
  Rng rng = make_rng(cfg.seed, {tag(Stream::kInit)});
  s.global = init_model<Real>(arch, rng);
  if (s.global.input_width() != parent.dims())
    throw ShapeError("model input width " + std::to_string(s.global.input_width()) +
                     " != dataset width " + std::to_string(parent.dims()));
  if (s.global.num_classes() != parent.num_classes)
    throw ShapeError("model has " + std::to_string(s.global.num_classes()) +
                     " outputs but the dataset has " + std::to_string(parent.num_classes) +
                     " classes");
  s.round = 1;
  s.exposure = ExposureMatrix(static_cast<int>(clients.size()));
  if (cfg.strategy == Strategy::kFedMix)
    s.pool = prepare_shared_pool(parent, clients, SharedPool::Kind::kBatchAverages, cfg.seed, cfg.pool);
  if (cfg.strategy == Strategy::kFedData)
    s.pool = prepare_shared_pool(parent, clients, SharedPool::Kind::kRawData, cfg.seed, cfg.pool);
  return s;
}

std::uint64_t client_stream(std::uint64_t seed, int round, int client) {
  return derive_seed(seed, {tag(Stream::kLocalTrain), static_cast<std::uint64_t>(round),
                            static_cast<std::uint64_t>(client)});
}

RoundResult run_round(const RoundState& state, const Dataset& parent,
                      const std::vector<ClientDataset>& clients, const StrategyConfig& cfg,
                      const std::optional<std::vector<int>>& forced_participants) {
  const int t = state.round;
  if (t < 1) throw ConfigError("round index must be >= 1");
  if (!state.global.all_finite()) throw NumericalError("global model is not finite");
  const int num_clients = static_cast<int>(clients.size());

  RoundResult result;
  result.participants = forced_participants
                            ? *forced_participants
                            : sample_clients(num_clients, cfg.client_fraction, t, cfg.seed);
  const auto& part = result.participants;
  for (int id : part)
    if (id < 0 || id >= num_clients)
      throw ConfigError("participant id " + std::to_string(id) + " out of range");
  const int m = static_cast<int>(part.size());
  if (m == 0) throw ConfigError("round " + std::to_string(t) + " has no participants");

  RoundState next;
  next.round = t + 1;
  next.pool = state.pool;
  next.exposure = state.exposure;
  auto& comm = result.comm;
  comm.model_downloads = m;
  comm.model_uploads = m;

  // Broadcast phase: who sees whose shared data this round.
  const bool is_flea = cfg.strategy == Strategy::kFlea;
  if (is_flea && !state.buffer.empty()) {
    next.exposure = update_exposure(next.exposure, state.buffer.contributors, part);
    comm.records_downloaded = static_cast<long>(state.buffer.records.size()) * m;
  }
  if (state.pool && t == 1) {
    const auto everyone = iota_vector(num_clients);
    next.exposure = update_exposure(next.exposure, everyone, everyone);
    comm.records_downloaded = static_cast<long>(state.pool->size()) * num_clients;
  }

  const FeatureBatch<Real> buffer_rows =
      is_flea && t > 1 ? state.buffer.stacked() : FeatureBatch<Real>{};
  const SharedPool* pool = state.pool ? &*state.pool : nullptr;

  std::vector<LocalResult> locals(static_cast<std::size_t>(m));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
  auto train_one = [&](int slot) {
    const auto& client = clients[static_cast<std::size_t>(part[static_cast<std::size_t>(slot)])];
    const auto stream = client_stream(cfg.seed, t, client.client_id);
    try {
      locals[static_cast<std::size_t>(slot)] =
          is_flea ? flea_local_train(state.global, state.global, parent, client, buffer_rows,
                                     cfg.local, t, stream)
                  : baseline_local_train(cfg.strategy, state.global, state.global, parent, client,
                                         pool, cfg, t, stream);
    } catch (...) {
      errors[static_cast<std::size_t>(slot)] = std::current_exception();
    }
  };
  const int workers = std::clamp(cfg.threads, 1, m);
  if (workers == 1) {
    for (int i = 0; i < m; ++i) train_one(i);
  } else {
    std::atomic<int> next_slot{0};
    std::vector<std::jthread> pool_threads;
    for (int w = 0; w < workers; ++w)
      pool_threads.emplace_back([&] {
        for (int i = next_slot++; i < m; i = next_slot++) train_one(i);
      });
  }
  for (int i = 0; i < m; ++i) {
    if (!errors[static_cast<std::size_t>(i)]) continue;
    try {
      std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      throw Error("round " + std::to_string(t) + ", client " +
                  std::to_string(part[static_cast<std::size_t>(i)]) + ": " + e.what());
    }
  }

  std::vector<ModelParams<Real>> models;
  std::vector<int> sizes;
  std::size_t batches = 0;
  for (int i = 0; i < m; ++i) {
    auto& l = locals[static_cast<std::size_t>(i)];
    models.push_back(std::move(l.model));
    sizes.push_back(clients[static_cast<std::size_t>(part[static_cast<std::size_t>(i)])].size());
    for (const auto& b : l.batch_losses) {
      result.mean_loss.clf += b.clf;
      result.mean_loss.dis += b.dis;
      result.mean_loss.dec += b.dec;
      result.mean_loss.total += b.total;
    }
    batches += l.batch_losses.size();
  }
  if (batches) {
    const auto d = static_cast<Real>(batches);
    result.mean_loss.clf /= d;
    result.mean_loss.dis /= d;
    result.mean_loss.dec /= d;
    result.mean_loss.total /= d;
  }
  next.global = aggregate_fedavg(models, sizes);
  if (!next.global.all_finite()) throw NumericalError("round " + std::to_string(t) + ": aggregated model is not finite");

  if (is_flea) {
    // Participants receive the new model once more and extract features from it.
    comm.model_downloads += m;
    std::vector<std::vector<FeatureRecord>> shared;
    for (int id : part) {
      const auto seed = derive_seed(cfg.seed, {tag(Stream::kExtract), static_cast<std::uint64_t>(t),
                                               static_cast<std::uint64_t>(id)});
      shared.push_back(extract_features(next.global, parent,
                                        clients[static_cast<std::size_t>(id)], cfg.alpha, seed));
      comm.records_uploaded += static_cast<long>(shared.back().size());
    }
    next.buffer = merge_buffers(shared, t + 1, cfg.seed);
  } else {
    next.buffer.round = t + 1;
  }
  result.state = std::move(next);
  return result;
}

}  // namespace flea
