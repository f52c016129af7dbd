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
#include "flea/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace flea {

namespace {

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

template <class T>
Setter set(T RunConfig::*field) {
  return [field](RunConfig& c, const nlohmann::json& v) { c.*field = v.get<T>(); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", set(&RunConfig::dataset)},
      {"num_classes", set(&RunConfig::num_classes)},
      {"dims", set(&RunConfig::dims)},
      {"train_per_class", set(&RunConfig::train_per_class)},
      {"test_per_class", set(&RunConfig::test_per_class)},
      {"spread", set(&RunConfig::spread)},
      {"separation", set(&RunConfig::separation)},
      {"csv_train", set(&RunConfig::csv_train)},
      {"csv_test", set(&RunConfig::csv_test)},
      {"csv_label", set(&RunConfig::csv_label)},
      {"partition", set(&RunConfig::partition)},
      {"q", set(&RunConfig::q)},
      {"mu", set(&RunConfig::mu)},
      {"num_clients", set(&RunConfig::num_clients)},
      {"mean_client_size", set(&RunConfig::mean_client_size)},
      {"hidden_widths", set(&RunConfig::hidden_widths)},
      {"activation", set(&RunConfig::activation)},
      {"split_index", set(&RunConfig::split_index)},
      {"strategy", set(&RunConfig::strategy)},
      {"rounds", set(&RunConfig::rounds)},
      {"client_fraction", set(&RunConfig::client_fraction)},
      {"epochs", set(&RunConfig::epochs)},
      {"batch_size", set(&RunConfig::batch_size)},
      {"beta_a", set(&RunConfig::beta_a)},
      {"lambda1", set(&RunConfig::lambda1)},
      {"lambda2", set(&RunConfig::lambda2)},
      {"alpha", set(&RunConfig::alpha)},
      {"prox_rho", set(&RunConfig::prox_rho)},
      {"learning_rate", set(&RunConfig::learning_rate)},
      {"lr_decay", set(&RunConfig::lr_decay)},
      {"lr_floor", set(&RunConfig::lr_floor)},
      {"pool_fraction", set(&RunConfig::pool_fraction)},
      {"pool_group", set(&RunConfig::pool_group)},
      {"seeds", set(&RunConfig::seeds)},
      {"output_dir", set(&RunConfig::output_dir)},
      {"threads", set(&RunConfig::threads)},
      {"checkpoint_every", set(&RunConfig::checkpoint_every)},
      {"record_wallclock", set(&RunConfig::record_wallclock)},
      {"eval_batch", set(&RunConfig::eval_batch)},
  };
  return table;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("invalid " + field + ": " + what);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void RunConfig::validate() const {
  require(dataset == "gaussian" || dataset == "csv", "dataset", "expected gaussian or csv");
  if (dataset == "gaussian") {
    require(num_classes >= 2, "num_classes", "must be >= 2");
    require(dims >= 2, "dims", "must be >= 2");
    require(train_per_class >= 1, "train_per_class", "must be >= 1");
    require(test_per_class >= 1, "test_per_class", "must be >= 1");
    require(spread >= 0.0, "spread", "must be >= 0");
    require(separation > 0.0, "separation", "must be > 0");
  } else {
    require(!csv_train.empty(), "csv_train", "required when dataset is csv");
  }
  require(partition == "iid" || partition == "qua" || partition == "dir", "partition",
          "expected iid, qua or dir");
  if (partition == "qua") require(q >= 1 && (dataset != "gaussian" || q <= num_classes), "q", "must lie in [1, num_classes]");
  if (partition == "dir") require(mu > 0.0, "mu", "must be > 0");
  require(num_clients >= 1, "num_clients", "must be >= 1");
  require(mean_client_size >= 1, "mean_client_size", "must be >= 1");
  require(!hidden_widths.empty(), "hidden_widths", "need at least one hidden layer");
  for (int w : hidden_widths) require(w >= 1, "hidden_widths", "widths must be >= 1");
  activation_from_string(activation);
  require(split_index >= 1 && split_index <= static_cast<int>(hidden_widths.size()), "split_index",
          "must lie in [1, number of hidden layers]");
  strategy_from_string(strategy);
  require(rounds >= 1, "rounds", "must be >= 1");
  require(client_fraction > 0.0 && client_fraction <= 1.0, "client_fraction", "must lie in (0, 1]");
  require(epochs >= 0, "epochs", "must be >= 0");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(beta_a > 0.0, "beta_a", "must be > 0");
  require(lambda1 >= 0.0, "lambda1", "must be >= 0");
  require(lambda2 >= 0.0, "lambda2", "must be >= 0");
  require(alpha > 0.0 && alpha <= 1.0, "alpha", "must lie in (0, 1]");
  require(prox_rho >= 0.0, "prox_rho", "must be >= 0");
  require(learning_rate > 0.0, "learning_rate", "must be > 0");
  require(lr_decay >= 0.0 && lr_decay < 1.0, "lr_decay", "must lie in [0, 1)");
  require(lr_floor >= 0.0 && lr_floor <= learning_rate, "lr_floor", "must lie in [0, learning_rate]");
  require(pool_fraction > 0.0 && pool_fraction <= 1.0, "pool_fraction", "must lie in (0, 1]");
  require(pool_group >= 1, "pool_group", "must be >= 1");
  require(!seeds.empty(), "seeds", "need at least one seed");
  require(!output_dir.empty(), "output_dir", "must not be empty");
  require(threads >= 1, "threads", "must be >= 1");
  require(checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
  require(eval_batch >= 2, "eval_batch", "must be >= 2");
  if (dataset == "gaussian")
    require(static_cast<long>(num_clients) * mean_client_size <=
                static_cast<long>(num_classes) * train_per_class,
            "mean_client_size", "num_clients * mean_client_size exceeds the training set");
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["num_classes"] = num_classes;
  j["dims"] = dims;
  j["train_per_class"] = train_per_class;
  j["test_per_class"] = test_per_class;
  j["spread"] = spread;
  j["separation"] = separation;
  j["csv_train"] = csv_train;
  j["csv_test"] = csv_test;
  j["csv_label"] = csv_label;
  j["partition"] = partition;
  j["q"] = q;
  j["mu"] = mu;
  j["num_clients"] = num_clients;
  j["mean_client_size"] = mean_client_size;
  j["hidden_widths"] = hidden_widths;
  j["activation"] = activation;
  j["split_index"] = split_index;
  j["strategy"] = strategy;
  j["rounds"] = rounds;
  j["client_fraction"] = client_fraction;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["beta_a"] = beta_a;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["alpha"] = alpha;
  j["prox_rho"] = prox_rho;
  j["learning_rate"] = learning_rate;
  j["lr_decay"] = lr_decay;
  j["lr_floor"] = lr_floor;
  j["pool_fraction"] = pool_fraction;
  j["pool_group"] = pool_group;
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  j["threads"] = threads;
  j["checkpoint_every"] = checkpoint_every;
  j["record_wallclock"] = record_wallclock;
  j["eval_batch"] = eval_batch;
  return j;
}

Architecture RunConfig::architecture(int input_dims) const {
  Architecture a;
  a.widths.push_back(input_dims);
  a.widths.insert(a.widths.end(), hidden_widths.begin(), hidden_widths.end());
  a.widths.push_back(num_classes);
  a.hidden = activation_from_string(activation);
  a.split_index = split_index;
  return a;
}

PartitionSpec RunConfig::partition_spec(std::uint64_t seed) const {
  PartitionSpec p;
  p.mode = partition_mode_from_string(partition);
  p.q = q;
  p.mu = mu;
  p.num_clients = num_clients;
  p.mean_size = mean_client_size;
  p.seed = seed;
  return p;
}

StrategyConfig RunConfig::strategy_config(std::uint64_t seed) const {
  StrategyConfig s;
  s.strategy = strategy_from_string(strategy);
  s.local.epochs = epochs;
  s.local.batch_size = batch_size;
  s.local.mixup.a = beta_a;
  s.local.weights = {lambda1, lambda2};
  s.local.adam.learning_rate = learning_rate;
  s.local.adam.decay_per_round = lr_decay;
  s.local.adam.floor_learning_rate = lr_floor;
  s.prox_rho = prox_rho;
  s.client_fraction = client_fraction;
  s.alpha = alpha;
  s.pool.raw_fraction = pool_fraction;
  s.pool.group_size = pool_group;
  s.threads = threads;
  s.seed = seed;
  return s;
}

MixtureSpec RunConfig::mixture(int per_class) const {
  return {num_classes, dims, per_class, spread, separation};
}

std::string RunConfig::setting_key() const {
  std::ostringstream os;
  if (dataset == "gaussian")
    os << "gauss" << num_classes << "x" << dims << "s" << spread;
  else
    os << "csv";
  os << "_" << partition_spec(0).label() << "_K" << num_clients << "_n" << mean_client_size;
  return os.str();
}

RunConfig apply_config_json(RunConfig base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object of key/value pairs");
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    auto it = table.find(key);
    if (it == table.end()) {
      std::string valid;
      for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
      throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
    }
    try {
      it->second(base, value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }
  return base;
}

RunConfig parse_config_text(const std::string& text, const ConfigOverrides& o) {
  RunConfig cfg;
  bool has_output = false;
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg = apply_config_json(cfg, j);
    has_output = j.is_object() && j.contains("output_dir");
  }
  if (o.seeds) cfg.seeds = *o.seeds;
  if (o.strategy) cfg.strategy = *o.strategy;
  if (o.rounds) cfg.rounds = *o.rounds;
  if (o.lambda2) cfg.lambda2 = *o.lambda2;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.threads) cfg.threads = *o.threads;
  if (!has_output && !o.output_dir) {
    if (const char* root = std::getenv("FLEA_OUT_ROOT"); root && *root) {
      std::ostringstream os;
      os << root << "/" << cfg.strategy << "_" << cfg.setting_key() << "_l2_" << cfg.lambda2;
      cfg.output_dir = os.str();
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config_text(text, overrides);
}

}  // namespace flea
