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
#include "flea/fed/federation.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flea {

/// Every knob of a run. Unset keys keep these defaults; the experiment
/// manifest echoes the effective values.
struct RunConfig {
  // data
  std::string dataset = "gaussian";  // gaussian | csv
  int num_classes = 6;
  int dims = 10;
  int train_per_class = 400;
  int test_per_class = 200;
  double spread = 0.6;
  double separation = 1.0;
  std::string csv_train;
  std::string csv_test;
  std::string csv_label = "label";

  // partition
  std::string partition = "qua";  // iid | qua | dir
  int q = 2;
  double mu = 0.5;
  int num_clients = 60;
  int mean_client_size = 40;

  // model
  std::vector<int> hidden_widths = {32, 32};
  std::string activation = "tanh";
  int split_index = 1;

  // protocol
  std::string strategy = "flea";
  int rounds = 100;
  double client_fraction = 0.1;
  int epochs = 5;
  int batch_size = 32;
  double beta_a = 2.0;
  double lambda1 = 1.0;
  double lambda2 = 3.0;
  double alpha = 0.1;
  double prox_rho = 0.01;
  double learning_rate = 1e-3;
  double lr_decay = 0.02;
  double lr_floor = 1e-5;
  double pool_fraction = 0.1;
  int pool_group = 10;

  // harness
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output_dir = "runs/default";
  int threads = 1;
  int checkpoint_every = 0;  // 0: final round only
  bool record_wallclock = false;
  int eval_batch = 32;

  void validate() const;
  nlohmann::ordered_json to_json() const;

  Architecture architecture(int input_dims) const;
  PartitionSpec partition_spec(std::uint64_t seed) const;
  StrategyConfig strategy_config(std::uint64_t seed) const;
  MixtureSpec mixture(int per_class) const;
  /// Stable key for the data/partition setting, shared across strategies.
  std::string setting_key() const;
};

const std::vector<std::string>& config_keys();

/// Applies a flat JSON object on top of `base`. Unknown keys and type
/// mismatches throw ConfigError.
RunConfig apply_config_json(RunConfig base, const nlohmann::json& j);

struct ConfigOverrides {
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> strategy;
  std::optional<int> rounds;
  std::optional<double> lambda2;
  std::optional<double> alpha;
  std::optional<std::string> output_dir;
  std::optional<int> threads;
};

/// Reads `path` (may be empty for pure defaults), applies overrides, validates.
RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides = {});
RunConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides = {});

}  // namespace flea
