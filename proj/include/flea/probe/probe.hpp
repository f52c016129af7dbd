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

#include "flea/nn/model.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace flea {

struct DecoderConfig {
  std::vector<int> hidden = {64, 64};
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 1e-3;
};

struct Reconstructor {
  ModelParams<Real> decoder;
  double final_mse = 0;              // on the training pairs after the last epoch
  std::vector<double> epoch_mse;     // training MSE after each epoch
};

/// Fits an MLP decoder activations -> inputs by Adam on mean squared error.
Reconstructor train_reconstructor(const MatrixXr& activations, const MatrixXr& inputs,
                                  const DecoderConfig& cfg, std::uint64_t seed);

/// Mean over rows of ||decoder(f) - x||^2 / dims.
double reconstruction_mse(const ModelParams<Real>& decoder, const MatrixXr& activations,
                          const MatrixXr& inputs);

struct ClassifierConfig {
  std::vector<int> hidden = {32, 16, 8};  // four linear layers in total
  int steps = 400;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.3;
};

struct AttackReport {
  std::string kind;
  std::vector<int> train_sizes;
  std::vector<double> curve;
  double lambda2 = 0;
  double mean_dcor = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static AttackReport from_json(const nlohmann::json& j);
};

/// Marker-detection attack. Rows are split once into a training reservoir and
/// a held-out set; for each size a fresh binary classifier is trained on a
/// balanced subset of that many reservoir rows with a fixed step budget and
/// scored on the held-out rows.
AttackReport context_attack(const MatrixXr& features, const std::vector<bool>& flags,
                            const std::vector<int>& train_sizes, std::uint64_t seed,
                            const ClassifierConfig& cfg = {});

/// Smallest swept size whose accuracy reaches `threshold`, or -1.
int samples_to_reach(const AttackReport& report, double threshold);

}  // namespace flea
