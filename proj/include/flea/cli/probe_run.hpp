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

#include "flea/cli/config.hpp"
#include "flea/probe/probe.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace flea {

struct ProbeSetup {
  int probe_per_class = 800;       // fresh rows drawn for the marker attack
  double marker_strength = 1.0;    // added to each marked coordinate
  int marker_width = 2;            // coordinates at the end of the input
  double marker_fraction = 0.5;
  int fedmix_group = 10;
  std::vector<int> context_sizes = {10, 20, 40, 80, 160, 320};
  double threshold = 0.9;
  DecoderConfig decoder;
  ClassifierConfig classifier;
};

/// Decoder trained on (front(x), x) over `attacker` rows, scored on `heldout`.
/// The report has one entry: the attacker's training size and held-out MSE.
AttackReport reconstruction_probe(const ModelParams<Real>& model, const MatrixXr& attacker,
                                  const MatrixXr& heldout, double lambda2, std::uint64_t seed,
                                  const DecoderConfig& cfg = {});

/// Averages of `group` rows that share a flag, formed after a seeded shuffle.
/// Leftover rows that do not fill a group are dropped.
MatrixXr group_averages(const MatrixXr& rows, const std::vector<bool>& flags, int group,
                        std::uint64_t seed, std::vector<bool>* group_flags);

struct ContextProbe {
  AttackReport flea;    // per-sample front activations
  AttackReport fedmix;  // same-flag input averages
  int flea_needed = -1;
  int fedmix_needed = -1;
};

/// Builds a marked probe set from the run's data generator and attacks both
/// the model's activations and FedMix-style averages of the same rows.
ContextProbe context_probe(const ModelParams<Real>& model, const RunConfig& cfg,
                           std::uint64_t seed, double lambda2, double dcor,
                           const ProbeSetup& setup = {});

/// Attacks the last checkpoint of `seed` under `run_dir`.
nlohmann::ordered_json probe_run(const std::string& run_dir, std::uint64_t seed,
                                 const ProbeSetup& setup = {});

}  // namespace flea
