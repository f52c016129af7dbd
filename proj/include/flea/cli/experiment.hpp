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
#include "flea/fed/federation.hpp"
#include "flea/metrics/metrics.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flea {

struct ExperimentData {
  Dataset train;
  Dataset test;
  PartitionSpec spec;
  std::vector<ClientDataset> clients;
};

/// Dataset and partition for one seed. Deterministic in (cfg, seed).
ExperimentData build_data(const RunConfig& cfg, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<MetricsRecord> records;
  std::optional<RoundState> final_state;

  double final_accuracy() const { return records.empty() ? 0.0 : records.back().accuracy; }
  double best_accuracy() const { return records.empty() ? 0.0 : records.back().best_accuracy; }
  double final_mean_dcor() const { return records.empty() ? 0.0 : records.back().mean_dcor; }
};

/// Runs all rounds for one seed. With a non-empty `seed_dir` the partition
/// manifest, metrics CSV/JSONL and checkpoints are written there. Module
/// errors are caught and reported through `ok`/`error`.
SeedOutcome run_seed(const RunConfig& cfg, std::uint64_t seed, const std::string& seed_dir = "");

struct MeanStd {
  double mean = 0;
  double std = 0;  // population deviation over the successful seeds
};
MeanStd mean_std(const std::vector<double>& values);

struct ExperimentSummary {
  std::string setting;
  std::string strategy;
  double lambda2 = 0;
  std::vector<SeedOutcome> seeds;

  int succeeded() const;
  MeanStd final_accuracy() const;
  MeanStd best_accuracy() const;
  MeanStd mean_dcor() const;
  nlohmann::ordered_json to_json() const;
};

ExperimentSummary summarize(const RunConfig& cfg, std::vector<SeedOutcome> outcomes);

/// Per-seed runs under cfg.output_dir followed by summary.json/summary.csv.
/// Returns 0 iff every seed succeeded.
int run_experiment(const RunConfig& cfg, ExperimentSummary* summary = nullptr);

std::string seed_dir_name(std::uint64_t seed);

struct ReportRow {
  std::string run_dir;
  std::string setting;
  std::string strategy;
  double lambda2 = 0;
  int seeds = 0;
  int failed = 0;
  MeanStd final_accuracy;
  MeanStd best_accuracy;
  MeanStd mean_dcor;
};

struct ReportResult {
  std::vector<ReportRow> rows;
  std::vector<std::string> missing;
};

/// Reads summary.json from each run directory and writes table.csv,
/// table.txt, curves.csv and lambda_sweep.csv into `out_dir`.
ReportResult report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace flea
