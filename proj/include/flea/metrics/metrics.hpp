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
#include "flea/nn/model.hpp"

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace flea {

/// Symmetric record of which client pairs have exchanged features. Entries
/// only ever flip from 0 to 1 and the diagonal stays 0.
class ExposureMatrix {
 public:
  ExposureMatrix() = default;
  explicit ExposureMatrix(int num_clients)
      : n_(num_clients), bits_(static_cast<std::size_t>(num_clients) * num_clients, 0) {}

  int num_clients() const { return n_; }
  bool operator()(int i, int j) const { return bits_[index(i, j)] != 0; }
  long count() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  static ExposureMatrix from_bits(int num_clients, std::vector<std::uint8_t> bits);

  friend ExposureMatrix update_exposure(ExposureMatrix xi, const std::vector<int>& senders,
                                        const std::vector<int>& receivers);
  friend bool operator==(const ExposureMatrix&, const ExposureMatrix&) = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }
  int n_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Marks every (sender, receiver) pair with distinct ids, both directions.
ExposureMatrix update_exposure(ExposureMatrix xi, const std::vector<int>& senders,
                               const std::vector<int>& receivers);

/// sum(xi) / |K|^2.
double exposure_eps(const ExposureMatrix& xi);

/// Top-1 accuracy of argmax logits.
double accuracy(const ModelParams<Real>& model, const Dataset& test);
double accuracy_from_logits(const MatrixXr& logits, const std::vector<int>& labels);

/// Davies-Bouldin index with the given labels as clusters. Scatter is the
/// mean Euclidean distance of members to their centroid; pairs of clusters
/// with coincident centroids are skipped.
double db_score(const MatrixXr& features, const std::vector<int>& labels);

/// Mean distance correlation between inputs and front-half activations over
/// seeded batches of `batch_size` rows that cover the data once. A trailing
/// batch with fewer than 2 rows is dropped.
double mean_dcor(const ModelParams<Real>& model, const MatrixXr& inputs, int batch_size,
                 std::uint64_t seed);

struct MetricsRecord {
  int round = 1;
  std::string strategy;
  std::uint64_t seed = 0;
  double accuracy = 0;
  double best_accuracy = 0;
  double loss_clf = 0;
  double loss_dis = 0;
  double loss_dec = 0;
  double db_train = 0;
  double db_test = 0;
  double mean_dcor = 0;
  double exposure_eps = 0;
  double wallclock_ms = 0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// Fixed column order of the metrics CSV; the JSONL objects use the same keys.
const std::vector<std::string>& metrics_columns();

/// Appends one CSV row and one JSON line per record, flushing both.
class MetricsSink {
 public:
  MetricsSink(const std::string& csv_path, const std::string& jsonl_path);
  void write(const MetricsRecord& record);

 private:
  std::ofstream csv_;
  std::ofstream jsonl_;
  std::string csv_path_;
};

inline void write_metrics(MetricsSink& sink, const MetricsRecord& record) { sink.write(record); }

std::string metrics_json_line(const MetricsRecord& record);
std::vector<MetricsRecord> read_metrics_jsonl(const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

}  // namespace flea
