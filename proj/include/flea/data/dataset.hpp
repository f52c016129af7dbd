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

#include "flea/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flea {

struct Dataset {
  MatrixXr inputs;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<bool> context_flags;  // empty unless a marker was applied

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dims() const { return inputs.cols(); }

  /// Row counts agree, labels in range, every class present.
  void validate() const;

  MatrixXr rows(const std::vector<int>& idx) const;
  MatrixXr one_hot(const std::vector<int>& idx) const;
  std::vector<int> labels_of(const std::vector<int>& idx) const;
  std::vector<int> class_counts() const;
};

MatrixXr one_hot(const std::vector<int>& labels, int num_classes);

struct ClientDataset {
  int client_id = 0;
  std::vector<int> indices;  // rows of the parent Dataset

  int size() const { return static_cast<int>(indices.size()); }
};

enum class PartitionMode { kIid, kQuantity, kDirichlet };

struct PartitionSpec {
  PartitionMode mode = PartitionMode::kQuantity;
  int q = 2;          // classes per client, quantity mode
  double mu = 0.5;    // Dirichlet concentration
  int num_clients = 10;
  int mean_size = 50;
  std::uint64_t seed = 0;

  void validate(int num_classes, Eigen::Index dataset_size) const;
  /// Short stable key, e.g. "qua2" or "dir0.5".
  std::string label() const;
};

std::string to_string(PartitionMode m);
PartitionMode partition_mode_from_string(const std::string& s);

struct MixtureSpec {
  int num_classes = 6;
  int dims = 8;
  int per_class = 100;
  double spread = 1.0;
  double separation = 1.0;
};

/// Isotropic Gaussian clusters. Class c has mean separation * e_c when
/// classes fit in the input dimensions, otherwise the means sit on a circle of
/// that radius in the first two coordinates. Rows are grouped by class.
Dataset gen_gaussian_mixture(const MixtureSpec& spec, std::uint64_t seed);

std::vector<ClientDataset> partition(const Dataset& dataset, const PartitionSpec& spec);

/// Disjointness and non-emptiness; throws PartitionError on violation.
void check_partition(const Dataset& dataset, const std::vector<ClientDataset>& clients);

std::string partition_manifest_json(const PartitionSpec& spec,
                                    const std::vector<ClientDataset>& clients);
std::vector<ClientDataset> parse_partition_manifest(const std::string& json_text);

struct CsvSchema {
  std::string label_column = "label";
  std::vector<std::string> feature_columns;  // empty: every other column
};

struct FeatureTypeError : ParseError {
  using ParseError::ParseError;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
void write_csv(const Dataset& dataset, const std::string& path);

/// Adds `marker` onto coordinates [offset, offset + marker.size()) of a seeded
/// round(fraction * n) subset of rows and records which rows were marked.
Dataset add_context_marker(const Dataset& dataset, const VectorXr& marker, double fraction,
                           std::uint64_t seed, int offset = 0);

}  // namespace flea
