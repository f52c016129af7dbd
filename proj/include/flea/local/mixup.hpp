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

#include <string>
#include <utility>
#include <vector>

namespace flea {

/// Local mini-batch: input rows and label distributions (one-hot or soft).
template <class Scalar>
struct Batch {
  Mat<Scalar> inputs;
  Mat<Scalar> labels;

  void validate() const {
    if (inputs.rows() != labels.rows())
      throw ShapeError("batch: " + std::to_string(inputs.rows()) + " input rows vs " +
                       std::to_string(labels.rows()) + " label rows");
    if ((labels.array() < Scalar(0)).any()) throw ShapeError("batch: negative label mass");
    const Vec<Scalar> sums = labels.rowwise().sum();
    if (((sums.array() - Scalar(1)).abs() > Scalar(1e-9)).any())
      throw ShapeError("batch: label rows must sum to 1");
  }
};

/// Split-layer activations paired with label distributions.
template <class Scalar>
struct FeatureBatch {
  Mat<Scalar> features;
  Mat<Scalar> labels;

  Eigen::Index rows() const { return features.rows(); }
};

/// Shared activation with its label distribution and the client it came from.
struct FeatureRecord {
  VectorXr activation;
  VectorXr soft_label;
  int origin_client = -1;
};

inline FeatureBatch<Real> stack_records(const std::vector<FeatureRecord>& records) {
  FeatureBatch<Real> out;
  if (records.empty()) return out;
  const auto width = records.front().activation.size();
  const auto classes = records.front().soft_label.size();
  out.features.resize(static_cast<Eigen::Index>(records.size()), width);
  out.labels.resize(static_cast<Eigen::Index>(records.size()), classes);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.activation.size() != width || r.soft_label.size() != classes)
      throw ShapeError("feature records have inconsistent widths");
    out.features.row(static_cast<Eigen::Index>(i)) = r.activation.transpose();
    out.labels.row(static_cast<Eigen::Index>(i)) = r.soft_label.transpose();
  }
  return out;
}

/// Row-wise convex interpolation between local and buffer pairs:
///   f~_i = b_i f_i + (1 - b_i) fF_i,   y~_i = b_i y_i + (1 - b_i) yF_i
template <class Scalar>
FeatureBatch<Scalar> mixup(const Mat<Scalar>& local_features, const Mat<Scalar>& local_labels,
                           const FeatureBatch<Scalar>& buffer, const Vec<Scalar>& betas) {
  const auto n = local_features.rows();
  if (local_labels.rows() != n || buffer.features.rows() != n || buffer.labels.rows() != n ||
      betas.size() != n)
    throw ShapeError("mixup: row counts differ (local " + std::to_string(n) + ", labels " +
                     std::to_string(local_labels.rows()) + ", buffer " +
                     std::to_string(buffer.features.rows()) + ", betas " +
                     std::to_string(betas.size()) + ")");
  if (buffer.features.cols() != local_features.cols())
    throw ShapeError("mixup: local feature width " + std::to_string(local_features.cols()) +
                     " != buffer feature width " + std::to_string(buffer.features.cols()));
  if (buffer.labels.cols() != local_labels.cols())
    throw ShapeError("mixup: label widths differ");
  const Vec<Scalar> rest = Vec<Scalar>::Ones(n) - betas;
  FeatureBatch<Scalar> out;
  out.features = local_features.array().colwise() * betas.array() +
                 buffer.features.array().colwise() * rest.array();
  out.labels = local_labels.array().colwise() * betas.array() +
               buffer.labels.array().colwise() * rest.array();
  return out;
}

inline FeatureBatch<Real> mixup(const MatrixXr& local_features, const MatrixXr& local_labels,
                                const std::vector<FeatureRecord>& buffer_batch,
                                const VectorXr& betas) {
  return mixup<Real>(local_features, local_labels, stack_records(buffer_batch), betas);
}

}  // namespace flea
