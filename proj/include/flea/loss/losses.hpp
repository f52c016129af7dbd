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

#include <cmath>
#include <string>

namespace flea {

/// Row-wise log-softmax with max subtraction.
template <class Derived>
Mat<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> shifted = logits.colwise() - logits.rowwise().maxCoeff();
  const Vec<Scalar> lse = shifted.array().exp().rowwise().sum().log();
  shifted.colwise() -= lse;
  return shifted;
}

template <class Derived>
Mat<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  return log_softmax(logits).array().exp().matrix();
}

template <class Scalar>
void check_same_shape(const Mat<Scalar>& a, const Mat<Scalar>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(what) + ": shape " + dims_str(a.rows(), a.cols()) + " vs " +
                     dims_str(b.rows(), b.cols()));
}

/// Mean soft-label cross-entropy. If `grad_logits` is given it receives
/// dL/dlogits (labels are assumed to be distributions, rows summing to 1).
template <class Scalar>
Scalar loss_clf(const Mat<Scalar>& logits, const Mat<Scalar>& soft_labels,
                Mat<Scalar>* grad_logits = nullptr) {
  check_same_shape(logits, soft_labels, "loss_clf");
  const Scalar n = static_cast<Scalar>(logits.rows());
  const Mat<Scalar> logp = log_softmax(logits);
  const Scalar loss = -(soft_labels.array() * logp.array()).sum() / n;
  if (grad_logits) {
    // d/dz of -sum_c y_c log p_c = p * sum_c y_c - y
    const Vec<Scalar> mass = soft_labels.rowwise().sum();
    *grad_logits = (logp.array().exp().colwise() * mass.array() - soft_labels.array()).matrix() / n;
  }
  return loss;
}

/// Mean KL(p_local || p_global) over rows, both from logits. Gradients with
/// respect to either side are optional.
template <class Scalar>
Scalar loss_dis(const Mat<Scalar>& local_logits, const Mat<Scalar>& global_logits,
                Mat<Scalar>* grad_local = nullptr, Mat<Scalar>* grad_global = nullptr) {
  check_same_shape(local_logits, global_logits, "loss_dis");
  const Scalar n = static_cast<Scalar>(local_logits.rows());
  const Mat<Scalar> logp_l = log_softmax(local_logits);
  const Mat<Scalar> logp_g = log_softmax(global_logits);
  const Mat<Scalar> p_l = logp_l.array().exp().matrix();
  const Mat<Scalar> gap = logp_l - logp_g;
  const Vec<Scalar> kl_rows = (p_l.array() * gap.array()).rowwise().sum();
  if (grad_local) {
    *grad_local = (p_l.array() * (gap.array().colwise() - kl_rows.array())).matrix() / n;
  }
  if (grad_global) {
    *grad_global = (logp_g.array().exp() - p_l.array()).matrix() / n;
  }
  return kl_rows.sum() / n;
}

}  // namespace flea
