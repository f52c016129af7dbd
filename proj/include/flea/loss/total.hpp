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

#include "flea/local/mixup.hpp"
#include "flea/loss/dcor.hpp"
#include "flea/loss/losses.hpp"
#include "flea/nn/model.hpp"

#include <cmath>
#include <string>

namespace flea {

struct LossWeights {
  double lambda_dis = 1.0;
  double lambda_dec = 3.0;

  void validate() const {
    if (!(lambda_dis >= 0.0)) throw ConfigError("lambda1 must be >= 0");
    if (!(lambda_dec >= 0.0)) throw ConfigError("lambda2 must be >= 0");
  }
};

template <class Scalar>
struct LossBreakdown {
  Scalar clf = 0;
  Scalar dis = 0;
  Scalar dec = 0;
  Scalar total = 0;
};

template <class Scalar>
struct LossAndGrad {
  LossBreakdown<Scalar> loss;
  ModelParams<Scalar> grads;
};

namespace detail {
template <class Scalar>
void require_finite(Scalar v, const char* term) {
  if (!std::isfinite(static_cast<double>(v)))
    throw NumericalError(std::string("non-finite value in loss term ") + term);
}
}  // namespace detail

/// L = L_clf + l1 * L_dis + l2 * L_dec and its exact gradient w.r.t. `model`.
///
/// The local batch goes through the front half; when `buffer` is given the
/// resulting activations are mixed with it using `betas` before the back half.
/// L_dis compares the back halves of `model` and the frozen `snapshot` on the
/// (possibly mixed) activations; the snapshot gets no gradient but the path
/// through it still reaches the front half. L_dec is measured between the
/// raw inputs and their unmixed activations; a single-row batch has no
/// pairwise distances and contributes L_dec = 0.
template <class Scalar>
LossAndGrad<Scalar> grad_total_loss(const ModelParams<Scalar>& model,
                                    const ModelParams<Scalar>& snapshot, const Batch<Scalar>& batch,
                                    const FeatureBatch<Scalar>* buffer, const Vec<Scalar>& betas,
                                    const LossWeights& weights) {
  weights.validate();
  batch.validate();
  if (!snapshot.same_shape(model)) throw ShapeError("global snapshot shape differs from model");
  const Scalar l1 = static_cast<Scalar>(weights.lambda_dis);
  const Scalar l2 = static_cast<Scalar>(weights.lambda_dec);
  const int split = model.split_index();
  const int depth = model.num_layers();

  ForwardTrace<Scalar> front;
  const Mat<Scalar> f = forward_range(model, batch.inputs, 0, split, &front);

  FeatureBatch<Scalar> mixed;
  const bool augment = buffer != nullptr;
  if (augment) {
    if (buffer->rows() != batch.inputs.rows())
      throw ShapeError("buffer batch has " + std::to_string(buffer->rows()) +
                       " rows, local batch " + std::to_string(batch.inputs.rows()));
    mixed = mixup(f, batch.labels, *buffer, betas);
  }
  const Mat<Scalar>& feats = augment ? mixed.features : f;
  const Mat<Scalar>& labels = augment ? mixed.labels : batch.labels;

  ForwardTrace<Scalar> back_local;
  ForwardTrace<Scalar> back_global;
  const Mat<Scalar> z_local = forward_range(model, feats, split, depth, &back_local);
  const Mat<Scalar> z_global = forward_range(snapshot, feats, split, depth, &back_global);

  LossAndGrad<Scalar> out;
  out.grads = model.zeros_like();

  Mat<Scalar> g_local;
  out.loss.clf = loss_clf(z_local, labels, &g_local);
  detail::require_finite(out.loss.clf, "L_clf");

  Mat<Scalar> g_dis_local;
  Mat<Scalar> g_dis_global;
  out.loss.dis = loss_dis(z_local, z_global, &g_dis_local, &g_dis_global);
  detail::require_finite(out.loss.dis, "L_dis");

  DcorResult<Scalar> dec;
  if (batch.inputs.rows() >= 2)
    dec = distance_correlation_with_grad(batch.inputs, f, l2 > Scalar(0));
  else if (l2 > Scalar(0))
    dec.grad_f = Mat<Scalar>::Zero(f.rows(), f.cols());
  out.loss.dec = dec.value;
  detail::require_finite(out.loss.dec, "L_dec");

  out.loss.total = out.loss.clf + l1 * out.loss.dis + l2 * out.loss.dec;

  Mat<Scalar> g_feats;
  if (l1 > Scalar(0)) {
    g_local += l1 * g_dis_local;
    g_feats = backward_range(model, back_local, g_local, &out.grads);
    g_feats += backward_range<Scalar>(snapshot, back_global, l1 * g_dis_global, nullptr);
  } else {
    g_feats = backward_range(model, back_local, g_local, &out.grads);
  }

  Mat<Scalar> g_f = augment ? Mat<Scalar>(g_feats.array().colwise() * betas.array()) : g_feats;
  if (l2 > Scalar(0)) g_f += l2 * dec.grad_f;
  backward_range(model, front, g_f, &out.grads);
  return out;
}

}  // namespace flea
