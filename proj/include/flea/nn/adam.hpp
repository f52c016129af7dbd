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

#include <algorithm>
#include <cmath>
#include <utility>

namespace flea {

struct AdamConfig {
  double learning_rate = 1e-3;
  double decay_per_round = 0.02;
  double floor_learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Learning rate for a 1-based communication round:
/// max(floor, lr0 * (1 - decay)^(round - 1)).
inline double scheduled_learning_rate(const AdamConfig& cfg, int round) {
  if (round < 1) throw ConfigError("round must be >= 1, got " + std::to_string(round));
  const double lr = cfg.learning_rate * std::pow(1.0 - cfg.decay_per_round, round - 1);
  return std::clamp(lr, cfg.floor_learning_rate, cfg.learning_rate);
}

template <class Scalar>
struct OptimizerState {
  AdamConfig config;
  ModelParams<Scalar> first_moment;
  ModelParams<Scalar> second_moment;
  long step = 0;

  static OptimizerState fresh(const ModelParams<Scalar>& like, AdamConfig cfg = {}) {
    return {cfg, like.zeros_like(), like.zeros_like(), 0};
  }
};

/// In-place Adam update with bias correction. Throws NumericalError and
/// leaves both `params` and `state` untouched if `grads` is not finite.
template <class Scalar>
void adam_update(OptimizerState<Scalar>& state, ModelParams<Scalar>& params,
                 const ModelParams<Scalar>& grads, int round) {
  if (!grads.same_shape(params) || !state.first_moment.same_shape(params))
    throw ShapeError("adam: gradient/accumulator shapes do not match the model");
  if (!grads.all_finite()) throw NumericalError("adam: non-finite gradient");

  const auto& c = state.config;
  const Scalar lr = static_cast<Scalar>(scheduled_learning_rate(c, round));
  const Scalar b1 = static_cast<Scalar>(c.beta1);
  const Scalar b2 = static_cast<Scalar>(c.beta2);
  const Scalar eps = static_cast<Scalar>(c.epsilon);
  state.step += 1;
  const Scalar corr1 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta1, state.step));
  const Scalar corr2 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta2, state.step));

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
  };
  for (int i = 0; i < params.num_layers(); ++i) {
    update(params.layer(i).weight, state.first_moment.layer(i).weight,
           state.second_moment.layer(i).weight, grads.layer(i).weight);
    update(params.layer(i).bias, state.first_moment.layer(i).bias,
           state.second_moment.layer(i).bias, grads.layer(i).bias);
  }
}

template <class Scalar>
std::pair<ModelParams<Scalar>, OptimizerState<Scalar>> adam_step(
    OptimizerState<Scalar> state, ModelParams<Scalar> params, const ModelParams<Scalar>& grads,
    int round) {
  adam_update(state, params, grads, round);
  return {std::move(params), std::move(state)};
}

}  // namespace flea
