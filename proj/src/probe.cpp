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
#include "flea/probe/probe.hpp"

#include "flea/loss/losses.hpp"
#include "flea/metrics/metrics.hpp"
#include "flea/nn/adam.hpp"
#include "flea/rng.hpp"

#include <algorithm>
#include <cmath>

namespace flea {

namespace {

Architecture mlp(int in, const std::vector<int>& hidden, int out) {
  Architecture a;
  a.widths.push_back(in);
  a.widths.insert(a.widths.end(), hidden.begin(), hidden.end());
  a.widths.push_back(out);
  a.hidden = Activation::kTanh;
  a.split_index = 1;
  return a;
}

AdamConfig constant_lr(double lr) {
  AdamConfig c;
  c.learning_rate = lr;
  c.decay_per_round = 0.0;
  c.floor_learning_rate = 0.0;
  return c;
}

MatrixXr gather(const MatrixXr& m, const std::vector<int>& rows) {
  MatrixXr out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

double reconstruction_mse(const ModelParams<Real>& decoder, const MatrixXr& activations,
                          const MatrixXr& inputs) {
  if (activations.rows() == 0) throw ShapeError("reconstruction_mse: no pairs");
  if (activations.rows() != inputs.rows())
    throw ShapeError("reconstruction_mse: pair counts differ");
  const MatrixXr out = forward_full(decoder, activations);
  if (out.cols() != inputs.cols()) throw ShapeError("reconstruction_mse: decoder output width");
  return (out - inputs).squaredNorm() / static_cast<double>(inputs.size());
}

Reconstructor train_reconstructor(const MatrixXr& activations, const MatrixXr& inputs,
                                  const DecoderConfig& cfg, std::uint64_t seed) {
  if (activations.rows() < 10) throw ShapeError("train_reconstructor: need at least 10 pairs");
  if (activations.rows() != inputs.rows()) throw ShapeError("train_reconstructor: pair counts differ");
  Rng rng = make_rng(seed, {tag(Stream::kProbe), 1});
  Reconstructor r;
  r.decoder = init_model<Real>(
      mlp(static_cast<int>(activations.cols()), cfg.hidden, static_cast<int>(inputs.cols())), rng);
  auto opt = OptimizerState<Real>::fresh(r.decoder, constant_lr(cfg.learning_rate));
  const int n = static_cast<int>(activations.rows());
  const double scale = 2.0 / static_cast<double>(inputs.cols());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = permutation(n, rng);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int len = std::min(cfg.batch_size, n - start);
      const std::vector<int> rows(order.begin() + start, order.begin() + start + len);
      const MatrixXr f = gather(activations, rows);
      const MatrixXr x = gather(inputs, rows);
      ForwardTrace<Real> trace;
      const MatrixXr out = forward_range(r.decoder, f, 0, r.decoder.num_layers(), &trace);
      auto grads = r.decoder.zeros_like();
      backward_range<Real>(r.decoder, trace, (out - x) * (scale / len), &grads);
      adam_update(opt, r.decoder, grads, 1);
    }
    r.epoch_mse.push_back(reconstruction_mse(r.decoder, activations, inputs));
  }
  r.final_mse = r.epoch_mse.empty() ? reconstruction_mse(r.decoder, activations, inputs)
                                    : r.epoch_mse.back();
  return r;
}

nlohmann::json AttackReport::to_json() const {
  return {{"kind", kind},         {"train_sizes", train_sizes}, {"curve", curve},
          {"lambda2", lambda2},   {"mean_dcor", mean_dcor},     {"seed", seed}};
}

AttackReport AttackReport::from_json(const nlohmann::json& j) {
  AttackReport r;
  r.kind = j.at("kind").get<std::string>();
  r.train_sizes = j.at("train_sizes").get<std::vector<int>>();
  r.curve = j.at("curve").get<std::vector<double>>();
  r.lambda2 = j.at("lambda2").get<double>();
  r.mean_dcor = j.at("mean_dcor").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

AttackReport context_attack(const MatrixXr& features, const std::vector<bool>& flags,
                            const std::vector<int>& train_sizes, std::uint64_t seed,
                            const ClassifierConfig& cfg) {
  const int n = static_cast<int>(features.rows());
  if (static_cast<int>(flags.size()) != n) throw ShapeError("context_attack: flag count mismatch");
  Rng split_rng = make_rng(seed, {tag(Stream::kProbe), 2});
  const auto order = permutation(n, split_rng);
  const int holdout = std::max(1, static_cast<int>(std::lround(cfg.holdout_fraction * n)));
  const std::vector<int> test_rows(order.end() - holdout, order.end());
  std::vector<int> reservoir[2];
  for (int i = 0; i < n - holdout; ++i) {
    const int r = order[static_cast<std::size_t>(i)];
    reservoir[flags[static_cast<std::size_t>(r)] ? 1 : 0].push_back(r);
  }
  if (reservoir[0].empty() || reservoir[1].empty())
    throw ShapeError("context_attack: both flag classes must be present");

  const MatrixXr test_x = gather(features, test_rows);
  std::vector<int> test_y;
  for (int r : test_rows) test_y.push_back(flags[static_cast<std::size_t>(r)] ? 1 : 0);

  AttackReport report;
  report.kind = "context";
  report.train_sizes = train_sizes;
  report.seed = seed;
  const int available = static_cast<int>(reservoir[0].size() + reservoir[1].size());

  for (std::size_t s = 0; s < train_sizes.size(); ++s) {
    const int size = train_sizes[s];
    if (size < 1 || size > available)
      throw ShapeError("context_attack: train size " + std::to_string(size) + " outside [1, " +
                       std::to_string(available) + "]");
    Rng rng = make_rng(seed, {tag(Stream::kProbe), 3, static_cast<std::uint64_t>(s)});

    std::vector<int> rows;
    std::vector<int> labels;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100)
        throw Error("context_attack: could not draw a two-class subset of size " + std::to_string(size));
      rows.clear();
      labels.clear();
      const int want_pos = std::min<int>(size / 2 + (size % 2 ? static_cast<int>(rng() & 1U) : 0),
                                         static_cast<int>(reservoir[1].size()));
      const int want_neg = std::min<int>(size - want_pos, static_cast<int>(reservoir[0].size()));
      const int pos = size - want_neg;
      for (int cls = 0; cls < 2; ++cls) {
        const auto& pool = reservoir[cls];
        const int take = cls ? pos : want_neg;
        for (int p : sample_without_replacement(static_cast<int>(pool.size()), take, rng)) {
          rows.push_back(pool[static_cast<std::size_t>(p)]);
          labels.push_back(cls);
        }
      }
      if (std::find(labels.begin(), labels.end(), 0) != labels.end() &&
          std::find(labels.begin(), labels.end(), 1) != labels.end())
        break;
    }

    MatrixXr x = gather(features, rows);
    const VectorXr mean = x.colwise().mean().transpose();
    VectorXr sd = ((x.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    sd = sd.cwiseMax(1e-8);
    auto standardize = [&](const MatrixXr& m) {
      return MatrixXr(((m.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array()).matrix());
    };
    x = standardize(x);
    const MatrixXr y = one_hot(labels, 2);

    auto model = init_model<Real>(mlp(static_cast<int>(features.cols()), cfg.hidden, 2), rng);
    auto opt = OptimizerState<Real>::fresh(model, constant_lr(cfg.learning_rate));
    const int m = static_cast<int>(rows.size());
    const int batch = std::min(cfg.batch_size, m);
    std::uniform_int_distribution<int> pick(0, m - 1);
    for (int step = 0; step < cfg.steps; ++step) {
      MatrixXr bx(batch, x.cols());
      MatrixXr by(batch, 2);
      for (int i = 0; i < batch; ++i) {
        const int r = pick(rng);
        bx.row(i) = x.row(r);
        by.row(i) = y.row(r);
      }
      ForwardTrace<Real> trace;
      const MatrixXr logits = forward_range(model, bx, 0, model.num_layers(), &trace);
      MatrixXr g;
      loss_clf(logits, by, &g);
      auto grads = model.zeros_like();
      backward_range<Real>(model, trace, g, &grads);
      adam_update(opt, model, grads, 1);
    }
    report.curve.push_back(accuracy_from_logits(forward_full(model, standardize(test_x)), test_y));
  }
  return report;
}

int samples_to_reach(const AttackReport& report, double threshold) {
  for (std::size_t i = 0; i < report.curve.size(); ++i)
    if (report.curve[i] >= threshold) return report.train_sizes[i];
  return -1;
}

}  // namespace flea
