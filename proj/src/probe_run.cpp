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
#include "flea/cli/probe_run.hpp"

#include "flea/cli/experiment.hpp"
#include "flea/metrics/metrics.hpp"
#include "flea/nn/serialize.hpp"
#include "flea/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace flea {

AttackReport reconstruction_probe(const ModelParams<Real>& model, const MatrixXr& attacker,
                                  const MatrixXr& heldout, double lambda2, std::uint64_t seed,
                                  const DecoderConfig& cfg) {
  const MatrixXr train_act = forward_front(model, attacker);
  const MatrixXr test_act = forward_front(model, heldout);
  const Reconstructor rec = train_reconstructor(train_act, attacker, cfg, seed);
  AttackReport r;
  r.kind = "reconstruction";
  r.train_sizes = {static_cast<int>(attacker.rows())};
  r.curve = {reconstruction_mse(rec.decoder, test_act, heldout)};
  r.lambda2 = lambda2;
  r.mean_dcor = mean_dcor(model, heldout, 32, derive_seed(seed, {tag(Stream::kEval)}));
  r.seed = seed;
  return r;
}

MatrixXr group_averages(const MatrixXr& rows, const std::vector<bool>& flags, int group,
                        std::uint64_t seed, std::vector<bool>* group_flags) {
  if (static_cast<Eigen::Index>(flags.size()) != rows.rows())
    throw ShapeError("group_averages: " + std::to_string(flags.size()) + " flags for " +
                     std::to_string(rows.rows()) + " rows");
  if (group < 1) throw ConfigError("group_averages: group size must be >= 1");
  Rng rng = make_rng(seed, {tag(Stream::kPool), 7});
  auto order = permutation(static_cast<int>(rows.rows()), rng);
  std::vector<std::vector<int>> members(2);
  for (int i : order) members[flags[static_cast<std::size_t>(i)] ? 1 : 0].push_back(i);

  std::vector<VectorXr> means;
  std::vector<bool> gflags;
  for (int f = 0; f < 2; ++f)
    for (std::size_t s = 0; s + static_cast<std::size_t>(group) <= members[f].size(); s += group) {
      VectorXr m = VectorXr::Zero(rows.cols());
      for (int k = 0; k < group; ++k) m += rows.row(members[f][s + k]).transpose();
      means.push_back(m / group);
      gflags.push_back(f == 1);
    }
  // Interleave the two flag classes so downstream splits see both.
  auto perm = permutation(static_cast<int>(means.size()), rng);
  MatrixXr out(static_cast<Eigen::Index>(means.size()), rows.cols());
  std::vector<bool> out_flags(means.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = means[static_cast<std::size_t>(perm[i])].transpose();
    out_flags[i] = gflags[static_cast<std::size_t>(perm[i])];
  }
  if (group_flags) *group_flags = std::move(out_flags);
  return out;
}

ContextProbe context_probe(const ModelParams<Real>& model, const RunConfig& cfg,
                           std::uint64_t seed, double lambda2, double dcor,
                           const ProbeSetup& setup) {
  if (cfg.dataset != "gaussian")
    throw ConfigError("context probe needs the gaussian generator to draw fresh rows");
  const Dataset base = gen_gaussian_mixture(cfg.mixture(setup.probe_per_class),
                                            derive_seed(seed, {tag(Stream::kProbe), 0}));
  if (setup.marker_width < 1 || setup.marker_width > base.dims())
    throw ConfigError("context probe: marker_width must lie in [1, dims]");
  const VectorXr marker = VectorXr::Constant(setup.marker_width, setup.marker_strength);
  const Dataset marked =
      add_context_marker(base, marker, setup.marker_fraction, derive_seed(seed, {tag(Stream::kMarker)}),
                         static_cast<int>(base.dims()) - setup.marker_width);

  ContextProbe out;
  const std::uint64_t attack_seed = derive_seed(seed, {tag(Stream::kProbe), 1});
  out.flea = context_attack(forward_front(model, marked.inputs), marked.context_flags,
                            setup.context_sizes, attack_seed, setup.classifier);
  out.flea.kind = "context_flea";
  out.flea.lambda2 = lambda2;
  out.flea.mean_dcor = dcor;

  std::vector<bool> gflags;
  const MatrixXr averages = group_averages(marked.inputs, marked.context_flags, setup.fedmix_group,
                                           derive_seed(seed, {tag(Stream::kProbe), 2}), &gflags);
  out.fedmix = context_attack(averages, gflags, setup.context_sizes, attack_seed, setup.classifier);
  out.fedmix.kind = "context_fedmix";
  out.fedmix.lambda2 = 0.0;
  out.fedmix.mean_dcor = 1.0;  // averages are a linear image of the raw inputs

  out.flea_needed = samples_to_reach(out.flea, setup.threshold);
  out.fedmix_needed = samples_to_reach(out.fedmix, setup.threshold);
  return out;
}

nlohmann::ordered_json probe_run(const std::string& run_dir, std::uint64_t seed,
                                 const ProbeSetup& setup) {
  std::ifstream in(fs::path(run_dir) / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + run_dir);
  RunConfig cfg = apply_config_json(RunConfig{}, nlohmann::json::parse(in));
  cfg.validate();

  const fs::path ckdir = fs::path(run_dir) / seed_dir_name(seed) / "checkpoints";
  if (!fs::is_directory(ckdir)) throw IoError("no checkpoints under " + ckdir.string());
  std::vector<fs::path> rounds;
  for (const auto& e : fs::directory_iterator(ckdir))
    if (e.is_directory()) rounds.push_back(e.path());
  if (rounds.empty()) throw IoError("no checkpoints under " + ckdir.string());
  std::sort(rounds.begin(), rounds.end());
  const RoundState state = load_checkpoint(rounds.back().string());

  const ExperimentData data = build_data(cfg, seed);
  const double dcor = mean_dcor(state.global, data.test.inputs, cfg.eval_batch,
                                derive_seed(seed, {tag(Stream::kEval)}));
  const AttackReport rec = reconstruction_probe(state.global, data.train.inputs, data.test.inputs,
                                                cfg.lambda2, seed, setup.decoder);

  nlohmann::ordered_json j;
  j["run_dir"] = run_dir;
  j["checkpoint"] = rounds.back().filename().string();
  j["seed"] = seed;
  j["lambda2"] = cfg.lambda2;
  j["mean_dcor"] = dcor;
  j["reconstruction"] = rec.to_json();
  if (cfg.dataset == "gaussian") {
    const ContextProbe ctx = context_probe(state.global, cfg, seed, cfg.lambda2, dcor, setup);
    j["context_flea"] = ctx.flea.to_json();
    j["context_fedmix"] = ctx.fedmix.to_json();
    j["threshold"] = setup.threshold;
    j["flea_samples_needed"] = ctx.flea_needed;
    j["fedmix_samples_needed"] = ctx.fedmix_needed;
  }
  return j;
}

}  // namespace flea
