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
// Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
// exits non-zero if any fails. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 6 7`.

#include "flea/cli/config.hpp"
#include "flea/cli/experiment.hpp"
#include "flea/cli/probe_run.hpp"
#include "flea/fed/federation.hpp"
#include "flea/loss/dcor.hpp"
#include "flea/loss/total.hpp"
#include "flea/metrics/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <Eigen/QR>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace flea {
namespace {

namespace fs = std::filesystem;
using testing::random_distributions;
using testing::random_matrix;
using testing::random_model;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string list(const std::vector<double>& v, const char* f = "%.4f") {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(f, v[i]);
  return s + "]";
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity

Outcome gradient_fidelity() {
  Rng rng(2024);
  std::uniform_int_distribution<int> width(2, 6), depth(2, 4), batch(3, 8);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  double worst = 0.0;
  std::string worst_at;
  for (int m = 0; m < 20; ++m) {
    const int layers = depth(rng);
    std::vector<int> widths;
    for (int i = 0; i <= layers; ++i) widths.push_back(width(rng));
    std::uniform_int_distribution<int> split_pick(1, layers - 1);
    const int split = split_pick(rng);
    const auto act = m % 2 ? Activation::kTanh : Activation::kLinear;
    const auto model = random_model(widths, split, 500 + m, act);
    const auto snapshot = random_model(widths, split, 900 + m, act);
    const int n = batch(rng);
    const int c = widths.back();
    Batch<Real> b{random_matrix(n, widths.front(), rng), random_distributions(n, c, rng)};
    const FeatureBatch<Real> buffer{random_matrix(n, widths[static_cast<std::size_t>(split)], rng, 0.5),
                                    random_distributions(n, c, rng)};
    VectorXr betas(n);
    for (auto& v : betas) v = unit(rng);
    const FeatureBatch<Real>* buf = m % 4 < 2 ? &buffer : nullptr;

    auto eval = [&](const ModelParams<Real>& p, LossWeights w) {
      return grad_total_loss<Real>(p, snapshot, b, buf, betas, w);
    };
    const auto base = eval(model, {0.0, 0.0});
    const auto with_dis = eval(model, {1.0, 0.0});
    const auto with_dec = eval(model, {0.0, 1.0});
    const auto full = eval(model, {1.0, 3.0});
    struct Term {
      const char* name;
      VectorXr analytic;
      std::function<double(const ModelParams<Real>&)> value;
    };
    const std::vector<Term> terms{
        {"L_clf", base.grads.to_flat(), [&](const ModelParams<Real>& p) { return eval(p, {0, 0}).loss.clf; }},
        {"L_dis", with_dis.grads.to_flat() - base.grads.to_flat(),
         [&](const ModelParams<Real>& p) { return eval(p, {1, 0}).loss.dis; }},
        {"L_dec", with_dec.grads.to_flat() - base.grads.to_flat(),
         [&](const ModelParams<Real>& p) { return eval(p, {0, 1}).loss.dec; }},
        {"L", full.grads.to_flat(), [&](const ModelParams<Real>& p) { return eval(p, {1, 3}).loss.total; }},
    };
    for (const auto& t : terms) {
      const double err = testing::max_relative_error(t.analytic, testing::numeric_gradient(model, t.value), 1e-5);
      if (err > worst) {
        worst = err;
        worst_at = std::string(t.name) + " on model " + std::to_string(m);
      }
    }
  }
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " (" + worst_at + ") over 20 models x 4 terms"};
}

// ---------------------------------------------------------------------------
// 2. dCor oracle

Outcome dcor_oracle_equivalence() {
  Rng rng(7);
  std::uniform_int_distribution<int> rows(2, 24), cols(1, 6);
  double worst = 0.0;
  bool bounded = true;
  for (int t = 0; t < 1000; ++t) {
    const int n = rows(rng);
    const MatrixXr x = random_matrix(n, cols(rng), rng);
    MatrixXr f = random_matrix(n, cols(rng), rng);
    if (t % 3 == 0) f.leftCols(1) += x.leftCols(1);  // some dependent pairs
    const double c = distance_correlation<Real>(x, f);
    bounded = bounded && c >= 0.0 && c <= 1.0;
    const double o = testing::dcor_oracle(x, f);
    worst = std::max(worst, std::abs(c - std::clamp(o, 0.0, 1.0)));
  }
  // Maps that preserve squared-distance geometry up to scale.
  double worst_linear = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int d = cols(rng);
    const MatrixXr x = random_matrix(rows(rng) + 2, d, rng);
    const MatrixXr q = Eigen::HouseholderQR<MatrixXr>(random_matrix(d, d, rng)).householderQ();
    const MatrixXr f = ((0.5 + t) * x * q).rowwise() + Eigen::RowVectorXd::Constant(d, 1.0 * t);
    worst_linear = std::max(worst_linear, std::abs(distance_correlation<Real>(x, f) - 1.0));
    worst_linear = std::max(worst_linear, std::abs(distance_correlation<Real>(x, x) - 1.0));
  }
  const bool pass = worst <= 1e-10 && worst_linear <= 1e-10 && bounded;
  return {pass, "max |c - oracle| " + fmt("%.2e", worst) + " on 1000 pairs; max |c - 1| on linear maps " +
                    fmt("%.2e", worst_linear) + (bounded ? "; 0 <= c <= 1" : "; c left [0, 1]")};
}

// ---------------------------------------------------------------------------
// 3. FedAvg exactness

Outcome fedavg_exactness() {
  Rng rng(3);
  std::uniform_int_distribution<int> width(1, 7), count(1, 8), size(1, 500);
  long mismatches = 0, checked = 0;
  for (int t = 0; t < 50; ++t) {
    const std::vector<int> widths{width(rng), width(rng), width(rng), width(rng) + 1};
    const int k = count(rng);
    std::vector<ModelParams<Real>> models;
    std::vector<int> sizes;
    for (int i = 0; i < k; ++i) {
      models.push_back(random_model(widths, 1, static_cast<std::uint64_t>(1000 * t + i)));
      sizes.push_back(size(rng));
    }
    double total = 0;
    for (int s : sizes) total += s;
    const VectorXr got = aggregate_fedavg(models, sizes).to_flat();
    for (Eigen::Index p = 0; p < got.size(); ++p) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i)
        acc += (sizes[static_cast<std::size_t>(i)] / total) * models[static_cast<std::size_t>(i)].to_flat()(p);
      mismatches += got(p) != acc;
      ++checked;
    }
  }
  const auto m = random_model({6, 5, 4, 3}, 2, 77);
  const bool identity = aggregate_fedavg({m}, {123}) == m;
  auto neg = m;
  neg *= -1.0;
  const VectorXr cancel = aggregate_fedavg({m, neg}, {40, 40}).to_flat();
  const bool cancels = cancel == VectorXr::Zero(cancel.size());
  return {mismatches == 0 && identity && cancels,
          std::to_string(mismatches) + " of " + std::to_string(checked) +
              " parameters differ from the weighted-mean oracle; single-client identity " +
              (identity ? "exact" : "broken") + "; symmetric cancellation " + (cancels ? "exact" : "broken")};
}

// ---------------------------------------------------------------------------
// 4. DB oracle

Outcome db_oracle_equivalence() {
  Rng rng(4);
  std::uniform_int_distribution<int> kd(2, 8), dd(1, 6), nd(1, 15);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int k = kd(rng);
    std::vector<int> labels;
    for (int c = 0; c < k; ++c)
      for (int i = nd(rng); i > 0; --i) labels.push_back(c);
    std::shuffle(labels.begin(), labels.end(), rng);
    const MatrixXr x = random_matrix(static_cast<Eigen::Index>(labels.size()), dd(rng), rng, 2.0);
    worst = std::max(worst, std::abs(db_score(x, labels) - testing::db_oracle(x, labels, k)));
  }
  return {worst <= 1e-10, "max |db - oracle| " + fmt("%.2e", worst) + " on 100 labeled sets"};
}

// ---------------------------------------------------------------------------
// 5. Exposure bookkeeping

Outcome exposure_bookkeeping() {
  const Dataset data = gen_gaussian_mixture({4, 6, 60, 0.5, 1.0}, 1);
  const auto clients = partition(data, {PartitionMode::kQuantity, 2, 0.5, 10, 20, 1});
  StrategyConfig cfg;
  cfg.local.epochs = 1;
  cfg.local.batch_size = 10;
  cfg.seed = 5;
  auto state = initial_state(Architecture{{6, 10, 8, 4}, Activation::kTanh, 1}, data, clients, cfg);
  // Hand count: round t exposes cohort t-1 to cohort t, 2 x 2 pairs both ways = 8 of 100 cells.
  const std::vector<std::vector<int>> cohorts{{0, 1}, {2, 3}, {4, 5}};
  const std::vector<double> expect{0.0, 0.08, 0.16};
  std::vector<double> got;
  bool ok = true;
  for (std::size_t t = 0; t < cohorts.size(); ++t) {
    state = run_round(state, data, clients, cfg, cohorts[t]).state;
    got.push_back(exposure_eps(state.exposure));
    ok = ok && got.back() == expect[t] && got.back() <= 1.0 && (t == 0 || got[t] >= got[t - 1]);
  }
  return {ok, "epsilon per round " + list(got, "%.2f") + ", expected [0.00, 0.08, 0.16]"};
}

// ---------------------------------------------------------------------------
// Shared desk-scale runs for 6-10

RunConfig desk_config(const std::string& strategy, double lambda2) {
  RunConfig cfg;  // 6-class mixture, |K| = 60, mean client size 40, Qua(2)
  cfg.rounds = 60;
  cfg.strategy = strategy;
  cfg.lambda2 = lambda2;
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.validate();
  return cfg;
}

class RunCache {
 public:
  const std::vector<SeedOutcome>& get(const std::string& strategy, double lambda2) {
    const auto key = std::make_pair(strategy, lambda2);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    const RunConfig cfg = desk_config(strategy, lambda2);
    std::vector<SeedOutcome> out;
    for (auto seed : cfg.seeds) {
      out.push_back(run_seed(cfg, seed));
      if (!out.back().ok) throw Error(strategy + " seed " + std::to_string(seed) + ": " + out.back().error);
    }
    return runs_.emplace(key, std::move(out)).first->second;
  }

 private:
  std::map<std::pair<std::string, double>, std::vector<SeedOutcome>> runs_;
};

RunCache& cache() {
  static RunCache c;
  return c;
}

double mean_final_accuracy(const std::vector<SeedOutcome>& runs) {
  double s = 0.0;
  for (const auto& r : runs) s += r.final_accuracy() / static_cast<double>(runs.size());
  return s;
}

// ---------------------------------------------------------------------------
// 6. Trend reproduction

Outcome trend_reproduction() {
  const double flea = 100 * mean_final_accuracy(cache().get("flea", 3.0));
  const double fedmix = 100 * mean_final_accuracy(cache().get("fedmix", 3.0));
  const double fedavg = 100 * mean_final_accuracy(cache().get("fedavg", 3.0));
  const bool pass = flea > fedmix && fedmix > fedavg && flea - fedavg >= 5.0;
  return {pass, "mean final accuracy over 5 seeds: FLea " + fmt("%.2f", flea) + ", FedMix " +
                    fmt("%.2f", fedmix) + ", FedAvg " + fmt("%.2f", fedavg) + "; FLea - FedAvg = " +
                    fmt("%+.2f", flea - fedavg) + " points (need FLea > FedMix > FedAvg and >= +5)"};
}

// ---------------------------------------------------------------------------
// 7. Privacy/utility trend

Outcome privacy_trend() {
  std::vector<double> dcor, acc;
  for (double l2 : {0.0, 3.0, 6.0}) {
    const auto& runs = cache().get("flea", l2);
    double s = 0.0;
    for (const auto& r : runs) s += r.final_mean_dcor() / static_cast<double>(runs.size());
    dcor.push_back(s);
    acc.push_back(100 * mean_final_accuracy(runs));
  }
  const bool pass = dcor[0] > dcor[1] && dcor[1] > dcor[2];
  return {pass, "mean c over 5 seeds for lambda2 = 0, 3, 6: " + list(dcor) + " (accuracy " +
                    list(acc, "%.2f") + ")"};
}

// ---------------------------------------------------------------------------
// 8. Reconstruction resistance

Outcome reconstruction_resistance() {
  const auto& protected_runs = cache().get("flea", 3.0);
  const auto& open_runs = cache().get("flea", 0.0);
  const RunConfig cfg = desk_config("flea", 3.0);
  std::vector<double> mse3, mse0;
  for (std::size_t i = 0; i < protected_runs.size(); ++i) {
    const auto seed = cfg.seeds[i];
    const ExperimentData data = build_data(cfg, seed);
    // Same attacker rows, decoder and budget for both models.
    mse3.push_back(reconstruction_probe(protected_runs[i].final_state->global, data.train.inputs,
                                        data.test.inputs, 3.0, seed).curve[0]);
    mse0.push_back(reconstruction_probe(open_runs[i].final_state->global, data.train.inputs,
                                        data.test.inputs, 0.0, seed).curve[0]);
  }
  double m3 = 0.0, m0 = 0.0;
  for (std::size_t i = 0; i < mse3.size(); ++i) {
    m3 += mse3[i] / static_cast<double>(mse3.size());
    m0 += mse0[i] / static_cast<double>(mse0.size());
  }
  return {m3 > m0, "held-out reconstruction MSE, lambda2 = 3: mean " + fmt("%.4f", m3) + " " +
                       list(mse3) + "; lambda2 = 0: mean " + fmt("%.4f", m0) + " " + list(mse0)};
}

// ---------------------------------------------------------------------------
// 9. Context-attack ordering

Outcome context_ordering() {
  const auto& runs = cache().get("flea", 3.0);
  const RunConfig cfg = desk_config("flea", 3.0);
  const ProbeSetup setup;
  bool pass = true;
  std::ostringstream os;
  os << "samples to " << static_cast<int>(100 * setup.threshold) << "% (FLea vs FedMix, -1 = not reached by "
     << setup.context_sizes.back() << "):";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto ctx = context_probe(runs[i].final_state->global, cfg, cfg.seeds[i], 3.0,
                                   runs[i].final_mean_dcor(), setup);
    // Never reaching the threshold counts as needing more than the largest size.
    const long big = 1L << 40;
    const long flea = ctx.flea_needed < 0 ? big : ctx.flea_needed;
    const long fedmix = ctx.fedmix_needed < 0 ? big : ctx.fedmix_needed;
    pass = pass && flea > fedmix;
    os << " seed " << cfg.seeds[i] << " " << ctx.flea_needed << " vs " << ctx.fedmix_needed
       << " (final acc " << fmt("%.2f", ctx.flea.curve.back()) << " vs " << fmt("%.2f", ctx.fedmix.curve.back()) << ");";
  }
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  testing::TempDir dir("acceptance_det");
  std::vector<std::string> notes;
  bool pass = true;
  for (const char* strategy : {"flea", "fedmix"}) {
    std::string csv[2], jsonl[2];
    for (int i = 0; i < 2; ++i) {
      RunConfig cfg = desk_config(strategy, 3.0);
      cfg.seeds = {1};
      cfg.output_dir = dir.str(std::string(strategy) + "_" + std::to_string(i));
      if (run_experiment(cfg) != 0) return {false, std::string(strategy) + " run failed"};
      csv[i] = slurp(fs::path(cfg.output_dir) / "seed_1" / "metrics.csv");
      jsonl[i] = slurp(fs::path(cfg.output_dir) / "seed_1" / "metrics.jsonl");
    }
    const bool same = !csv[0].empty() && csv[0] == csv[1] && jsonl[0] == jsonl[1];
    pass = pass && same;
    notes.push_back(std::string(strategy) + (same ? " identical (" : " DIFFERENT (") +
                    std::to_string(csv[0].size()) + " bytes)");
  }
  return {pass, "two invocations, same config and seed: " + notes[0] + ", " + notes[1]};
}

}  // namespace
}  // namespace flea

int main(int argc, char** argv) {
  using namespace flea;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"dCor oracle equivalence", dcor_oracle_equivalence},
      {"FedAvg aggregation exactness", fedavg_exactness},
      {"DB-score oracle equivalence", db_oracle_equivalence},
      {"exposure bookkeeping", exposure_bookkeeping},
      {"trend reproduction", trend_reproduction},
      {"privacy/utility trend", privacy_trend},
      {"reconstruction resistance", reconstruction_resistance},
      {"context-attack ordering", context_ordering},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s %2d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
