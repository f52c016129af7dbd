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
#include "flea/cli/experiment.hpp"

#include "flea/nn/serialize.hpp"
#include "flea/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace flea {

namespace {

Dataset subset(const Dataset& d, const std::vector<int>& idx) {
  Dataset out;
  out.inputs = d.rows(idx);
  out.labels = d.labels_of(idx);
  out.num_classes = d.num_classes;
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double db_or_zero(const MatrixXr& features, const std::vector<int>& labels) {
  std::set<int> distinct(labels.begin(), labels.end());
  return distinct.size() < 2 ? 0.0 : db_score(features, labels);
}

}  // namespace

ExperimentData build_data(const RunConfig& cfg, std::uint64_t seed) {
  ExperimentData data;
  if (cfg.dataset == "gaussian") {
    data.train = gen_gaussian_mixture(cfg.mixture(cfg.train_per_class),
                                      derive_seed(seed, {tag(Stream::kData), 0}));
    data.test = gen_gaussian_mixture(cfg.mixture(cfg.test_per_class),
                                     derive_seed(seed, {tag(Stream::kData), 1}));
  } else {
    CsvSchema schema;
    schema.label_column = cfg.csv_label;
    Dataset all = load_csv(cfg.csv_train, schema);
    if (!cfg.csv_test.empty()) {
      data.train = std::move(all);
      data.test = load_csv(cfg.csv_test, schema);
      if (data.test.dims() != data.train.dims())
        throw ShapeError("test CSV has " + std::to_string(data.test.dims()) +
                         " features, training CSV has " + std::to_string(data.train.dims()));
    } else {
      // Seeded 80/20 hold-out when no test file is given.
      Rng rng = make_rng(seed, {tag(Stream::kData), 2});
      auto perm = permutation(static_cast<int>(all.size()), rng);
      const auto n_test = std::max<std::size_t>(1, perm.size() / 5);
      std::vector<int> test_idx(perm.begin(), perm.begin() + static_cast<long>(n_test));
      std::vector<int> train_idx(perm.begin() + static_cast<long>(n_test), perm.end());
      std::sort(test_idx.begin(), test_idx.end());
      std::sort(train_idx.begin(), train_idx.end());
      data.train = subset(all, train_idx);
      data.test = subset(all, test_idx);
    }
  }
  data.spec = cfg.partition_spec(seed);
  data.clients = partition(data.train, data.spec);
  return data;
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

SeedOutcome run_seed(const RunConfig& cfg, std::uint64_t seed, const std::string& seed_dir) {
  SeedOutcome outcome;
  outcome.seed = seed;
  try {
    ExperimentData data = build_data(cfg, seed);
    RunConfig effective = cfg;
    if (cfg.dataset == "csv") effective.num_classes = data.train.num_classes;
    const StrategyConfig scfg = effective.strategy_config(seed);
    const Architecture arch = effective.architecture(static_cast<int>(data.train.dims()));

    std::optional<MetricsSink> sink;
    if (!seed_dir.empty()) {
      fs::create_directories(seed_dir);
      write_text(fs::path(seed_dir) / "partition.json",
                 partition_manifest_json(data.spec, data.clients));
      sink.emplace((fs::path(seed_dir) / "metrics.csv").string(),
                   (fs::path(seed_dir) / "metrics.jsonl").string());
    }

    std::vector<int> client_rows;
    for (const auto& c : data.clients)
      client_rows.insert(client_rows.end(), c.indices.begin(), c.indices.end());
    std::sort(client_rows.begin(), client_rows.end());
    const MatrixXr train_inputs = data.train.rows(client_rows);
    const std::vector<int> train_labels = data.train.labels_of(client_rows);

    RoundState state = initial_state(arch, data.train, data.clients, scfg);
    double best = 0.0;
    for (int t = 1; t <= cfg.rounds; ++t) {
      const auto start = std::chrono::steady_clock::now();
      RoundResult result = run_round(state, data.train, data.clients, scfg);
      const auto stop = std::chrono::steady_clock::now();
      state = std::move(result.state);

      MetricsRecord rec;
      rec.round = t;
      rec.strategy = cfg.strategy;
      rec.seed = seed;
      rec.accuracy = accuracy(state.global, data.test);
      best = std::max(best, rec.accuracy);
      rec.best_accuracy = best;
      rec.loss_clf = result.mean_loss.clf;
      rec.loss_dis = result.mean_loss.dis;
      rec.loss_dec = result.mean_loss.dec;
      rec.db_train = db_or_zero(forward_front(state.global, train_inputs), train_labels);
      rec.db_test = db_or_zero(forward_front(state.global, data.test.inputs), data.test.labels);
      rec.mean_dcor = mean_dcor(state.global, data.test.inputs, cfg.eval_batch,
                                derive_seed(seed, {tag(Stream::kEval)}));
      rec.exposure_eps = exposure_eps(state.exposure);
      if (cfg.record_wallclock)
        rec.wallclock_ms = std::chrono::duration<double, std::milli>(stop - start).count();
      if (sink) sink->write(rec);
      outcome.records.push_back(rec);

      const bool last = t == cfg.rounds;
      const bool periodic = cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0;
      if (!seed_dir.empty() && (last || periodic)) {
        char name[32];
        std::snprintf(name, sizeof name, "round_%04d", t);
        nlohmann::json extra = {{"seed", seed}, {"strategy", cfg.strategy}, {"round", t}};
        save_checkpoint(state, (fs::path(seed_dir) / "checkpoints" / name).string(), extra);
      }
    }
    outcome.final_state = std::move(state);
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
  }
  return outcome;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  if (values.empty()) return r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(values.size()));
  return r;
}

int ExperimentSummary::succeeded() const {
  return static_cast<int>(std::count_if(seeds.begin(), seeds.end(), [](const auto& s) { return s.ok; }));
}

namespace {
template <class F>
MeanStd over_ok(const std::vector<SeedOutcome>& seeds, F f) {
  std::vector<double> v;
  for (const auto& s : seeds)
    if (s.ok) v.push_back(f(s));
  return mean_std(v);
}
}  // namespace

MeanStd ExperimentSummary::final_accuracy() const {
  return over_ok(seeds, [](const SeedOutcome& s) { return s.final_accuracy(); });
}
MeanStd ExperimentSummary::best_accuracy() const {
  return over_ok(seeds, [](const SeedOutcome& s) { return s.best_accuracy(); });
}
MeanStd ExperimentSummary::mean_dcor() const {
  return over_ok(seeds, [](const SeedOutcome& s) { return s.final_mean_dcor(); });
}

nlohmann::ordered_json ExperimentSummary::to_json() const {
  nlohmann::ordered_json j;
  j["setting"] = setting;
  j["strategy"] = strategy;
  j["lambda2"] = lambda2;
  j["num_seeds"] = seeds.size();
  j["succeeded"] = succeeded();
  const auto fa = final_accuracy(), ba = best_accuracy(), dc = mean_dcor();
  j["final_accuracy_mean"] = fa.mean;
  j["final_accuracy_std"] = fa.std;
  j["best_accuracy_mean"] = ba.mean;
  j["best_accuracy_std"] = ba.std;
  j["mean_dcor_mean"] = dc.mean;
  j["mean_dcor_std"] = dc.std;
  j["std_ddof"] = 0;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& s : seeds) {
    nlohmann::ordered_json r;
    r["seed"] = s.seed;
    r["status"] = s.ok ? "ok" : "failed";
    r["rounds_completed"] = s.records.size();
    r["final_accuracy"] = s.final_accuracy();
    r["best_accuracy"] = s.best_accuracy();
    r["mean_dcor"] = s.final_mean_dcor();
    r["error"] = s.error;
    rows.push_back(r);
  }
  j["seeds"] = rows;
  return j;
}

ExperimentSummary summarize(const RunConfig& cfg, std::vector<SeedOutcome> outcomes) {
  ExperimentSummary s;
  s.setting = cfg.setting_key();
  s.strategy = cfg.strategy;
  s.lambda2 = cfg.lambda2;
  s.seeds = std::move(outcomes);
  return s;
}

int run_experiment(const RunConfig& cfg, ExperimentSummary* out) {
  cfg.validate();
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);
  write_text(root / "manifest.json", cfg.to_json().dump(2) + "\n");

  std::vector<SeedOutcome> outcomes;
  for (auto seed : cfg.seeds) {
    auto o = run_seed(cfg, seed, (root / seed_dir_name(seed)).string());
    o.final_state.reset();
    outcomes.push_back(std::move(o));
  }
  ExperimentSummary summary = summarize(cfg, std::move(outcomes));

  std::ostringstream csv;
  csv << "setting,strategy,lambda2,seed,status,final_accuracy,best_accuracy,mean_dcor\n";
  for (const auto& s : summary.seeds)
    csv << summary.setting << "," << summary.strategy << "," << fmt(summary.lambda2) << ","
        << s.seed << "," << (s.ok ? "ok" : "failed") << "," << fmt(s.final_accuracy()) << ","
        << fmt(s.best_accuracy()) << "," << fmt(s.final_mean_dcor()) << "\n";
  write_text(root / "summary.csv", csv.str());
  write_text(root / "summary.json", summary.to_json().dump(2) + "\n");

  const bool all_ok = summary.succeeded() == static_cast<int>(summary.seeds.size());
  if (out) *out = std::move(summary);
  return all_ok ? 0 : 1;
}

ReportResult report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  ReportResult result;
  // (setting, strategy, lambda2) -> per-round accuracies of every seed
  std::map<std::tuple<std::string, std::string, double>, std::map<int, std::vector<double>>> curves;

  for (const auto& dir : run_dirs) {
    const fs::path summary_path = fs::path(dir) / "summary.json";
    std::ifstream in(summary_path);
    if (!in) {
      result.missing.push_back(dir);
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      result.missing.push_back(dir);
      continue;
    }
    ReportRow row;
    row.run_dir = dir;
    row.setting = j.at("setting").get<std::string>();
    row.strategy = j.at("strategy").get<std::string>();
    row.lambda2 = j.at("lambda2").get<double>();
    std::vector<double> fa, ba, dc;
    for (const auto& s : j.at("seeds")) {
      ++row.seeds;
      if (s.at("status") != "ok") {
        ++row.failed;
        continue;
      }
      fa.push_back(s.at("final_accuracy").get<double>());
      ba.push_back(s.at("best_accuracy").get<double>());
      dc.push_back(s.at("mean_dcor").get<double>());
      const fs::path metrics = fs::path(dir) / seed_dir_name(s.at("seed").get<std::uint64_t>()) / "metrics.csv";
      if (fs::exists(metrics)) {
        auto& curve = curves[{row.setting, row.strategy, row.lambda2}];
        for (const auto& rec : read_metrics_csv(metrics.string()))
          curve[rec.round].push_back(rec.accuracy);
      }
    }
    row.final_accuracy = mean_std(fa);
    row.best_accuracy = mean_std(ba);
    row.mean_dcor = mean_std(dc);
    result.rows.push_back(row);
  }

  std::stable_sort(result.rows.begin(), result.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.setting, a.strategy, a.lambda2) < std::tie(b.setting, b.strategy, b.lambda2);
  });

  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  std::ostringstream table;
  table << "setting,strategy,lambda2,seeds,failed,final_accuracy_mean,final_accuracy_std,"
           "best_accuracy_mean,best_accuracy_std,mean_dcor_mean,run_dir\n";
  for (const auto& r : result.rows)
    table << r.setting << "," << r.strategy << "," << fmt(r.lambda2) << "," << r.seeds << ","
          << r.failed << "," << fmt(r.final_accuracy.mean) << "," << fmt(r.final_accuracy.std)
          << "," << fmt(r.best_accuracy.mean) << "," << fmt(r.best_accuracy.std) << ","
          << fmt(r.mean_dcor.mean) << "," << r.run_dir << "\n";
  write_text(out / "table.csv", table.str());

  std::vector<std::vector<std::string>> cells = {
      {"setting", "strategy", "lambda2", "seeds", "final acc (%)", "best acc (%)", "mean dcor"}};
  auto pct = [](const MeanStd& m) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * m.mean << " +- " << 100.0 * m.std;
    return os.str();
  };
  for (const auto& r : result.rows) {
    std::ostringstream l2, dc;
    l2 << r.lambda2;
    dc << std::fixed << std::setprecision(3) << r.mean_dcor.mean;
    std::string seeds = std::to_string(r.seeds - r.failed) + "/" + std::to_string(r.seeds);
    cells.push_back({r.setting, r.strategy, l2.str(), seeds, pct(r.final_accuracy),
                     pct(r.best_accuracy), dc.str()});
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream text;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c)
      text << std::left << std::setw(static_cast<int>(width[c]) + 2) << row[c];
    text << "\n";
  }
  for (const auto& m : result.missing) text << "absent: " << m << " (no summary.json)\n";
  write_text(out / "table.txt", text.str());

  std::ostringstream curve_csv;
  curve_csv << "setting,strategy,lambda2,round,accuracy_mean,accuracy_std,seeds\n";
  for (const auto& [key, rounds] : curves)
    for (const auto& [t, accs] : rounds) {
      const auto ms = mean_std(accs);
      curve_csv << std::get<0>(key) << "," << std::get<1>(key) << "," << fmt(std::get<2>(key))
                << "," << t << "," << fmt(ms.mean) << "," << fmt(ms.std) << "," << accs.size()
                << "\n";
    }
  write_text(out / "curves.csv", curve_csv.str());

  std::ostringstream sweep;
  sweep << "setting,strategy,lambda2,mean_dcor,final_accuracy_mean,final_accuracy_std\n";
  for (const auto& r : result.rows)
    if (r.strategy == "flea")
      sweep << r.setting << "," << r.strategy << "," << fmt(r.lambda2) << ","
            << fmt(r.mean_dcor.mean) << "," << fmt(r.final_accuracy.mean) << ","
            << fmt(r.final_accuracy.std) << "\n";
  write_text(out / "lambda_sweep.csv", sweep.str());

  std::ostringstream missing;
  for (const auto& m : result.missing) missing << m << "\n";
  write_text(out / "missing.txt", missing.str());
  return result;
}

}  // namespace flea
