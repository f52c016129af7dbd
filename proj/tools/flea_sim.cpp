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
// flea_sim: run, partition, probe and report subcommands.

#include "flea/cli/config.hpp"
#include "flea/cli/experiment.hpp"
#include "flea/cli/probe_run.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string strategy;
  int rounds = 0;
  double lambda2 = -1.0;
  double alpha = -1.0;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON config file (flat key/value)");
  app->add_option("--seed", f.seeds, "seed(s); repeat or list to run several");
  app->add_option("--strategy", f.strategy, "flea | fedavg | fedprox | fedmix | feddata");
  app->add_option("--rounds", f.rounds, "communication rounds");
  app->add_option("--lambda2", f.lambda2, "weight of the decorrelation loss");
  app->add_option("--alpha", f.alpha, "share of local data contributed to the feature buffer");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--threads", f.threads, "client-training worker threads");
}

flea::RunConfig resolve(CLI::App* app, const CommonFlags& f) {
  flea::ConfigOverrides o;
  if (app->count("--seed")) o.seeds = f.seeds;
  if (app->count("--strategy")) o.strategy = f.strategy;
  if (app->count("--rounds")) o.rounds = f.rounds;
  if (app->count("--lambda2")) o.lambda2 = f.lambda2;
  if (app->count("--alpha")) o.alpha = f.alpha;
  if (app->count("--out")) o.output_dir = f.out;
  if (app->count("--threads")) o.threads = f.threads;
  return flea::parse_config(f.config, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with feature sharing"};
  app.require_subcommand(1);

  CommonFlags run_flags, part_flags;
  auto* run = app.add_subcommand("run", "run every seed and write metrics, checkpoints, summary");
  add_common(run, run_flags);

  auto* part = app.add_subcommand("partition", "write partition manifests only");
  add_common(part, part_flags);

  std::string probe_dir, probe_out;
  std::uint64_t probe_seed = 0;
  flea::ProbeSetup setup;
  auto* probe = app.add_subcommand("probe", "reconstruction and context attacks on a checkpoint");
  probe->add_option("--run", probe_dir, "run directory written by 'run'")->required();
  probe->add_option("--seed", probe_seed, "seed subdirectory to attack");
  probe->add_option("--out", probe_out, "report path (default: <run>/probe_seed_<s>.json)");
  probe->add_option("--marker-strength", setup.marker_strength, "additive marker value");
  probe->add_option("--marker-width", setup.marker_width, "marked coordinates");
  probe->add_option("--sizes", setup.context_sizes, "attacker training sizes");
  probe->add_option("--decoder-epochs", setup.decoder.epochs, "decoder training epochs");

  std::vector<std::string> report_dirs;
  std::string report_out = "report";
  auto* rep = app.add_subcommand("report", "comparison table, curves and lambda2 sweep");
  rep->add_option("dirs", report_dirs, "run directories")->required();
  rep->add_option("--out", report_out, "report directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = resolve(run, run_flags);
      flea::ExperimentSummary summary;
      const int status = flea::run_experiment(cfg, &summary);
      const auto fa = summary.final_accuracy();
      std::cout << summary.strategy << " " << summary.setting << ": final accuracy "
                << 100.0 * fa.mean << " +- " << 100.0 * fa.std << " over "
                << summary.succeeded() << "/" << summary.seeds.size() << " seeds\n";
      for (const auto& s : summary.seeds)
        if (!s.ok) std::cerr << "seed " << s.seed << " failed: " << s.error << "\n";
      return status;
    }
    if (*part) {
      const auto cfg = resolve(part, part_flags);
      fs::create_directories(cfg.output_dir);
      for (auto seed : cfg.seeds) {
        const auto data = flea::build_data(cfg, seed);
        const fs::path path = fs::path(cfg.output_dir) / ("partition_seed_" + std::to_string(seed) + ".json");
        std::ofstream out(path);
        out << flea::partition_manifest_json(data.spec, data.clients);
        if (!out) throw flea::IoError("cannot write " + path.string());
        std::cout << path.string() << "\n";
      }
      return 0;
    }
    if (*probe) {
      const auto j = flea::probe_run(probe_dir, probe_seed, setup);
      const std::string path = probe_out.empty()
          ? (fs::path(probe_dir) / ("probe_seed_" + std::to_string(probe_seed) + ".json")).string()
          : probe_out;
      std::ofstream out(path);
      out << j.dump(2) << "\n";
      if (!out) throw flea::IoError("cannot write " + path);
      std::cout << path << "\n";
      return 0;
    }
    if (*rep) {
      const auto r = flea::report(report_dirs, report_out);
      std::ifstream table(fs::path(report_out) / "table.txt");
      std::cout << table.rdbuf();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
