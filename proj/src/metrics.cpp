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
#include "flea/metrics/metrics.hpp"

#include "flea/loss/dcor.hpp"
#include "flea/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace flea {

// ---------------------------------------------------------------------------
// Exposure

long ExposureMatrix::count() const {
  long c = 0;
  for (auto b : bits_) c += b;
  return c;
}

ExposureMatrix ExposureMatrix::from_bits(int num_clients, std::vector<std::uint8_t> bits) {
  if (bits.size() != static_cast<std::size_t>(num_clients) * num_clients)
    throw ShapeError("exposure matrix: wrong number of entries");
  ExposureMatrix xi(num_clients);
  for (int i = 0; i < num_clients; ++i)
    for (int j = 0; j < num_clients; ++j) {
      const auto b = bits[xi.index(i, j)];
      if (b > 1 || (i == j && b) || b != bits[xi.index(j, i)])
        throw ShapeError("exposure matrix must be a symmetric 0/1 matrix with zero diagonal");
    }
  xi.bits_ = std::move(bits);
  return xi;
}

ExposureMatrix update_exposure(ExposureMatrix xi, const std::vector<int>& senders,
                               const std::vector<int>& receivers) {
  auto check = [&](int id) {
    if (id < 0 || id >= xi.n_)
      throw ShapeError("client id " + std::to_string(id) + " outside [0, " +
                       std::to_string(xi.n_) + ")");
  };
  for (int s : senders) check(s);
  for (int r : receivers) check(r);
  for (int s : senders)
    for (int r : receivers) {
      if (s == r) continue;
      xi.bits_[xi.index(s, r)] = 1;
      xi.bits_[xi.index(r, s)] = 1;
    }
  return xi;
}

double exposure_eps(const ExposureMatrix& xi) {
  if (xi.num_clients() == 0) return 0.0;
  const double n = xi.num_clients();
  return static_cast<double>(xi.count()) / (n * n);
}

// ---------------------------------------------------------------------------
// Accuracy, DB, dCor

double accuracy_from_logits(const MatrixXr& logits, const std::vector<int>& labels) {
  if (logits.rows() == 0) throw ShapeError("accuracy: empty test set");
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw ShapeError("accuracy: label count does not match logits");
  long hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    hits += (arg == labels[static_cast<std::size_t>(r)]);
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

double accuracy(const ModelParams<Real>& model, const Dataset& test) {
  return accuracy_from_logits(forward_full(model, test.inputs), test.labels);
}

double db_score(const MatrixXr& features, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw ShapeError("db_score: label count does not match feature rows");
  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i)
    members[labels[i]].push_back(static_cast<Eigen::Index>(i));
  if (members.size() < 2) throw ShapeError("db_score: need at least 2 clusters");

  const auto k = static_cast<Eigen::Index>(members.size());
  MatrixXr centroids(k, features.cols());
  VectorXr scatter(k);
  Eigen::Index c = 0;
  for (const auto& [label, rows] : members) {
    VectorXr centroid = VectorXr::Zero(features.cols());
    for (auto r : rows) centroid += features.row(r).transpose();
    centroid /= static_cast<double>(rows.size());
    double s = 0.0;
    for (auto r : rows) s += (features.row(r).transpose() - centroid).norm();
    centroids.row(c) = centroid.transpose();
    scatter(c) = s / static_cast<double>(rows.size());
    ++c;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double d = (centroids.row(i) - centroids.row(j)).norm();
      if (d <= 0.0) continue;
      worst = std::max(worst, (scatter(i) + scatter(j)) / d);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

double mean_dcor(const ModelParams<Real>& model, const MatrixXr& inputs, int batch_size,
                 std::uint64_t seed) {
  if (inputs.rows() == 0) throw ShapeError("mean_dcor: empty data");
  if (batch_size < 2) throw ConfigError("mean_dcor: batch size must be >= 2");
  const MatrixXr feats = forward_front(model, inputs);
  Rng rng = make_rng(seed, {tag(Stream::kEval)});
  const int n = static_cast<int>(inputs.rows());
  const auto order = permutation(n, rng);
  double sum = 0.0;
  int batches = 0;
  for (int start = 0; start < n; start += batch_size) {
    const int len = std::min(batch_size, n - start);
    if (len < 2) break;
    MatrixXr x(len, inputs.cols());
    MatrixXr f(len, feats.cols());
    for (int i = 0; i < len; ++i) {
      x.row(i) = inputs.row(order[static_cast<std::size_t>(start + i)]);
      f.row(i) = feats.row(order[static_cast<std::size_t>(start + i)]);
    }
    sum += distance_correlation<Real>(x, f);
    ++batches;
  }
  return batches ? sum / batches : 0.0;
}

// ---------------------------------------------------------------------------
// Sink

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "round",    "strategy", "seed",    "accuracy",  "best_accuracy", "loss_clf",     "loss_dis",
      "loss_dec", "db_train", "db_test", "mean_dcor", "exposure_eps",  "wallclock_ms"};
  return cols;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::ordered_json to_json(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["round"] = r.round;
  j["strategy"] = r.strategy;
  j["seed"] = r.seed;
  j["accuracy"] = r.accuracy;
  j["best_accuracy"] = r.best_accuracy;
  j["loss_clf"] = r.loss_clf;
  j["loss_dis"] = r.loss_dis;
  j["loss_dec"] = r.loss_dec;
  j["db_train"] = r.db_train;
  j["db_test"] = r.db_test;
  j["mean_dcor"] = r.mean_dcor;
  j["exposure_eps"] = r.exposure_eps;
  j["wallclock_ms"] = r.wallclock_ms;
  return j;
}

MetricsRecord from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.round = j.at("round").get<int>();
  r.strategy = j.at("strategy").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.best_accuracy = j.at("best_accuracy").get<double>();
  r.loss_clf = j.at("loss_clf").get<double>();
  r.loss_dis = j.at("loss_dis").get<double>();
  r.loss_dec = j.at("loss_dec").get<double>();
  r.db_train = j.at("db_train").get<double>();
  r.db_test = j.at("db_test").get<double>();
  r.mean_dcor = j.at("mean_dcor").get<double>();
  r.exposure_eps = j.at("exposure_eps").get<double>();
  r.wallclock_ms = j.at("wallclock_ms").get<double>();
  return r;
}

}  // namespace

std::string metrics_json_line(const MetricsRecord& record) { return to_json(record).dump(); }

MetricsSink::MetricsSink(const std::string& csv_path, const std::string& jsonl_path)
    : csv_(csv_path, std::ios::trunc), jsonl_(jsonl_path, std::ios::trunc), csv_path_(csv_path) {
  if (!csv_) throw IoError("cannot open metrics file '" + csv_path + "'");
  if (!jsonl_) throw IoError("cannot open metrics file '" + jsonl_path + "'");
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) csv_ << (i ? "," : "") << cols[i];
  csv_ << '\n';
  csv_.flush();
  if (!csv_) throw IoError("failed writing '" + csv_path + "'");
}

void MetricsSink::write(const MetricsRecord& r) {
  csv_ << r.round << ',' << r.strategy << ',' << r.seed << ',' << fmt_double(r.accuracy) << ','
       << fmt_double(r.best_accuracy) << ',' << fmt_double(r.loss_clf) << ','
       << fmt_double(r.loss_dis) << ',' << fmt_double(r.loss_dec) << ','
       << fmt_double(r.db_train) << ',' << fmt_double(r.db_test) << ','
       << fmt_double(r.mean_dcor) << ',' << fmt_double(r.exposure_eps) << ','
       << fmt_double(r.wallclock_ms) << '\n';
  jsonl_ << metrics_json_line(r) << '\n';
  csv_.flush();
  jsonl_.flush();
  if (!csv_ || !jsonl_) throw IoError("failed writing metrics for '" + csv_path_ + "'");
}

std::vector<MetricsRecord> read_metrics_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what());
    }
  }
  return out;
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<MetricsRecord> out;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != metrics_columns().size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": wrong column count");
    try {
      MetricsRecord r;
      r.round = std::stoi(cells[0]);
      r.strategy = cells[1];
      r.seed = std::stoull(cells[2]);
      double* fields[] = {&r.accuracy, &r.best_accuracy, &r.loss_clf,  &r.loss_dis,
                          &r.loss_dec, &r.db_train,      &r.db_test,   &r.mean_dcor,
                          &r.exposure_eps, &r.wallclock_ms};
      for (std::size_t i = 0; i < std::size(fields); ++i) *fields[i] = std::stod(cells[3 + i]);
      out.push_back(r);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed metrics row");
    }
  }
  return out;
}

}  // namespace flea
