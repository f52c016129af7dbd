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
#include "flea/rng.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <string>

namespace flea::testing {

inline ModelParams<Real> random_model(std::vector<int> widths, int split, std::uint64_t seed,
                                      Activation hidden = Activation::kTanh, double bias_scale = 0.3) {
  Rng rng(seed);
  Architecture arch{std::move(widths), hidden, split};
  auto m = init_model<Real>(arch, rng);
  std::normal_distribution<double> n(0.0, bias_scale);
  for (auto& l : m.layers())
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = n(rng);
  return m;
}

inline MatrixXr random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixXr m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
  return m;
}

/// Rows are probability vectors with full support.
inline MatrixXr random_distributions(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  MatrixXr m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

/// Central differences of `f` with respect to every entry of the flattened model.
inline VectorXr numeric_gradient(const ModelParams<Real>& model,
                                 const std::function<double(const ModelParams<Real>&)>& f,
                                 double h = 1e-6) {
  const VectorXr base = model.to_flat();
  VectorXr grad(base.size());
  ModelParams<Real> probe = model;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    VectorXr p = base;
    p(i) += h;
    probe.assign_flat(p);
    const double up = f(probe);
    p(i) = base(i) - h;
    probe.assign_flat(p);
    const double down = f(probe);
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_relative_error(const VectorXr& a, const VectorXr& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("flea_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const { return (path_ / child).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace flea::testing
