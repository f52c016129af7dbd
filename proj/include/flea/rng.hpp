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

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <vector>

namespace flea {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a root seed and any number of
// coordinates (round, client id, purpose tag...). Order of coordinates matters.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(root);
  for (auto c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> coords) {
  return Rng(derive_seed(root, coords));
}

// Stream purpose tags, so draws for different jobs never alias.
enum class Stream : std::uint64_t {
  kData = 1,
  kPartition,
  kClients,
  kLocalTrain,
  kExtract,
  kMerge,
  kPool,
  kInit,
  kMarker,
  kEval,
  kProbe,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

inline std::vector<int> iota_vector(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

inline std::vector<int> permutation(int n, Rng& rng) {
  auto v = iota_vector(n);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

// k distinct values from [0, n), in draw order.
inline std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
  auto v = iota_vector(n);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(pick(rng))]);
  }
  v.resize(static_cast<std::size_t>(k));
  return v;
}

template <class Scalar>
Scalar sample_beta_symmetric(Scalar a, Rng& rng) {
  std::gamma_distribution<Scalar> gamma(a, Scalar(1));
  const Scalar g1 = gamma(rng);
  const Scalar g2 = gamma(rng);
  const Scalar s = g1 + g2;
  // Both gammas underflowing to zero only happens for tiny a; split evenly.
  return s > Scalar(0) ? g1 / s : Scalar(0.5);
}

inline std::vector<double> sample_dirichlet_symmetric(double concentration, int dims,
                                                      Rng& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> p(static_cast<std::size_t>(dims));
  double total = 0.0;
  for (auto& x : p) {
    x = gamma(rng);
    total += x;
  }
  if (total <= 0.0) {
    // Extremely small concentrations can underflow every draw: put all mass on
    // one uniformly chosen coordinate, which is the limiting distribution.
    std::fill(p.begin(), p.end(), 0.0);
    std::uniform_int_distribution<int> pick(0, dims - 1);
    p[static_cast<std::size_t>(pick(rng))] = 1.0;
    return p;
  }
  for (auto& x : p) x /= total;
  return p;
}

}  // namespace flea
