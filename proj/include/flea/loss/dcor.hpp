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

#include "flea/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flea {

/// C * E * C with C = I - J/n. Rows and columns of the result sum to zero.
template <class Derived>
Mat<typename Derived::Scalar> double_center(const Eigen::MatrixBase<Derived>& e) {
  using Scalar = typename Derived::Scalar;
  if (e.rows() != e.cols())
    throw ShapeError("double_center: matrix is " + dims_str(e.rows(), e.cols()) + ", not square");
  if (e.rows() == 0) throw ShapeError("double_center: empty matrix");
  const Vec<Scalar> row_mean = e.rowwise().mean();
  const Vec<Scalar> col_mean = e.colwise().mean().transpose();
  const Scalar grand = e.mean();
  Mat<Scalar> out = e;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean.transpose();
  out.array() += grand;
  return out;
}

/// E[i,k] = ||row_i - row_k||^2.
template <class Derived>
Mat<typename Derived::Scalar> squared_distance_matrix(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.rows();
  Mat<Scalar> e(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    e(k, k) = Scalar(0);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const Scalar d = (x.row(i) - x.row(k)).squaredNorm();
      e(i, k) = d;
      e(k, i) = d;
    }
  }
  return e;
}

template <class Scalar>
struct DcorResult {
  Scalar value = 0;  // clamped to [0, 1]
  Scalar raw = 0;    // before clamping
  // dc/df, same shape as f (only filled when requested and well-defined).
  Mat<Scalar> grad_f;
};

/// Distance correlation between paired rows of `x` and `f` built on squared
/// Euclidean distance matrices:
///   c = v2(x,f) / sqrt(v2(x,x) v2(f,f)),  v2(u,w) = mean(Eu_hat .* Ew_hat).
/// Returns 0 when either batch is constant and NaN when an input is not
/// finite. Optionally differentiates c with respect to f.
template <class Scalar>
DcorResult<Scalar> distance_correlation_with_grad(const Mat<Scalar>& x, const Mat<Scalar>& f,
                                                  bool want_grad) {
  if (x.rows() != f.rows())
    throw ShapeError("distance_correlation: " + std::to_string(x.rows()) + " vs " +
                     std::to_string(f.rows()) + " rows");
  if (x.rows() < 2) throw ShapeError("distance_correlation: need at least 2 rows");
  const Eigen::Index n = x.rows();
  const Scalar n2 = static_cast<Scalar>(n * n);

  const Mat<Scalar> ex = double_center(squared_distance_matrix(x));
  const Mat<Scalar> ef = double_center(squared_distance_matrix(f));
  const Scalar v_xf = (ex.array() * ef.array()).sum() / n2;
  const Scalar v_xx = ex.squaredNorm() / n2;
  const Scalar v_ff = ef.squaredNorm() / n2;

  DcorResult<Scalar> r;
  if (want_grad) r.grad_f = Mat<Scalar>::Zero(f.rows(), f.cols());
  const Scalar denom2 = v_xx * v_ff;
  if (!std::isfinite(static_cast<double>(v_xf)) || !std::isfinite(static_cast<double>(denom2))) {
    r.value = r.raw = std::numeric_limits<Scalar>::quiet_NaN();
    return r;
  }
  if (!(denom2 > Scalar(0))) return r;
  const Scalar denom = std::sqrt(denom2);
  r.raw = v_xf / denom;
  r.value = std::clamp(r.raw, Scalar(0), Scalar(1));
  if (!want_grad) return r;

  // dc/dE_f (symmetric); centering is self-adjoint so the hats carry over.
  const Mat<Scalar> g = (ex / denom - (r.raw / v_ff) * ef) / n2;
  // E_f[i,k] = ||f_i - f_k||^2  =>  dc/df = 4 (diag(G 1) f - G f)
  const Vec<Scalar> row_sum = g.rowwise().sum();
  r.grad_f = Scalar(4) * (f.array().colwise() * row_sum.array()).matrix() - Scalar(4) * (g * f);
  return r;
}

template <class Scalar>
Scalar distance_correlation(const Mat<Scalar>& x, const Mat<Scalar>& f) {
  return distance_correlation_with_grad(x, f, false).value;
}

}  // namespace flea
