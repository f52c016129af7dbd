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

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace flea {

template <class Scalar, int Rows = Eigen::Dynamic, int Cols = Eigen::Dynamic>
using Mat = Eigen::Matrix<Scalar, Rows, Cols>;

template <class Scalar, int Rows = Eigen::Dynamic>
using Vec = Eigen::Matrix<Scalar, Rows, 1>;

using Real = double;
using MatrixXr = Mat<Real>;
using VectorXr = Vec<Real>;
using IndexVector = Eigen::Matrix<int, Eigen::Dynamic, 1>;

// Error taxonomy. Every failure raised by the library derives from Error so
// callers (the experiment driver in particular) can catch at one place.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct PartitionError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct AggregationError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

inline std::string dims_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace flea
