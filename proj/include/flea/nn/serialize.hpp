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

#include "flea/fed/federation.hpp"
#include "flea/nn/model.hpp"

#include "json.hpp"

#include <span>
#include <string>
#include <vector>

namespace flea {

/// Flat little-endian fp64 array on disk, no header.
void write_f64(const std::string& path, std::span<const double> values);
std::vector<double> read_f64(const std::string& path);

/// Layer shapes, activations and split index; parameters live in the
/// companion .bin file in layer order (weight column-major, then bias).
nlohmann::json model_shape_json(const ModelParams<Real>& model);
ModelParams<Real> model_from_json(const nlohmann::json& shape, std::span<const double> flat);

/// Writes <stem>.json and <stem>.bin.
void save_model(const ModelParams<Real>& model, const std::string& stem);
ModelParams<Real> load_model(const std::string& stem);

/// One directory per completed round: manifest.json plus flat fp64 arrays
/// for the global model, the feature buffer, the exposure matrix and the
/// shared pool when present.
void save_checkpoint(const RoundState& state, const std::string& dir,
                     const nlohmann::json& extra = nlohmann::json::object());
RoundState load_checkpoint(const std::string& dir);

}  // namespace flea
