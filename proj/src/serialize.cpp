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
#include "flea/nn/serialize.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace flea {

namespace fs = std::filesystem;

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffU) << (8 * (7 - i));
  return r;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<double> to_vector(const MatrixXr& m) {
  // Row-major so that each record/sample is contiguous on disk.
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return v;
}

MatrixXr from_vector(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols,
                     const std::string& what) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw ParseError(what + ": expected " + std::to_string(rows * cols) + " values, found " +
                     std::to_string(v.size()));
  MatrixXr m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace

void write_f64(const std::string& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (double v : values) {
    const auto bits = to_little(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<double> read_f64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<double> out;
  std::uint64_t bits = 0;
  while (in.read(reinterpret_cast<char*>(&bits), sizeof bits))
    out.push_back(std::bit_cast<double>(to_little(bits)));
  if (in.gcount() != 0) throw ParseError(path + ": trailing bytes, not a fp64 array");
  return out;
}

nlohmann::json model_shape_json(const ModelParams<Real>& model) {
  nlohmann::json j;
  j["format"] = "f64le";
  j["split_index"] = model.split_index();
  j["num_parameters"] = model.num_parameters();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : model.layers())
    layers.push_back({{"in", l.in_width()}, {"out", l.out_width()}, {"activation", to_string(l.activation)}});
  return j;
}

ModelParams<Real> model_from_json(const nlohmann::json& shape, std::span<const double> flat) {
  try {
    std::vector<DenseLayer<Real>> layers;
    for (const auto& l : shape.at("layers")) {
      DenseLayer<Real> d;
      d.weight = MatrixXr::Zero(l.at("out").get<int>(), l.at("in").get<int>());
      d.bias = VectorXr::Zero(l.at("out").get<int>());
      d.activation = activation_from_string(l.at("activation").get<std::string>());
      layers.push_back(std::move(d));
    }
    ModelParams<Real> model(std::move(layers), shape.at("split_index").get<int>());
    model.assign_flat(Eigen::Map<const VectorXr>(flat.data(), static_cast<Eigen::Index>(flat.size())));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model header: ") + e.what());
  }
}

void save_model(const ModelParams<Real>& model, const std::string& stem) {
  write_json(stem + ".json", model_shape_json(model));
  const VectorXr flat = model.to_flat();
  write_f64(stem + ".bin", std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())));
}

ModelParams<Real> load_model(const std::string& stem) {
  const auto flat = read_f64(stem + ".bin");
  return model_from_json(read_json(stem + ".json"), flat);
}

void save_checkpoint(const RoundState& state, const std::string& dir, const nlohmann::json& extra) {
  fs::create_directories(dir);
  const fs::path d(dir);
  nlohmann::json j;
  j["next_round"] = state.round;
  j["extra"] = extra;
  save_model(state.global, (d / "model").string());

  const auto& buf = state.buffer;
  nlohmann::json jb;
  jb["round"] = buf.round;
  jb["count"] = buf.records.size();
  jb["contributors"] = buf.contributors;
  std::vector<int> origins;
  for (const auto& r : buf.records) origins.push_back(r.origin_client);
  jb["origin_clients"] = origins;
  if (!buf.empty()) {
    const auto stacked = buf.stacked();
    jb["width"] = stacked.features.cols();
    jb["classes"] = stacked.labels.cols();
    write_f64((d / "buffer_features.bin").string(), to_vector(stacked.features));
    write_f64((d / "buffer_labels.bin").string(), to_vector(stacked.labels));
  }
  j["buffer"] = jb;

  const int k = state.exposure.num_clients();
  std::vector<double> xi(state.exposure.bits().begin(), state.exposure.bits().end());
  write_f64((d / "exposure.bin").string(), xi);
  j["exposure"] = {{"num_clients", k}, {"eps", exposure_eps(state.exposure)}};

  if (state.pool) {
    j["pool"] = {{"kind", state.pool->kind == SharedPool::Kind::kRawData ? "raw_data" : "batch_averages"},
                 {"rows", state.pool->samples.rows()},
                 {"dims", state.pool->samples.cols()},
                 {"classes", state.pool->labels.cols()}};
    write_f64((d / "pool_samples.bin").string(), to_vector(state.pool->samples));
    write_f64((d / "pool_labels.bin").string(), to_vector(state.pool->labels));
  }
  write_json((d / "manifest.json").string(), j);
}

RoundState load_checkpoint(const std::string& dir) {
  const fs::path d(dir);
  const auto j = read_json((d / "manifest.json").string());
  RoundState s;
  try {
    s.round = j.at("next_round").get<int>();
    s.global = load_model((d / "model").string());

    const auto& jb = j.at("buffer");
    s.buffer.round = jb.at("round").get<int>();
    s.buffer.contributors = jb.at("contributors").get<std::vector<int>>();
    const auto origins = jb.at("origin_clients").get<std::vector<int>>();
    if (!origins.empty()) {
      const auto n = static_cast<Eigen::Index>(origins.size());
      const auto feats = from_vector(read_f64((d / "buffer_features.bin").string()), n,
                                     jb.at("width").get<Eigen::Index>(), "buffer features");
      const auto labels = from_vector(read_f64((d / "buffer_labels.bin").string()), n,
                                      jb.at("classes").get<Eigen::Index>(), "buffer labels");
      for (Eigen::Index i = 0; i < n; ++i)
        s.buffer.records.push_back({feats.row(i).transpose(), labels.row(i).transpose(),
                                    origins[static_cast<std::size_t>(i)]});
    }

    const int k = j.at("exposure").at("num_clients").get<int>();
    const auto xi = read_f64((d / "exposure.bin").string());
    std::vector<std::uint8_t> bits;
    for (double v : xi) bits.push_back(v != 0.0 ? 1 : 0);
    s.exposure = ExposureMatrix::from_bits(k, std::move(bits));

    if (j.contains("pool")) {
      const auto& jp = j.at("pool");
      SharedPool pool;
      pool.kind = jp.at("kind").get<std::string>() == "raw_data" ? SharedPool::Kind::kRawData
                                                                 : SharedPool::Kind::kBatchAverages;
      const auto rows = jp.at("rows").get<Eigen::Index>();
      pool.samples = from_vector(read_f64((d / "pool_samples.bin").string()), rows,
                                 jp.at("dims").get<Eigen::Index>(), "pool samples");
      pool.labels = from_vector(read_f64((d / "pool_labels.bin").string()), rows,
                                jp.at("classes").get<Eigen::Index>(), "pool labels");
      s.pool = std::move(pool);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(dir + "/manifest.json: " + e.what());
  }
  return s;
}

}  // namespace flea
