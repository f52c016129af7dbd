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
#include "flea/data/dataset.hpp"

#include "flea/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <set>
#include <sstream>

namespace flea {

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows())
    throw ShapeError("dataset: " + std::to_string(inputs.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  if (!context_flags.empty() && static_cast<Eigen::Index>(context_flags.size()) != inputs.rows())
    throw ShapeError("dataset: context flag count does not match rows");
  if (num_classes < 1) throw ShapeError("dataset: no classes");
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes)
      throw ShapeError("dataset: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < num_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw ShapeError("dataset: class " + std::to_string(c) + " has no samples");
}

MatrixXr Dataset::rows(const std::vector<int>& idx) const {
  MatrixXr out(static_cast<Eigen::Index>(idx.size()), inputs.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = inputs.row(idx[i]);
  return out;
}

MatrixXr one_hot(const std::vector<int>& labels, int num_classes) {
  MatrixXr out = MatrixXr::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return out;
}

MatrixXr Dataset::one_hot(const std::vector<int>& idx) const {
  return flea::one_hot(labels_of(idx), num_classes);
}

std::vector<int> Dataset::labels_of(const std::vector<int>& idx) const {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(labels[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<int> Dataset::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

// ---------------------------------------------------------------------------
// Synthetic mixture

Dataset gen_gaussian_mixture(const MixtureSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2) throw ConfigError("mixture needs at least 2 classes");
  if (spec.dims < 2) throw ConfigError("mixture needs at least 2 dimensions");
  if (spec.per_class < 1) throw ConfigError("mixture needs at least 1 sample per class");
  if (!(spec.spread >= 0.0)) throw ConfigError("mixture spread must be >= 0");

  const int c_count = spec.num_classes;
  MatrixXr means = MatrixXr::Zero(c_count, spec.dims);
  for (int c = 0; c < c_count; ++c) {
    if (c_count <= spec.dims) {
      means(c, c) = spec.separation;
    } else {
      const double angle = 2.0 * std::numbers::pi * c / c_count;
      means(c, 0) = spec.separation * std::cos(angle);
      means(c, 1) = spec.separation * std::sin(angle);
    }
  }

  Dataset ds;
  ds.num_classes = c_count;
  ds.inputs.resize(static_cast<Eigen::Index>(c_count) * spec.per_class, spec.dims);
  ds.labels.reserve(static_cast<std::size_t>(ds.inputs.rows()));
  Rng rng = make_rng(seed, {tag(Stream::kData)});
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::Index row = 0;
  for (int c = 0; c < c_count; ++c) {
    for (int i = 0; i < spec.per_class; ++i, ++row) {
      for (int d = 0; d < spec.dims; ++d) {
        const double z = noise(rng);
        ds.inputs(row, d) = means(c, d) + spec.spread * z;
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Partitioning

std::string to_string(PartitionMode m) {
  switch (m) {
    case PartitionMode::kIid: return "iid";
    case PartitionMode::kQuantity: return "qua";
    case PartitionMode::kDirichlet: return "dir";
  }
  return "iid";
}

PartitionMode partition_mode_from_string(const std::string& s) {
  if (s == "iid") return PartitionMode::kIid;
  if (s == "qua") return PartitionMode::kQuantity;
  if (s == "dir") return PartitionMode::kDirichlet;
  throw ConfigError("unknown partition mode '" + s + "' (expected iid, qua or dir)");
}

void PartitionSpec::validate(int num_classes, Eigen::Index dataset_size) const {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (mean_size < 1) throw ConfigError("mean_client_size must be >= 1");
  if (mode == PartitionMode::kQuantity && (q < 1 || q > num_classes))
    throw ConfigError("q must lie in [1, " + std::to_string(num_classes) + "], got " +
                      std::to_string(q));
  if (mode == PartitionMode::kDirichlet && !(mu > 0.0))
    throw ConfigError("Dirichlet mu must be > 0");
  if (static_cast<Eigen::Index>(num_clients) * mean_size > dataset_size)
    throw ConfigError("num_clients * mean_client_size = " +
                      std::to_string(static_cast<long>(num_clients) * mean_size) +
                      " exceeds the training set size " + std::to_string(dataset_size));
}

std::string PartitionSpec::label() const {
  std::ostringstream os;
  switch (mode) {
    case PartitionMode::kIid: os << "iid"; break;
    case PartitionMode::kQuantity: os << "qua" << q; break;
    case PartitionMode::kDirichlet: os << "dir" << mu; break;
  }
  return os.str();
}

namespace {

std::vector<std::vector<int>> shuffled_class_pools(const Dataset& ds, Rng& rng) {
  std::vector<std::vector<int>> pools(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    pools[static_cast<std::size_t>(ds.labels[i])].push_back(static_cast<int>(i));
  for (auto& p : pools) std::shuffle(p.begin(), p.end(), rng);
  return pools;
}

// Integer quotas summing to `total` proportional to `weights`.
std::vector<int> largest_remainder(const std::vector<double>& weights, int total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> out(weights.size(), 0);
  if (sum <= 0.0 || total <= 0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    out[i] = static_cast<int>(std::floor(exact));
    assigned += out[i];
    rem.emplace_back(exact - out[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < rem.size(); ++k, ++assigned) ++out[rem[k].second];
  return out;
}

// quotas[client][class] -> index lists, dealing each class pool in client order.
std::vector<ClientDataset> deal(const std::vector<std::vector<int>>& quotas,
                                const std::vector<std::vector<int>>& pools) {
  const std::size_t k_count = quotas.size();
  std::vector<ClientDataset> clients(k_count);
  std::vector<std::size_t> cursor(pools.size(), 0);
  for (std::size_t k = 0; k < k_count; ++k) {
    clients[k].client_id = static_cast<int>(k);
    for (std::size_t c = 0; c < pools.size(); ++c) {
      for (int j = 0; j < quotas[k][c]; ++j) clients[k].indices.push_back(pools[c][cursor[c]++]);
    }
    std::sort(clients[k].indices.begin(), clients[k].indices.end());
  }
  return clients;
}

void check_inventory(const std::vector<std::vector<int>>& quotas,
                     const std::vector<std::vector<int>>& pools) {
  for (std::size_t c = 0; c < pools.size(); ++c) {
    long demand = 0;
    for (const auto& q : quotas) demand += q[c];
    if (demand > static_cast<long>(pools[c].size()))
      throw PartitionError("class " + std::to_string(c) + " exhausted: clients need " +
                           std::to_string(demand) + " samples, only " +
                           std::to_string(pools[c].size()) + " available");
  }
}

std::vector<ClientDataset> partition_iid(const Dataset& ds, const PartitionSpec& spec, Rng& rng) {
  const auto pools = shuffled_class_pools(ds, rng);
  const long total = static_cast<long>(spec.num_clients) * spec.mean_size;
  std::vector<double> sizes;
  for (const auto& p : pools) sizes.push_back(static_cast<double>(p.size()));
  const auto per_class = largest_remainder(sizes, static_cast<int>(total));
  // Concatenate the class-wise takes and deal round-robin: every client gets
  // an equal share (+-1) of each class.
  std::vector<std::vector<int>> quotas(static_cast<std::size_t>(spec.num_clients),
                                       std::vector<int>(pools.size(), 0));
  long counter = 0;
  for (std::size_t c = 0; c < pools.size(); ++c)
    for (int j = 0; j < per_class[c]; ++j, ++counter)
      ++quotas[static_cast<std::size_t>(counter % spec.num_clients)][c];
  check_inventory(quotas, pools);
  return deal(quotas, pools);
}

std::vector<ClientDataset> partition_quantity(const Dataset& ds, const PartitionSpec& spec,
                                              Rng& rng) {
  const int c_count = ds.num_classes;
  const auto pools = shuffled_class_pools(ds, rng);
  const auto class_order = permutation(c_count, rng);
  // Window starts rotate through the classes so each class is owned by
  // (almost) the same number of clients; the client -> window map is shuffled.
  std::vector<int> starts(static_cast<std::size_t>(spec.num_clients));
  for (int k = 0; k < spec.num_clients; ++k) starts[static_cast<std::size_t>(k)] = k % c_count;
  std::shuffle(starts.begin(), starts.end(), rng);

  std::vector<std::vector<int>> quotas(static_cast<std::size_t>(spec.num_clients),
                                       std::vector<int>(static_cast<std::size_t>(c_count), 0));
  for (int k = 0; k < spec.num_clients; ++k) {
    const int base = spec.mean_size / spec.q;
    const int extra = spec.mean_size % spec.q;
    for (int j = 0; j < spec.q; ++j) {
      const int c = class_order[static_cast<std::size_t>((starts[static_cast<std::size_t>(k)] + j) % c_count)];
      quotas[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = base + (j < extra ? 1 : 0);
    }
  }
  check_inventory(quotas, pools);
  return deal(quotas, pools);
}

std::vector<ClientDataset> partition_dirichlet(const Dataset& ds, const PartitionSpec& spec,
                                               Rng& rng) {
  const int c_count = ds.num_classes;
  const auto k_count = static_cast<std::size_t>(spec.num_clients);
  const auto pools = shuffled_class_pools(ds, rng);
  const long total = static_cast<long>(spec.num_clients) * spec.mean_size;

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<std::vector<double>> props(k_count);
    for (auto& p : props) p = sample_dirichlet_symmetric(spec.mu, c_count, rng);

    std::vector<std::vector<int>> quotas(k_count, std::vector<int>(static_cast<std::size_t>(c_count), 0));
    std::vector<int> remaining(static_cast<std::size_t>(c_count));
    for (int c = 0; c < c_count; ++c) {
      std::vector<double> want(k_count);
      double demand = 0.0;
      for (std::size_t k = 0; k < k_count; ++k) {
        want[k] = spec.mean_size * props[k][static_cast<std::size_t>(c)];
        demand += want[k];
      }
      const int inventory = static_cast<int>(pools[static_cast<std::size_t>(c)].size());
      const int allot = std::min(inventory, static_cast<int>(std::lround(demand)));
      const auto split = largest_remainder(want, allot);
      for (std::size_t k = 0; k < k_count; ++k) quotas[k][static_cast<std::size_t>(c)] = split[k];
      remaining[static_cast<std::size_t>(c)] = inventory - allot;
    }

    std::vector<long> sizes(k_count, 0);
    long assigned = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      sizes[k] = std::accumulate(quotas[k].begin(), quotas[k].end(), 0L);
      assigned += sizes[k];
    }
    // Top up the smallest clients, each with its most preferred class that
    // still has samples left.
    for (; assigned < total; ++assigned) {
      const auto k = static_cast<std::size_t>(
          std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
      int best = -1;
      for (int c = 0; c < c_count; ++c) {
        if (remaining[static_cast<std::size_t>(c)] == 0) continue;
        if (best < 0 || props[k][static_cast<std::size_t>(c)] > props[k][static_cast<std::size_t>(best)]) best = c;
      }
      if (best < 0) throw PartitionError("Dirichlet partition: every class is exhausted");
      ++quotas[k][static_cast<std::size_t>(best)];
      --remaining[static_cast<std::size_t>(best)];
      ++sizes[k];
    }
    if (std::all_of(sizes.begin(), sizes.end(), [](long s) { return s >= 1; })) {
      check_inventory(quotas, pools);
      return deal(quotas, pools);
    }
  }
  throw PartitionError("Dirichlet partition: a client stayed empty after 100 draws");
}

}  // namespace

std::vector<ClientDataset> partition(const Dataset& dataset, const PartitionSpec& spec) {
  dataset.validate();
  spec.validate(dataset.num_classes, dataset.size());
  Rng rng = make_rng(spec.seed, {tag(Stream::kPartition)});
  std::vector<ClientDataset> clients;
  switch (spec.mode) {
    case PartitionMode::kIid: clients = partition_iid(dataset, spec, rng); break;
    case PartitionMode::kQuantity: clients = partition_quantity(dataset, spec, rng); break;
    case PartitionMode::kDirichlet: clients = partition_dirichlet(dataset, spec, rng); break;
  }
  check_partition(dataset, clients);
  return clients;
}

void check_partition(const Dataset& dataset, const std::vector<ClientDataset>& clients) {
  std::vector<char> seen(static_cast<std::size_t>(dataset.size()), 0);
  for (const auto& c : clients) {
    if (c.indices.empty())
      throw PartitionError("client " + std::to_string(c.client_id) + " has no samples");
    for (int i : c.indices) {
      if (i < 0 || i >= dataset.size())
        throw PartitionError("client " + std::to_string(c.client_id) + " references row " +
                             std::to_string(i) + " outside the dataset");
      if (seen[static_cast<std::size_t>(i)]++)
        throw PartitionError("row " + std::to_string(i) + " assigned to more than one client");
    }
  }
}

std::string partition_manifest_json(const PartitionSpec& spec,
                                    const std::vector<ClientDataset>& clients) {
  nlohmann::json j;
  j["mode"] = to_string(spec.mode);
  j["q"] = spec.q;
  j["mu"] = spec.mu;
  j["num_clients"] = spec.num_clients;
  j["mean_size"] = spec.mean_size;
  j["seed"] = spec.seed;
  auto& arr = j["clients"] = nlohmann::json::array();
  for (const auto& c : clients) arr.push_back({{"client_id", c.client_id}, {"indices", c.indices}});
  return j.dump(1);
}

std::vector<ClientDataset> parse_partition_manifest(const std::string& json_text) {
  std::vector<ClientDataset> out;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& c : j.at("clients"))
      out.push_back({c.at("client_id").get<int>(), c.at("indices").get<std::vector<int>>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("partition manifest: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.find_first_not_of(" \t\r") == std::string::npos)
    throw ParseError(path + ": empty file (a header row is required)");
  const auto header = split_csv_line(line);

  int label_col = -1;
  std::vector<int> feature_cols;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == schema.label_column) label_col = static_cast<int>(i);
  if (label_col < 0) throw ParseError(path + ": no label column '" + schema.label_column + "'");
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (static_cast<int>(i) != label_col) feature_cols.push_back(static_cast<int>(i));
  } else {
    for (const auto& name : schema.feature_columns) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw ParseError(path + ": no feature column '" + name + "'");
      feature_cols.push_back(static_cast<int>(it - header.begin()));
    }
  }
  if (feature_cols.empty()) throw ParseError(path + ": no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(feature_cols.size());
    for (int c : feature_cols) {
      const auto v = parse_double(cells[static_cast<std::size_t>(c)]);
      if (!v)
        throw FeatureTypeError(path + ":" + std::to_string(line_no) + ": column '" +
                               header[static_cast<std::size_t>(c)] + "' is not numeric ('" +
                               cells[static_cast<std::size_t>(c)] + "')");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
    raw_labels.push_back(cells[static_cast<std::size_t>(label_col)]);
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");

  // Dense re-indexing: numeric order when every label is a number.
  std::vector<std::string> uniq(raw_labels.begin(), raw_labels.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  const bool numeric = std::all_of(uniq.begin(), uniq.end(),
                                   [](const std::string& s) { return parse_double(s).has_value(); });
  if (numeric)
    std::sort(uniq.begin(), uniq.end(), [](const std::string& a, const std::string& b) {
      return *parse_double(a) < *parse_double(b);
    });
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < uniq.size(); ++i) index[uniq[i]] = static_cast<int>(i);

  Dataset ds;
  ds.num_classes = static_cast<int>(uniq.size());
  ds.inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < feature_cols.size(); ++c)
      ds.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    ds.labels.push_back(index.at(raw_labels[r]));
  }
  return ds;
}

void write_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV file '" + path + "'");
  for (Eigen::Index d = 0; d < dataset.dims(); ++d) out << 'x' << d << ',';
  out << "label\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < dataset.size(); ++r) {
    for (Eigen::Index d = 0; d < dataset.dims(); ++d) out << dataset.inputs(r, d) << ',';
    out << dataset.labels[static_cast<std::size_t>(r)] << '\n';
  }
  if (!out) throw IoError("failed writing CSV file '" + path + "'");
}

// ---------------------------------------------------------------------------
// Context marker

Dataset add_context_marker(const Dataset& dataset, const VectorXr& marker, double fraction,
                           std::uint64_t seed, int offset) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("marker fraction must be in (0, 1]");
  if (offset < 0 || offset + marker.size() > dataset.dims())
    throw ShapeError("marker window [" + std::to_string(offset) + ", " +
                     std::to_string(offset + marker.size()) + ") exceeds input width " +
                     std::to_string(dataset.dims()));
  Dataset out = dataset;
  const int n = static_cast<int>(dataset.size());
  const int count = static_cast<int>(std::lround(fraction * n));
  out.context_flags.assign(static_cast<std::size_t>(n), false);
  Rng rng = make_rng(seed, {tag(Stream::kMarker)});
  for (int r : sample_without_replacement(n, count, rng)) {
    out.inputs.row(r).segment(offset, marker.size()) += marker.transpose();
    out.context_flags[static_cast<std::size_t>(r)] = true;
  }
  return out;
}

}  // namespace flea
