#include "ppro/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ppro/error.hpp"

namespace fs = std::filesystem;

namespace ppro {

void DatasetBundle::validate() const {
  const std::size_t n = graph.num_nodes();
  if (features.num_nodes() != n) throw InputError(name + ": feature rows differ from node count");
  if (features.dim() < 1) throw InputError(name + ": features need at least one column");
  for (float v : features.values())
    if (!std::isfinite(v)) throw InputError(name + ": non-finite feature value");
  if (labels.size() != n) throw InputError(name + ": label count differs from node count");
  labels.validate();
  masks.validate(n);
}

std::string_view to_string(SplitProtocol p) { return p == SplitProtocol::Planetoid ? "planetoid" : "random"; }

SplitProtocol parse_split_protocol(std::string_view text) {
  if (text == "planetoid") return SplitProtocol::Planetoid;
  if (text == "random") return SplitProtocol::Random;
  throw InputError("unknown split protocol '" + std::string(text) + "' (expected planetoid or random)");
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<std::vector<std::size_t>> nodes_by_class(const Labels& labels) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(labels.num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels.y[i])].push_back(i);
  return out;
}

[[noreturn]] void fail_at(const fs::path& file, std::size_t line, const std::string& why) {
  throw InputError(file.string() + ":" + std::to_string(line) + ": " + why);
}

std::ifstream open_input(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("missing or unreadable file " + file.string());
  return in;
}

}  // namespace

SplitMasks planetoid_split(const Labels& labels, Rng& rng, std::size_t per_class, std::size_t val,
                           std::size_t test) {
  const std::size_t n = labels.size();
  SplitMasks m = SplitMasks::empty(n);
  for (auto& members : nodes_by_class(labels)) {
    shuffle(members, rng);
    for (std::size_t k = 0; k < std::min(per_class, members.size()); ++k) m.train[members[k]] = 1;
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i)
    if (!m.train[i]) rest.push_back(i);
  shuffle(rest, rng);
  const std::size_t nv = std::min(val, rest.size());
  const std::size_t nt = std::min(test, rest.size() - nv);
  for (std::size_t k = 0; k < nv; ++k) m.val[rest[k]] = 1;
  for (std::size_t k = nv; k < nv + nt; ++k) m.test[rest[k]] = 1;
  return m;
}

SplitMasks random_split(const Labels& labels, Rng& rng, double train_fraction, double val_fraction) {
  PPRO_EXPECT(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction <= 1.0,
              "random_split: fractions must be positive and sum to at most 1");
  SplitMasks m = SplitMasks::empty(labels.size());
  for (auto& members : nodes_by_class(labels)) {
    shuffle(members, rng);
    const auto c = static_cast<double>(members.size());
    const auto nt = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(train_fraction * c)));
    const auto nv = std::min(members.size() - std::min(nt, members.size()),
                             static_cast<std::size_t>(std::round(val_fraction * c)));
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k < nt)
        m.train[members[k]] = 1;
      else if (k < nt + nv)
        m.val[members[k]] = 1;
      else
        m.test[members[k]] = 1;
    }
  }
  return m;
}

DatasetBundle load_dataset(const fs::path& dir, SplitProtocol protocol, std::uint64_t split_seed) {
  if (!fs::is_directory(dir)) throw InputError("dataset directory not found: " + dir.string());
  DatasetBundle b;
  b.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();

  // features.csv
  {
    const fs::path file = dir / "features.csv";
    auto in = open_input(file);
    std::vector<float> data;
    std::size_t dim = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) fail_at(file, line_no, "empty feature row");
      std::size_t cols = 0;
      std::size_t pos = 0;
      while (true) {
        const std::size_t comma = line.find(',', pos);
        const std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        char* end = nullptr;
        const float v = std::strtof(cell.c_str(), &end);
        if (cell.empty() || end == cell.c_str() || *end != '\0') fail_at(file, line_no, "bad number '" + cell + "'");
        if (!std::isfinite(v)) fail_at(file, line_no, "non-finite feature value");
        data.push_back(v);
        ++cols;
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (rows == 0) dim = cols;
      if (cols != dim) {
        fail_at(file, line_no, "ragged row: " + std::to_string(cols) + " values, expected " + std::to_string(dim));
      }
      ++rows;
    }
    if (rows == 0) throw InputError(file.string() + ": no feature rows");
    b.features = NodeFeatures(rows, dim, std::move(data));
  }
  const std::size_t n = b.features.num_nodes();

  // labels.tsv
  {
    const fs::path file = dir / "labels.tsv";
    auto in = open_input(file);
    std::string line;
    std::size_t line_no = 0;
    std::int32_t max_label = -1;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream fields(line);
      long long y = 0;
      std::string rest;
      if (!(fields >> y) || (fields >> rest)) fail_at(file, line_no, "expected one integer label");
      if (y < 0 || y > INT32_MAX) fail_at(file, line_no, "label out of range");
      b.labels.y.push_back(static_cast<std::int32_t>(y));
      max_label = std::max(max_label, static_cast<std::int32_t>(y));
    }
    if (b.labels.size() != n)
      throw InputError(file.string() + ": " + std::to_string(b.labels.size()) + " labels for " + std::to_string(n) +
                       " feature rows");
    b.labels.num_classes = max_label + 1;
    b.labels.validate();
  }

  // edges.tsv
  {
    const fs::path file = dir / "edges.tsv";
    auto in = open_input(file);
    b.graph = read_graph(in, n, file.string());
  }

  // masks.tsv
  const fs::path mask_file = dir / "masks.tsv";
  if (fs::exists(mask_file)) {
    auto in = open_input(mask_file);
    b.masks = SplitMasks::empty(0);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream fields(line);
      int t = 0, v = 0, s = 0;
      std::string rest;
      if (!(fields >> t >> v >> s) || (fields >> rest)) fail_at(mask_file, line_no, "expected three 0/1 columns");
      for (int x : {t, v, s})
        if (x != 0 && x != 1) fail_at(mask_file, line_no, "mask values must be 0 or 1");
      b.masks.train.push_back(static_cast<std::uint8_t>(t));
      b.masks.val.push_back(static_cast<std::uint8_t>(v));
      b.masks.test.push_back(static_cast<std::uint8_t>(s));
    }
    if (b.masks.train.size() != n)
      throw InputError(mask_file.string() + ": " + std::to_string(b.masks.train.size()) + " rows for " +
                       std::to_string(n) + " nodes");
    b.provenance = "loaded from " + dir.string() + " with its masks.tsv split";
  } else {
    Rng rng(split_seed);
    b.masks = protocol == SplitProtocol::Planetoid ? planetoid_split(b.labels, rng) : random_split(b.labels, rng);
    b.provenance = "loaded from " + dir.string() + "; " + std::string(to_string(protocol)) +
                   " split regenerated with seed " + std::to_string(split_seed) +
                   " (not the historical fixed split)";
  }
  b.validate();
  return b;
}

void save_dataset(const DatasetBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("edges.tsv");
    write_edge_list(out, bundle.graph);
  }
  {
    auto out = open("features.csv");
    out << std::setprecision(9);
    for (std::size_t i = 0; i < bundle.features.num_nodes(); ++i) {
      auto row = bundle.features.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
      out << '\n';
    }
  }
  {
    auto out = open("labels.tsv");
    for (auto y : bundle.labels.y) out << y << '\n';
  }
  {
    auto out = open("masks.tsv");
    for (std::size_t i = 0; i < bundle.masks.train.size(); ++i)
      out << int(bundle.masks.train[i]) << '\t' << int(bundle.masks.val[i]) << '\t' << int(bundle.masks.test[i])
          << '\n';
  }
}

// ---------------------------------------------------------------- SBM

void SbmSpec::validate() const {
  PPRO_EXPECT(n >= blocks && blocks >= 1, "sbm: need at least one node per block");
  PPRO_EXPECT(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0, "sbm: probabilities must lie in [0, 1]");
  PPRO_EXPECT(dim >= 1, "sbm: feature dimension must be >= 1");
  PPRO_EXPECT(informative >= 0.0 && informative <= 1.0, "sbm: informative fraction must lie in [0, 1]");
  PPRO_EXPECT(labels_per_class >= 1, "sbm: labels_per_class must be >= 1");
}

DatasetBundle generate_sbm(const SbmSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  Rng edge_rng = root.derive(1);
  Rng feature_rng = root.derive(2);
  Rng split_rng = root.derive(3);

  const std::size_t n = spec.n;
  Labels labels;
  labels.num_classes = static_cast<std::int32_t>(spec.blocks);
  labels.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) labels.y[i] = static_cast<std::int32_t>(i * spec.blocks / n);

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = labels.y[i] == labels.y[j] ? spec.p_in : spec.p_out;
      if (edge_rng.uniform() < p) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }

  Matrix means(spec.blocks, spec.dim);
  for (std::size_t b = 0; b < spec.blocks; ++b) {
    auto row = means.row(b);
    double norm = 0.0;
    for (auto& v : row) {
      v = feature_rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : row) v *= spec.separation / norm;
  }
  NodeFeatures features(n, spec.dim);
  std::size_t noise_only = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool informative = feature_rng.uniform() < spec.informative;
    noise_only += informative ? 0 : 1;
    auto mean = means.row(static_cast<std::size_t>(labels.y[i]));
    for (std::size_t j = 0; j < spec.dim; ++j)
      features(i, j) = static_cast<float>((informative ? mean[j] : 0.0) + feature_rng.normal());
  }

  SplitMasks masks = SplitMasks::empty(n);
  std::vector<std::vector<std::size_t>> members(spec.blocks);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels.y[i])].push_back(i);
  std::vector<std::size_t> rest;
  for (auto& m : members) {
    shuffle(m, split_rng);
    for (std::size_t k = 0; k < m.size(); ++k) (k < spec.labels_per_class ? masks.train[m[k]] : masks.val[m[k]]) = 1;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (masks.val[i]) rest.push_back(i);
  shuffle(rest, split_rng);
  for (std::size_t k = 0; k < rest.size(); ++k)
    if (k % 2 == 1) {
      masks.val[rest[k]] = 0;
      masks.test[rest[k]] = 1;
    }

  DatasetBundle b;
  b.graph = build_graph(edges, n);
  b.features = std::move(features);
  b.labels = std::move(labels);
  b.masks = std::move(masks);
  std::ostringstream name;
  name << "sbm_n" << n << "_b" << spec.blocks << "_s" << spec.seed;
  b.name = name.str();

  std::ostringstream prov;
  prov << "stochastic block model n=" << n << " blocks=" << spec.blocks << " p_in=" << spec.p_in
       << " p_out=" << spec.p_out << " dim=" << spec.dim << " separation=" << spec.separation
       << " informative=" << spec.informative << " seed=" << spec.seed;
  std::size_t isolated = 0;
  for (std::size_t i = 0; i < n; ++i) isolated += b.graph.degree(static_cast<NodeId>(i)) == 0 ? 1 : 0;
  if (isolated > 0) prov << "; " << isolated << " isolated node(s)";
  if (noise_only > 0) prov << "; " << noise_only << " node(s) with noise-only features";
  b.provenance = prov.str();
  b.validate();
  return b;
}

double edge_homophily(const Graph& g, const Labels& labels) {
  const auto edges = g.edges();
  if (edges.empty()) return 0.0;
  std::size_t same = 0;
  for (auto [u, v] : edges) same += labels.y[static_cast<std::size_t>(u)] == labels.y[static_cast<std::size_t>(v)];
  return static_cast<double>(same) / static_cast<double>(edges.size());
}

}  // namespace ppro
