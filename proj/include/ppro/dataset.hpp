#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ppro/graph.hpp"
#include "ppro/node_data.hpp"
#include "ppro/rng.hpp"

namespace ppro {

struct DatasetBundle {
  std::string name;
  std::string provenance;
  Graph graph;
  NodeFeatures features;
  Labels labels;
  SplitMasks masks;

  /// Throws InputError if any component is invalid or sizes disagree.
  void validate() const;
};

enum class SplitProtocol {
  Planetoid,  // 20 train nodes per class, then 500 validation and 1000 test nodes
  Random,     // 60 / 20 / 20 per class
};

std::string_view to_string(SplitProtocol p);
SplitProtocol parse_split_protocol(std::string_view text);

/// Per-class training picks followed by validation and test draws from the
/// shuffled remainder; sizes are capped by what is left.
SplitMasks planetoid_split(const Labels& labels, Rng& rng, std::size_t per_class = 20, std::size_t val = 500,
                           std::size_t test = 1000);
/// Per-class shuffled fractions; test takes whatever train and val leave.
SplitMasks random_split(const Labels& labels, Rng& rng, double train_fraction = 0.6, double val_fraction = 0.2);

/// Directory layout:
///   edges.tsv     one `src<TAB>dst` pair per line, `#` comments allowed
///   features.csv  one comma-separated row per node
///   labels.tsv    one integer class id per line
///   masks.tsv     optional; per node `train<TAB>val<TAB>test` as 0/1
/// Without masks.tsv the split is generated with `protocol` from `split_seed`.
DatasetBundle load_dataset(const std::filesystem::path& dir, SplitProtocol protocol = SplitProtocol::Planetoid,
                           std::uint64_t split_seed = 0);
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

struct SbmSpec {
  std::size_t n = 400;
  std::size_t blocks = 4;
  double p_in = 0.05;
  double p_out = 0.005;
  std::size_t dim = 32;
  /// Norm of each block's feature mean; features add unit Gaussian noise.
  double separation = 2.0;
  /// Fraction of nodes whose features carry their block mean (the rest are noise only).
  double informative = 1.0;
  std::size_t labels_per_class = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stochastic block model with contiguous equal blocks; labels are block ids.
/// Train takes `labels_per_class` per block; the rest splits evenly into
/// validation and test.
DatasetBundle generate_sbm(const SbmSpec& spec);

/// Fraction of edges whose endpoints share a label.
double edge_homophily(const Graph& g, const Labels& labels);

}  // namespace ppro
