#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppro/dataset.hpp"
#include "ppro/trainer.hpp"

namespace ppro {

/// Flat `key = value` experiment description. See README for the key list.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string dataset = "sbm";  // "sbm" or a dataset directory
  SbmSpec sbm;
  SplitProtocol split = SplitProtocol::Planetoid;
  std::uint64_t split_seed = 0;
  bool plain = false;  // strategy = none: fixed-depth backbone without controllers
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0};
  bool depth_sweep = false;
  std::vector<int> depths{2, 4, 8, 16, 32, 64};
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;  // in file order
  std::size_t budget = 0;
  std::filesystem::path base_dir;  // relative dataset paths resolve against this

  bool uses_sbm() const { return dataset == "sbm"; }
};

/// Sets one key; throws InputError for unknown keys or malformed values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
ExperimentConfig parse_experiment_config(std::istream& in, const std::string& source);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

/// `PPRO_OUTPUT` if set, otherwise `ppro_out`.
std::filesystem::path output_root();

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (0 for a single value)
  std::size_t count = 0;
};
Aggregate aggregate(std::span<const double> values);

/// Dataset for run `index`: the random split protocol draws a fresh split
/// from split_seed + index when the directory ships no masks.
DatasetBundle experiment_dataset(const ExperimentConfig& config, std::size_t index = 0);
/// TrainConfig with in_dim / classes filled from the bundle.
TrainConfig experiment_train_config(const ExperimentConfig& config, const DatasetBundle& bundle, std::uint64_t seed);

struct ExperimentResult {
  std::filesystem::path dir;
  std::vector<TrainReport> runs;
  Aggregate test;
  std::vector<std::pair<int, Aggregate>> sweep;  // depth-sweep rows (steps, test accuracy)
};

/// Trains every seed (and every depth in sweep mode) and writes, under
/// out_root/name: run_<seed>.csv, run_<seed>.summary.txt, run_<seed>.ckpt,
/// run_<seed>.nodes.tsv, priority.tsv, graph.dot, summary.txt and, in sweep
/// mode, depth_sweep.csv. A `FAILED` marker is written if a run throws;
/// files from completed runs are kept.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_root);

/// Grid search over the `grid.*` keys on the first seed, ranked by
/// validation accuracy; writes leaderboard.csv and reruns the winner over
/// all seeds into the `best/` subdirectory.
ExperimentResult run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_root);

/// `node_id<TAB>degree<TAB>eigcen<TAB>hetero`
void write_priority_tsv(std::ostream& out, const PriorityFeatures& priority);
/// `node_id<TAB>weight<TAB>step`
void write_nodes_tsv(std::ostream& out, std::span<const double> weight, std::span<const std::int32_t> depth);
/// Undirected DOT graph with label / weight / step node attributes.
void write_graph_dot(std::ostream& out, const Graph& g, const Labels& labels, std::span<const double> weight,
                     std::span<const std::int32_t> depth);

/// Loads a checkpoint into a trainer built from `config` (first seed) and
/// writes priority.tsv, nodes.tsv and graph.dot into `out_dir`.
void export_priority(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& out_dir);

}  // namespace ppro
