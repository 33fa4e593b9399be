#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppro/adam.hpp"
#include "ppro/backbone.hpp"
#include "ppro/controllers.hpp"
#include "ppro/graph.hpp"
#include "ppro/node_data.hpp"
#include "ppro/priority.hpp"

namespace ppro {

/// Switches for the nw / np / nz / nl ablation variants.
struct Ablation {
  bool no_weight_controller = false;       // w = 1 for every node
  bool no_propagation_controller = false;  // l = L for every node
  bool no_priority_input = false;          // zero the z slot
  bool no_depth_input = false;             // zero the l/L slot
};

struct TrainConfig {
  Strategy strategy = Strategy::Break;
  BackboneConfig backbone;
  double epsilon = 0.5;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lr = 0.01;             // backbone learning rate
  double lr_controller = 0.01;  // controller learning rate
  double weight_decay = 5e-4;   // backbone only
  int controller_hidden = 32;
  int epochs = 200;
  int patience = 100;
  std::uint64_t seed = 0;
  Ablation ablation;

  /// True when neither controller is active (plain fixed-depth backbone).
  bool plain() const { return ablation.no_weight_controller && ablation.no_propagation_controller; }
  void validate() const;
};

/// Random streams derived from TrainConfig::seed.
enum class SeedStream : std::uint64_t { BackboneInit = 1, ControllerInit = 2, Dropout = 3 };
Rng seed_stream(std::uint64_t seed, SeedStream stream);

/// Everything a trainer reads from a dataset, precomputed once and shared
/// read-only between trainer instances.
struct Problem {
  Graph graph;
  NormalizedAdjacency adjacency;
  std::shared_ptr<const Matrix> features;
  Labels labels;
  SplitMasks masks;
  PriorityFeatures priority;
  std::vector<std::size_t> train_nodes;
  std::vector<std::size_t> val_nodes;
  std::vector<std::size_t> test_nodes;

  std::size_t num_nodes() const { return graph.num_nodes(); }
};

Problem make_problem(Graph graph, const NodeFeatures& features, Labels labels, SplitMasks masks);

struct EpochStats {
  int epoch = 0;
  double loss_g = 0.0;  // reweighted supervised loss minimized by the backbone step
  double loss_p = 0.0;  // propagation-controller loss
  double loss_w = 0.0;  // weight-controller objective
  double train_acc = 0.0;
  double val_acc = 0.0;
};

/// Inference-mode outputs for every node.
struct Inference {
  Matrix logits;
  std::vector<std::int32_t> prediction;
  std::vector<std::int32_t> depth;
  std::vector<double> weight;
};

/// Owns backbone and controller parameters plus their optimizers and runs
/// the alternating updates. Single-threaded; holds a shared Problem.
class Trainer {
 public:
  Trainer(const TrainConfig& config, std::shared_ptr<const Problem> problem);

  const TrainConfig& config() const { return config_; }
  const Problem& problem() const { return *problem_; }
  Backbone& backbone() { return backbone_; }
  Controllers& controllers() { return controllers_; }
  ParameterList parameters();

  /// One iteration: backbone step with detached weights, then a controller
  /// step on a fresh dropout-free forward with the updated backbone.
  /// Accuracies are left at 0; fit fills them.
  EpochStats train_epoch();

  Inference infer();
  double accuracy(const Inference& inf, std::span<const std::size_t> nodes) const;
  double evaluate(std::span<const std::size_t> nodes);

  std::vector<Matrix> snapshot();
  void restore(const std::vector<Matrix>& values);

 private:
  struct Forward;
  struct Decisions {
    std::vector<std::int32_t> depth;  // per node (entries outside the decided rows are L)
    Matrix best;                      // h~ per node
    // L2U only: per step k, probabilities / step errors / running-best errors
    // for the decided rows, step-major.
    std::vector<Matrix> update_inputs;
  };

  Forward forward_values(Rng* dropout_rng, std::optional<std::span<const std::int32_t>> depth_bound = std::nullopt);
  Decisions decide(const std::vector<Matrix>& steps, const std::vector<Matrix>& aggregates,
                   std::span<const std::size_t> nodes) const;

  TrainConfig config_;
  std::shared_ptr<const Problem> problem_;
  Backbone backbone_;
  Controllers controllers_;
  std::unique_ptr<Adam> backbone_opt_;
  std::unique_ptr<Adam> controller_opt_;
  Rng dropout_rng_;
  InputMask input_mask_;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 0 when no epoch ran
  double best_val_acc = 0.0;
  double test_acc = 0.0;
  std::vector<double> weight;
  std::vector<std::int32_t> depth;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<Parameter> parameters;  // best-validation parameters
};

/// Trains for up to config.epochs, keeping the parameters of the best
/// validation accuracy and stopping after `patience` epochs without strict
/// improvement.
TrainReport fit(const TrainConfig& config, std::shared_ptr<const Problem> problem);

/// Per-epoch CSV: epoch,loss_g,loss_p,loss_w,train_acc,val_acc
void write_report_csv(std::ostream& out, const TrainReport& report);
/// `key = value` summary block.
void write_report_summary(std::ostream& out, const TrainReport& report);

struct LeaderboardEntry {
  std::size_t config_index = 0;
  TrainConfig config;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct GridResult {
  TrainConfig best;
  std::vector<LeaderboardEntry> leaderboard;  // by validation accuracy, ties in config order
};

/// Fits each of the first `budget` configs (0 = all) and ranks them by best
/// validation accuracy.
GridResult grid_search(std::span<const TrainConfig> space, std::shared_ptr<const Problem> problem,
                       std::size_t budget = 0);

/// Names of hyperparameters outside the reference search grid (empty if none).
std::vector<std::string> outside_search_grid(const TrainConfig& config);

}  // namespace ppro
