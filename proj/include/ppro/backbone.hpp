#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ppro/autodiff.hpp"
#include "ppro/graph.hpp"
#include "ppro/rng.hpp"

namespace ppro {

enum class BackboneKind { Appnp, Gcn };

std::string_view to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(std::string_view text);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::Appnp;
  int steps = 10;      // L, maximum propagation depth
  int hidden = 64;     // encoder (APPNP) or layer (GCN) width
  double alpha = 0.1;  // APPNP teleport probability
  double dropout = 0.5;
  std::size_t in_dim = 0;
  std::size_t classes = 0;

  void validate() const;
};

/// Glorot-uniform weights in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Per-step record of one propagation pass.
struct PropagationTrace {
  std::vector<Var> steps;       // H^(0..L)
  std::vector<Var> aggregates;  // aggregates[k-1] = Â H^(k-1), k = 1..L
  Var best;                     // per-node selected embedding h~
  std::vector<std::int32_t> depth;  // per-node step l_i in [0, L]
};

/// Parameters of the backbone GNN. APPNP: a two-layer encoder MLP whose
/// output (width = classes) is propagated. GCN: one weight matrix per step
/// followed by a linear classification head.
class Backbone {
 public:
  Backbone(const BackboneConfig& config, Rng& init_rng);

  const BackboneConfig& config() const { return config_; }
  ParameterList parameters();
  /// Width of H^(k), k >= 1 (and of H^(0) for APPNP).
  std::size_t embedding_dim() const;

  /// Parameters bound to one tape; create once per forward pass.
  struct Bound {
    std::vector<Var> params;
  };
  Bound bind(Tape& tape);

  /// H^(0). APPNP: MLP(X) with dropout on the input and hidden layer when
  /// `dropout_rng` is non-null. GCN: X itself.
  Var encode(const Bound& bound, Var x, Rng* dropout_rng) const;

  /// One aggregate/update round: returns (Â H^(k-1), H^(k)).
  std::pair<Var, Var> propagate_step(const NormalizedAdjacency& adj, Var prev, Var h0, const Bound& bound, int k,
                                     Rng* dropout_rng) const;

  /// Full L-step pass. With `depth_bound`, node i stops updating after step
  /// depth_bound[i] but keeps feeding its frozen embedding to neighbours.
  PropagationTrace run(const NormalizedAdjacency& adj, Var x, const Bound& bound, Rng* dropout_rng,
                       std::optional<std::span<const std::int32_t>> depth_bound = std::nullopt) const;

  /// Class logits from selected embeddings (identity for APPNP, head for GCN).
  Var logits(const Bound& bound, Var embedding) const;

 private:
  BackboneConfig config_;
  std::vector<Parameter> params_;
};

Matrix softmax_rows(const Matrix& logits);
std::vector<std::int32_t> argmax_rows(const Matrix& m);
/// Cross-entropy -log softmax(logits_i)[y_i] for each listed node.
std::vector<double> cross_entropy_rows(const Matrix& logits, std::span<const std::int32_t> labels,
                                       std::span<const std::size_t> nodes);

}  // namespace ppro
