#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ppro/autodiff.hpp"
#include "ppro/rng.hpp"

namespace ppro {

/// How the propagation controller turns step probabilities into depths.
enum class Strategy {
  Break,   // L2B: stop at the first step whose break probability exceeds epsilon
  Update,  // L2U: run all steps, keep the last step whose update probability exceeds epsilon
};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

/// Zero-fill switches for the controller inputs (the "nz" / "nl" ablations).
struct InputMask {
  bool priority = true;  // z_i slot
  bool depth = true;     // l_i / L slot of the weight head
};

/// Row layout shared by both heads, width 3 + 3h + 1:
///   [ z (3) | h0 (h) | slot_a (h) | slot_b (h) | slot_s (1) ]
/// propagation, L2B: slot_a = H^(k),        slot_b = Â H^(k-1), slot_s = 0
/// propagation, L2U: slot_a = H^(k) - h~,   slot_b = Â H^(k-1), slot_s = 0
/// weight:           slot_a = h~,           slot_b = 0,         slot_s = l / L
std::size_t controller_input_width(std::size_t embedding_dim);

/// Rows for the propagation head at one step, one per entry of `nodes`.
/// `best` (h~) is read only for Strategy::Update.
Matrix propagation_input(Strategy strategy, const Matrix& z, const Matrix& h0, const Matrix& hk,
                         const Matrix& aggregate, const Matrix* best, std::span<const std::size_t> nodes,
                         InputMask mask = {});

/// Rows for the weight head. `depth` and `best` are indexed by node.
Matrix weight_input(const Matrix& z, const Matrix& h0, const Matrix& best, std::span<const std::int32_t> depth,
                    int max_steps, std::span<const std::size_t> nodes, InputMask mask = {});

/// Two-layer MLP with a shared first layer (W_s, b_s) and two scalar heads:
/// the propagation head phi_p and the weight head phi_w, each followed by a
/// sigmoid.
class Controllers {
 public:
  Controllers(std::size_t embedding_dim, int hidden, Rng& init_rng);

  std::size_t embedding_dim() const { return embedding_dim_; }
  std::size_t input_width() const { return controller_input_width(embedding_dim_); }
  int hidden() const { return hidden_; }

  ParameterList parameters();
  Parameter& shared_weight() { return params_[0]; }
  Parameter& shared_bias() { return params_[1]; }
  Parameter& propagation_weight() { return params_[2]; }
  Parameter& propagation_bias() { return params_[3]; }
  Parameter& weight_head_weight() { return params_[4]; }
  Parameter& weight_head_bias() { return params_[5]; }

  struct Bound {
    Var shared_w, shared_b, prop_w, prop_b, weight_w, weight_b;
  };
  /// Differentiable binding (parameters become tape leaves).
  Bound bind(Tape& tape);
  /// Frozen binding (parameters enter as constants).
  Bound bind_constant(Tape& tape) const;

  /// Pr(r = 1) per row: sigmoid(phi_p . relu(W_s x + b_s)).
  Var propagation_probability(const Bound& b, Var input) const;
  /// w per row: sigmoid(phi_w . relu(W_s x + b_s)).
  Var priority_weight(const Bound& b, Var input) const;

  /// Tape-free evaluation of the same expressions (bitwise identical values).
  std::vector<double> propagation_probability(const Matrix& input) const;
  std::vector<double> priority_weight(const Matrix& input) const;

 private:
  std::size_t embedding_dim_;
  int hidden_;
  std::vector<Parameter> params_;
};

/// L2B decisions: probs[k-1][i] is node i's break probability at step k.
/// Node i gets the first k with probs > epsilon, or L = probs.size() if none.
std::vector<std::int32_t> decide_break(std::span<const std::vector<double>> step_probs, double epsilon);

/// L2U selection state, advanced one step at a time.
struct UpdateSelection {
  Matrix best;                      // h~, starts as H^(0)
  std::vector<std::int32_t> depth;  // l, starts at 0

  explicit UpdateSelection(const Matrix& h0) : best(h0), depth(h0.rows(), 0) {}
  /// Applies step k: rows of `nodes` whose prob exceeds epsilon take H^(k).
  void advance(int k, std::span<const double> probs, const Matrix& hk, std::span<const std::size_t> nodes,
               double epsilon);
};

/// Scans k = 1..L over precomputed probabilities (probs[k-1][i] for every
/// node) and returns the final selection.
UpdateSelection l2u_select(std::span<const std::vector<double>> step_probs, std::span<const Matrix> steps,
                           double epsilon);

/// L2B loss: mean_i | (C_i - C_min) / max(C_max - C_min, delta) - Pr(continue)_i |.
/// `continue_prob` is m x 1; `errors` holds the m (detached) prediction errors.
Var loss_l2b(Var continue_prob, std::span<const double> errors, double delta = 1e-12);

/// L2U loss: (1/m) sum_i (1/L) sum_k Pr_ik (C_ik - C~_ik). Rows of
/// `update_prob` (m*L x 1) align with `step_errors` and `running_best`.
Var loss_l2u(Var update_prob, std::span<const double> step_errors, std::span<const double> running_best);

/// Weight-head objective (ascended): (1/m) sum w_i C_i - lambda1 (1/m) sum w_i^2.
Var loss_weight(Var weights, std::span<const double> errors, double lambda1);

/// L_p - lambda2 * L_w.
Var merged_controller_loss(Var propagation_loss, Var weight_loss, double lambda2);

}  // namespace ppro
