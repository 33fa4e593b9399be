#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ppro/graph.hpp"
#include "ppro/matrix.hpp"
#include "ppro/rng.hpp"

namespace ppro {

/// A named trainable matrix plus the gradient slot filled by Tape::backward.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

using ParameterList = std::vector<Parameter*>;

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode recording of dense matrix operations. Records are appended in
/// evaluation order, so the list is topologically sorted by construction and
/// backward walks it in reverse. Single-threaded.
class Tape {
 public:
  /// Propagates the gradient of record `self` into its inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(std::shared_ptr<const Matrix> value);
  /// Differentiable leaf with no backing Parameter (read its gradient with grad()).
  Var leaf(Matrix value);
  /// Leaf bound to `p`; backward overwrites p.grad.
  Var parameter(Parameter& p);
  /// Same value, no gradient flow.
  Var detach(Var v);

  /// Appends one record. Throws NumericalError naming `op` if `value` holds NaN/Inf.
  Var record(const char* op, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(const char* op, Matrix value, std::span<const Var> inputs, BackwardFn backward);

  void backward(Var root);

  const Matrix& value(std::size_t id) const { return *nodes_[id].value; }
  const Matrix& value(Var v) const { return value(v.id); }
  /// Gradient accumulated at a record; zeros if none reached it.
  const Matrix& grad(Var v);
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const char* op_name(Var v) const { return nodes_[v.id].op; }

  /// For backward rules: gradient accumulator of `id`, allocated on first use,
  /// or nullptr when that record does not need a gradient.
  Matrix* grad_slot(std::size_t id);
  const Matrix& grad_of(std::size_t id) const { return nodes_[id].grad; }
  std::span<const std::size_t> inputs(std::size_t id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    std::shared_ptr<const Matrix> value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    const char* op = "";
    bool requires_grad = false;
  };
  Var push(Node node);

  std::vector<Node> nodes_;
};

/// Differentiable operators. Each appends exactly one record to the tape of
/// its inputs and validates shapes with ContractViolation.
namespace ad {

Var matmul(Var a, Var b);
/// Product with a constant sparse operator; the adjacency must outlive the tape.
Var spmm(const NormalizedAdjacency& adj, Var h);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a + bias, with `bias` a 1 x cols row broadcast over rows.
Var add_row(Var a, Var bias);
Var scale(Var a, double s);
/// s * a + c elementwise.
Var affine(Var a, double s, double c);
Var concat_cols(std::span<const Var> parts);
Var relu(Var a);
Var sigmoid(Var a);
Var abs(Var a);
Var row_softmax(Var a);
/// Inverted dropout: zeroes entries with probability `rate`, scales survivors by 1/(1-rate).
Var dropout(Var a, double rate, Rng& rng);
/// (1/|nodes|) * sum_k weights[k] * -log softmax(logits)[nodes[k], labels[nodes[k]]].
/// Empty `weights` means all ones.
Var masked_nll(Var logits, std::span<const std::int32_t> labels, std::span<const std::size_t> nodes,
               std::span<const double> weights = {});
Var sum(Var a);
Var mean(Var a);
Var sum_sq(Var a);
/// Row i of the result is row i of layers[which[i]]; all layers share a shape.
Var pick_rows(std::span<const Var> layers, std::span<const std::int32_t> which);
Var gather_rows(Var a, std::span<const std::size_t> rows);

}  // namespace ad

double scalar_value(Var v);

}  // namespace ppro
