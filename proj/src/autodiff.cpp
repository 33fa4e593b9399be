#include "ppro/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ppro/error.hpp"

namespace ppro {

const Matrix& Var::value() const { return tape->value(id); }

double scalar_value(Var v) {
  const auto& m = v.value();
  PPRO_EXPECT(m.rows() == 1 && m.cols() == 1, "scalar_value on a non-scalar");
  return m(0, 0);
}

// ---------------------------------------------------------------- Tape

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return constant(std::make_shared<const Matrix>(std::move(value))); }

Var Tape::constant(std::shared_ptr<const Matrix> value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  return push(std::move(n));
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.value = std::make_shared<const Matrix>(std::move(value));
  n.op = "leaf";
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = std::make_shared<const Matrix>(p.value);
  n.op = "parameter";
  n.requires_grad = true;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::detach(Var v) {
  PPRO_EXPECT(v.tape == this, "detach: variable belongs to another tape");
  Node n;
  n.value = nodes_[v.id].value;
  n.op = "detach";
  return push(std::move(n));
}

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(const char* op, Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    std::ostringstream os;
    os << "operation '" << op << "' (record " << nodes_.size() << ") produced a non-finite value";
    throw NumericalError(os.str());
  }
  Node n;
  n.value = std::make_shared<const Matrix>(std::move(value));
  n.op = op;
  for (const Var& in : inputs) {
    PPRO_EXPECT(in.tape == this, std::string(op) + ": input recorded on another tape");
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Matrix* Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty() && !n.value->empty()) n.grad = Matrix(n.value->rows(), n.value->cols());
  return &n.grad;
}

const Matrix& Tape::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = Matrix(n.value->rows(), n.value->cols());
  return n.grad;
}

void Tape::backward(Var root) {
  PPRO_EXPECT(root.tape == this, "backward: root belongs to another tape");
  const Matrix& rv = value(root);
  PPRO_EXPECT(rv.rows() == 1 && rv.cols() == 1, "backward: root must be a 1x1 scalar");
  for (auto& n : nodes_) n.grad = Matrix();
  if (Matrix* g = grad_slot(root.id)) (*g)(0, 0) = 1.0;

  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }

  for (auto& n : nodes_)
    if (n.param) n.param->grad = Matrix(n.value->rows(), n.value->cols());
  for (auto& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto dst = n.param->grad.values();
    auto src = n.grad.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

// ---------------------------------------------------------------- ops

namespace ad {
namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void expect_same_tape(Var a, Var b, const char* op) {
  PPRO_EXPECT(a.tape && a.tape == b.tape, std::string(op) + ": operands on different tapes");
}

void expect_same_shape(Var a, Var b, const char* op) {
  expect_same_tape(a, b, op);
  PPRO_EXPECT(a.value().same_shape(b.value()),
              std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " + shape_str(b.value()));
}

void accumulate(Matrix* dst, const Matrix& src, double s = 1.0) {
  if (!dst) return;
  auto d = dst->values();
  auto v = src.values();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += s * v[k];
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename D>
Var unary(const char* op, Var a, F f, D dfdx) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.size(); ++k) y.values()[k] = f(x.values()[k]);
  const std::size_t in = a.id;
  return a.tape->record(op, std::move(y), {a}, [in, dfdx](Tape& t, std::size_t self) {
    Matrix* g = t.grad_slot(in);
    if (!g) return;
    const auto& x = t.value(in).values();
    const auto& y = t.value(self).values();
    const auto& up = t.grad_of(self).values();
    auto gv = g->values();
    for (std::size_t k = 0; k < gv.size(); ++k) gv[k] += up[k] * dfdx(x[k], y[k]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  expect_same_tape(a, b, "matmul");
  PPRO_EXPECT(a.cols() == b.rows(),
              "matmul: inner dimensions differ " + shape_str(a.value()) + " * " + shape_str(b.value()));
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record("matmul", ppro::matmul(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& A = t.value(ia);
    const Matrix& B = t.value(ib);
    const Matrix& G = t.grad_of(self);
    if (Matrix* ga = t.grad_slot(ia)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < A.rows(); ++i) {
        auto grow = G.row(i);
        auto garow = ga->row(i);
        for (std::size_t k = 0; k < A.cols(); ++k) {
          auto brow = B.row(k);
          double s = 0.0;
          for (std::size_t j = 0; j < B.cols(); ++j) s += grow[j] * brow[j];
          garow[k] += s;
        }
      }
    }
    if (Matrix* gb = t.grad_slot(ib)) {
      // dB = A^T * G
      for (std::size_t i = 0; i < A.rows(); ++i) {
        auto grow = G.row(i);
        for (std::size_t k = 0; k < A.cols(); ++k) {
          const double aik = A(i, k);
          if (aik == 0.0) continue;
          auto gbrow = gb->row(k);
          for (std::size_t j = 0; j < B.cols(); ++j) gbrow[j] += aik * grow[j];
        }
      }
    }
  });
}

Var spmm(const NormalizedAdjacency& adj, Var h) {
  const std::size_t ih = h.id;
  const NormalizedAdjacency* A = &adj;
  return h.tape->record("spmm", ppro::spmm(adj, h.value()), {h}, [ih, A](Tape& t, std::size_t self) {
    Matrix* gh = t.grad_slot(ih);
    if (!gh) return;
    // Â is symmetric, so the adjoint is another spmm with the same operator.
    accumulate(gh, ppro::spmm(*A, t.grad_of(self)));
  });
}

Var add(Var a, Var b) {
  expect_same_shape(a, b, "add");
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.values()[k] += b.value().values()[k];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record("add", std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    accumulate(t.grad_slot(ia), t.grad_of(self));
    accumulate(t.grad_slot(ib), t.grad_of(self));
  });
}

Var sub(Var a, Var b) {
  expect_same_shape(a, b, "sub");
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.values()[k] -= b.value().values()[k];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record("sub", std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    accumulate(t.grad_slot(ia), t.grad_of(self));
    accumulate(t.grad_slot(ib), t.grad_of(self), -1.0);
  });
}

Var mul(Var a, Var b) {
  expect_same_shape(a, b, "mul");
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.values()[k] *= b.value().values()[k];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record("mul", std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const auto& up = t.grad_of(self).values();
    if (Matrix* ga = t.grad_slot(ia)) {
      const auto& bv = t.value(ib).values();
      for (std::size_t k = 0; k < up.size(); ++k) ga->values()[k] += up[k] * bv[k];
    }
    if (Matrix* gb = t.grad_slot(ib)) {
      const auto& av = t.value(ia).values();
      for (std::size_t k = 0; k < up.size(); ++k) gb->values()[k] += up[k] * av[k];
    }
  });
}

Var add_row(Var a, Var bias) {
  expect_same_tape(a, bias, "add_row");
  PPRO_EXPECT(bias.rows() == 1 && bias.cols() == a.cols(),
              "add_row: bias " + shape_str(bias.value()) + " does not fit " + shape_str(a.value()));
  Matrix y = a.value();
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    auto b = bias.value().row(0);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
  const std::size_t ia = a.id, ib = bias.id;
  return a.tape->record("add_row", std::move(y), {a, bias}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of(self);
    accumulate(t.grad_slot(ia), G);
    if (Matrix* gb = t.grad_slot(ib)) {
      auto br = gb->row(0);
      for (std::size_t i = 0; i < G.rows(); ++i) {
        auto gr = G.row(i);
        for (std::size_t j = 0; j < br.size(); ++j) br[j] += gr[j];
      }
    }
  });
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double s, double c) {
  Matrix y = a.value();
  for (auto& v : y.values()) v = s * v + c;
  const std::size_t ia = a.id;
  return a.tape->record("affine", std::move(y), {a},
                        [ia, s](Tape& t, std::size_t self) { accumulate(t.grad_slot(ia), t.grad_of(self), s); });
}

Var concat_cols(std::span<const Var> parts) {
  PPRO_EXPECT(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    expect_same_tape(parts[0], p, "concat_cols");
    PPRO_EXPECT(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  std::vector<std::size_t> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i) std::copy(v.row(i).begin(), v.row(i).end(), y.row(i).begin() + offset);
    offset += v.cols();
    ids.push_back(p.id);
  }
  return parts[0].tape->record("concat_cols", std::move(y), parts, [ids](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of(self);
    std::size_t offset = 0;
    for (std::size_t id : ids) {
      const std::size_t w = t.value(id).cols();
      if (Matrix* g = t.grad_slot(id)) {
        for (std::size_t i = 0; i < G.rows(); ++i)
          for (std::size_t j = 0; j < w; ++j) (*g)(i, j) += G(i, offset + j);
      }
      offset += w;
    }
  });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs(Var a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var row_softmax(Var a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    auto yr = y.row(i);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double z = 0.0;
    for (std::size_t j = 0; j < xr.size(); ++j) z += (yr[j] = std::exp(xr[j] - mx));
    for (auto& v : yr) v /= z;
  }
  const std::size_t ia = a.id;
  return a.tape->record("row_softmax", std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    Matrix* g = t.grad_slot(ia);
    if (!g) return;
    const Matrix& Y = t.value(self);
    const Matrix& G = t.grad_of(self);
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      auto yr = Y.row(i);
      auto gr = G.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < yr.size(); ++j) dot += gr[j] * yr[j];
      auto out = g->row(i);
      for (std::size_t j = 0; j < yr.size(); ++j) out[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var dropout(Var a, double rate, Rng& rng) {
  PPRO_EXPECT(rate >= 0.0 && rate < 1.0, "dropout: rate must lie in [0, 1)");
  const Matrix& x = a.value();
  auto mask = std::make_shared<Matrix>(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mask->values()) m = (rate == 0.0 || rng.uniform() >= rate) ? keep_scale : 0.0;
  Matrix y = x;
  for (std::size_t k = 0; k < y.size(); ++k) y.values()[k] *= mask->values()[k];
  const std::size_t ia = a.id;
  return a.tape->record("dropout", std::move(y), {a}, [ia, mask](Tape& t, std::size_t self) {
    Matrix* g = t.grad_slot(ia);
    if (!g) return;
    const auto& up = t.grad_of(self).values();
    for (std::size_t k = 0; k < up.size(); ++k) g->values()[k] += up[k] * mask->values()[k];
  });
}

Var masked_nll(Var logits, std::span<const std::int32_t> labels, std::span<const std::size_t> nodes,
               std::span<const double> weights) {
  const Matrix& x = logits.value();
  PPRO_EXPECT(labels.size() == x.rows(), "masked_nll: label count differs from logit rows");
  PPRO_EXPECT(!nodes.empty(), "masked_nll: empty node mask");
  PPRO_EXPECT(weights.empty() || weights.size() == nodes.size(), "masked_nll: one weight per masked node");

  // Softmax rows for the masked nodes are reused by the backward rule.
  auto probs = std::make_shared<Matrix>(nodes.size(), x.cols());
  std::vector<std::size_t> node_copy(nodes.begin(), nodes.end());
  std::vector<double> w(nodes.size(), 1.0);
  if (!weights.empty()) w.assign(weights.begin(), weights.end());
  std::vector<std::int32_t> targets(nodes.size());

  const double inv_m = 1.0 / static_cast<double>(nodes.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::size_t i = nodes[k];
    PPRO_EXPECT(i < x.rows(), "masked_nll: node index out of range");
    const std::int32_t y = labels[i];
    PPRO_EXPECT(y >= 0 && static_cast<std::size_t>(y) < x.cols(), "masked_nll: label out of range");
    targets[k] = y;
    auto xr = x.row(i);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double z = 0.0;
    for (double v : xr) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    auto pr = probs->row(k);
    for (std::size_t j = 0; j < xr.size(); ++j) pr[j] = std::exp(xr[j] - log_z);
    loss += w[k] * (log_z - xr[static_cast<std::size_t>(y)]);
  }
  Matrix out(1, 1, loss * inv_m);
  const std::size_t il = logits.id;
  return logits.tape->record(
      "masked_nll", std::move(out), {logits},
      [il, probs, node_copy = std::move(node_copy), w = std::move(w), targets = std::move(targets), inv_m](
          Tape& t, std::size_t self) {
        Matrix* g = t.grad_slot(il);
        if (!g) return;
        const double up = t.grad_of(self)(0, 0);
        for (std::size_t k = 0; k < node_copy.size(); ++k) {
          auto gr = g->row(node_copy[k]);
          auto pr = probs->row(k);
          const double s = up * w[k] * inv_m;
          for (std::size_t j = 0; j < gr.size(); ++j) gr[j] += s * pr[j];
          gr[static_cast<std::size_t>(targets[k])] -= s;
        }
      });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id;
  return a.tape->record("sum", Matrix(1, 1, s), {a}, [ia](Tape& t, std::size_t self) {
    Matrix* g = t.grad_slot(ia);
    if (!g) return;
    const double up = t.grad_of(self)(0, 0);
    for (auto& v : g->values()) v += up;
  });
}

Var mean(Var a) {
  PPRO_EXPECT(a.value().size() > 0, "mean of an empty matrix");
  const double inv = 1.0 / static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id;
  return a.tape->record("mean", Matrix(1, 1, s * inv), {a}, [ia, inv](Tape& t, std::size_t self) {
    Matrix* g = t.grad_slot(ia);
    if (!g) return;
    const double up = t.grad_of(self)(0, 0) * inv;
    for (auto& v : g->values()) v += up;
  });
}

Var sum_sq(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  const std::size_t ia = a.id;
  return a.tape->record("sum_sq", Matrix(1, 1, s), {a}, [ia](Tape& t, std::size_t self) {
    Matrix* g = t.grad_slot(ia);
    if (!g) return;
    const double up = 2.0 * t.grad_of(self)(0, 0);
    const auto& x = t.value(ia).values();
    for (std::size_t k = 0; k < x.size(); ++k) g->values()[k] += up * x[k];
  });
}

Var pick_rows(std::span<const Var> layers, std::span<const std::int32_t> which) {
  PPRO_EXPECT(!layers.empty(), "pick_rows: no layers");
  const Matrix& first = layers[0].value();
  PPRO_EXPECT(which.size() == first.rows(), "pick_rows: one selector per row required");
  std::vector<std::size_t> ids;
  for (const Var& l : layers) {
    expect_same_shape(layers[0], l, "pick_rows");
    ids.push_back(l.id);
  }
  Matrix y(first.rows(), first.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const auto s = which[i];
    PPRO_EXPECT(s >= 0 && static_cast<std::size_t>(s) < layers.size(), "pick_rows: selector out of range");
    auto src = layers[static_cast<std::size_t>(s)].value().row(i);
    std::copy(src.begin(), src.end(), y.row(i).begin());
  }
  std::vector<std::int32_t> sel(which.begin(), which.end());
  return layers[0].tape->record("pick_rows", std::move(y), layers,
                                [ids, sel = std::move(sel)](Tape& t, std::size_t self) {
                                  const Matrix& G = t.grad_of(self);
                                  for (std::size_t i = 0; i < sel.size(); ++i) {
                                    Matrix* g = t.grad_slot(ids[static_cast<std::size_t>(sel[i])]);
                                    if (!g) continue;
                                    auto gr = G.row(i);
                                    auto dst = g->row(i);
                                    for (std::size_t j = 0; j < gr.size(); ++j) dst[j] += gr[j];
                                  }
                                });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Matrix& x = a.value();
  Matrix y(rows.size(), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    PPRO_EXPECT(rows[k] < x.rows(), "gather_rows: row index out of range");
    std::copy(x.row(rows[k]).begin(), x.row(rows[k]).end(), y.row(k).begin());
  }
  const std::size_t ia = a.id;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape->record("gather_rows", std::move(y), {a}, [ia, idx = std::move(idx)](Tape& t, std::size_t self) {
    Matrix* g = t.grad_slot(ia);
    if (!g) return;
    const Matrix& G = t.grad_of(self);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto gr = G.row(k);
      auto dst = g->row(idx[k]);
      for (std::size_t j = 0; j < gr.size(); ++j) dst[j] += gr[j];
    }
  });
}

}  // namespace ad
}  // namespace ppro
