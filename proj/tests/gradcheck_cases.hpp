// Randomized finite-difference cases for every differentiable operator and
// both controller heads. Shared by the unit tests and the acceptance binary.
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "ppro/autodiff.hpp"
#include "ppro/controllers.hpp"
#include "ppro/grad_check.hpp"

namespace ppro::testing {

struct GradCase {
  std::string name;
  std::function<GradCheckReport(std::uint64_t seed)> run;
};

/// Entries bounded away from zero so kinks (relu, abs) stay outside the
/// finite-difference stencil.
inline Matrix away_from_zero(std::size_t r, std::size_t c, Rng& rng, double margin = 0.1) {
  Matrix m(r, c);
  for (auto& v : m.values()) {
    const double mag = margin + std::abs(rng.normal());
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return m;
}

/// Reduces an arbitrary output to a scalar through a fixed random projection,
/// so every output entry contributes a distinct weight.
inline Var project(Var out, const Matrix& weights) {
  Tape& t = *out.tape;
  return ad::sum(ad::mul(out, t.constant(weights)));
}

namespace detail {

struct Instance {
  std::vector<std::unique_ptr<Parameter>> owned;
  ParameterList params;
  Parameter& add(std::string name, Matrix value) {
    owned.push_back(std::make_unique<Parameter>(Parameter{std::move(name), std::move(value), {}}));
    params.push_back(owned.back().get());
    return *owned.back();
  }
};

inline std::size_t dim(Rng& rng, std::size_t lo = 2, std::size_t hi = 5) { return lo + rng.below(hi - lo + 1); }

using UnaryOp = std::function<Var(Var)>;

inline GradCheckReport check_unary(std::uint64_t seed, const UnaryOp& op, bool avoid_zero) {
  Rng rng(seed);
  const std::size_t r = dim(rng), c = dim(rng);
  Instance inst;
  Parameter& a = inst.add("a", avoid_zero ? away_from_zero(r, c, rng) : random_matrix(r, c, rng));
  Matrix proj;
  auto build = [&](Tape& t) {
    Var out = op(t.parameter(a));
    if (proj.empty()) proj = random_matrix(out.rows(), out.cols(), rng);
    return project(out, proj);
  };
  return grad_check(build, inst.params);
}

using BinaryOp = std::function<Var(Var, Var)>;

inline GradCheckReport check_binary(std::uint64_t seed, const BinaryOp& op, std::size_t r, std::size_t c,
                                    std::size_t r2, std::size_t c2, Rng& rng) {
  Instance inst;
  Parameter& a = inst.add("a", random_matrix(r, c, rng));
  Parameter& b = inst.add("b", random_matrix(r2, c2, rng));
  Matrix proj;
  Rng proj_rng(seed ^ 0x5555);
  auto build = [&](Tape& t) {
    Var out = op(t.parameter(a), t.parameter(b));
    if (proj.empty()) proj = random_matrix(out.rows(), out.cols(), proj_rng);
    return project(out, proj);
  };
  return grad_check(build, inst.params);
}

/// Controllers whose shared-layer pre-activations all clear the relu kink by `margin`.
inline bool clear_of_kink(Controllers& ctl, const Matrix& input, double margin) {
  const Matrix& w = ctl.shared_weight().value;
  const Matrix& b = ctl.shared_bias().value;
  Matrix pre = matmul(input, w);
  for (std::size_t i = 0; i < pre.rows(); ++i)
    for (std::size_t j = 0; j < pre.cols(); ++j)
      if (std::abs(pre(i, j) + b(0, j)) < margin) return false;
  return true;
}

enum class Head { Propagation, Weight };

inline GradCheckReport check_head(std::uint64_t seed, Head head) {
  Rng rng(seed);
  for (;;) {
    const std::size_t h = dim(rng, 1, 4);
    const int hidden = static_cast<int>(dim(rng, 2, 6));
    const std::size_t rows = dim(rng, 2, 6);
    Rng init = rng.derive(1);
    Controllers ctl(h, hidden, init);
    // Nonzero biases so the bias gradients are exercised away from init values.
    for (auto& v : ctl.shared_bias().value.values()) v = 0.3 * rng.normal();
    for (auto& v : ctl.propagation_bias().value.values()) v = 0.3 * rng.normal();
    for (auto& v : ctl.weight_head_bias().value.values()) v = 0.3 * rng.normal();
    Matrix input = random_matrix(rows, ctl.input_width(), rng);
    if (!clear_of_kink(ctl, input, 1e-2)) continue;
    Matrix proj = random_matrix(rows, 1, rng);
    auto build = [&](Tape& t) {
      Controllers::Bound b = ctl.bind(t);
      Var x = t.constant(input);
      Var out = head == Head::Propagation ? ctl.propagation_probability(b, x) : ctl.priority_weight(b, x);
      return project(out, proj);
    };
    return grad_check(build, ctl.parameters());
  }
}

}  // namespace detail

inline std::vector<GradCase> gradient_cases() {
  using namespace detail;
  std::vector<GradCase> cases;

  cases.push_back({"matmul", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t r = dim(rng), k = dim(rng), c = dim(rng);
                     return check_binary(s, ad::matmul, r, k, k, c, rng);
                   }});
  cases.push_back({"add", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t r = dim(rng), c = dim(rng);
                     return check_binary(s, ad::add, r, c, r, c, rng);
                   }});
  cases.push_back({"sub", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t r = dim(rng), c = dim(rng);
                     return check_binary(s, ad::sub, r, c, r, c, rng);
                   }});
  cases.push_back({"mul", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t r = dim(rng), c = dim(rng);
                     return check_binary(s, ad::mul, r, c, r, c, rng);
                   }});
  cases.push_back({"add_row", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t r = dim(rng), c = dim(rng);
                     return check_binary(s, ad::add_row, r, c, 1, c, rng);
                   }});
  cases.push_back({"concat_cols", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t r = dim(rng), c1 = dim(rng, 1, 3), c2 = dim(rng, 1, 3);
                     return check_binary(
                         s, [](Var a, Var b) { return ad::concat_cols(std::vector<Var>{a, b, a}); }, r, c1, r, c2,
                         rng);
                   }});
  cases.push_back({"pick_rows", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t r = dim(rng, 3, 6), c = dim(rng);
                     std::vector<std::int32_t> which(r);
                     for (auto& w : which) w = static_cast<std::int32_t>(rng.below(2));
                     return check_binary(
                         s, [which](Var a, Var b) { return ad::pick_rows(std::vector<Var>{a, b}, which); }, r, c, r,
                         c, rng);
                   }});
  cases.push_back({"scale", [](std::uint64_t s) {
                     Rng rng(s ^ 0x77);
                     const double f = rng.normal();
                     return check_unary(s, [f](Var a) { return ad::scale(a, f); }, false);
                   }});
  cases.push_back({"affine", [](std::uint64_t s) {
                     Rng rng(s ^ 0x77);
                     const double f = rng.normal(), c = rng.normal();
                     return check_unary(s, [f, c](Var a) { return ad::affine(a, f, c); }, false);
                   }});
  cases.push_back({"relu", [](std::uint64_t s) { return check_unary(s, ad::relu, true); }});
  cases.push_back({"abs", [](std::uint64_t s) { return check_unary(s, ad::abs, true); }});
  cases.push_back({"sigmoid", [](std::uint64_t s) { return check_unary(s, ad::sigmoid, false); }});
  cases.push_back({"row_softmax", [](std::uint64_t s) { return check_unary(s, ad::row_softmax, false); }});
  cases.push_back({"sum", [](std::uint64_t s) { return check_unary(s, ad::sum, false); }});
  cases.push_back({"mean", [](std::uint64_t s) { return check_unary(s, ad::mean, false); }});
  cases.push_back({"sum_sq", [](std::uint64_t s) { return check_unary(s, ad::sum_sq, false); }});
  cases.push_back({"gather_rows", [](std::uint64_t s) {
                     Rng rng(s ^ 0x99);
                     std::vector<std::size_t> rows{1, 0, 1};
                     return check_unary(s, [rows](Var a) { return ad::gather_rows(a, rows); }, false);
                   }});
  cases.push_back({"dropout", [](std::uint64_t s) {
                     // A fresh generator per evaluation keeps the mask fixed across the stencil.
                     return check_unary(
                         s,
                         [s](Var a) {
                           Rng mask(s * 31 + 7);
                           return ad::dropout(a, 0.4, mask);
                         },
                         false);
                   }});
  cases.push_back({"spmm", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t n = dim(rng, 3, 12), c = dim(rng);
                     auto adj = std::make_shared<NormalizedAdjacency>(normalize(random_graph(n, 0.3, rng)));
                     Instance inst;
                     Parameter& h = inst.add("h", random_matrix(n, c, rng));
                     Matrix proj = random_matrix(n, c, rng);
                     return grad_check([&](Tape& t) { return project(ad::spmm(*adj, t.parameter(h)), proj); },
                                       inst.params);
                   }});
  cases.push_back({"masked_nll", [](std::uint64_t s) {
                     Rng rng(s);
                     const std::size_t n = dim(rng, 3, 8), c = dim(rng, 2, 5);
                     Instance inst;
                     Parameter& x = inst.add("logits", random_matrix(n, c, rng));
                     std::vector<std::int32_t> labels(n);
                     for (auto& y : labels) y = static_cast<std::int32_t>(rng.below(c));
                     std::vector<std::size_t> nodes;
                     std::vector<double> weights;
                     for (std::size_t i = 0; i < n; ++i)
                       if (rng.uniform() < 0.7 || nodes.empty()) {
                         nodes.push_back(i);
                         weights.push_back(rng.uniform(0.1, 1.0));
                       }
                     return grad_check(
                         [&](Tape& t) { return ad::masked_nll(t.parameter(x), labels, nodes, weights); },
                         inst.params);
                   }});
  cases.push_back({"mlp", [](std::uint64_t s) {
                     Rng rng(s);
                     for (;;) {
                       const std::size_t n = dim(rng, 3, 6), d = dim(rng), hdim = dim(rng), c = dim(rng, 2, 4);
                       Instance inst;
                       Matrix x = random_matrix(n, d, rng);
                       Parameter& w1 = inst.add("w1", random_matrix(d, hdim, rng));
                       Parameter& b1 = inst.add("b1", random_matrix(1, hdim, rng));
                       Parameter& w2 = inst.add("w2", random_matrix(hdim, c, rng));
                       Matrix pre = matmul(x, w1.value);
                       bool clear = true;
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < hdim; ++j) clear = clear && std::abs(pre(i, j) + b1.value(0, j)) > 1e-2;
                       if (!clear) continue;
                       std::vector<std::int32_t> labels(n);
                       for (auto& y : labels) y = static_cast<std::int32_t>(rng.below(c));
                       std::vector<std::size_t> nodes(n);
                       for (std::size_t i = 0; i < n; ++i) nodes[i] = i;
                       return grad_check(
                           [&](Tape& t) {
                             Var hid = ad::relu(ad::add_row(ad::matmul(t.constant(x), t.parameter(w1)), t.parameter(b1)));
                             return ad::masked_nll(ad::matmul(hid, t.parameter(w2)), labels, nodes);
                           },
                           inst.params);
                     }
                   }});
  cases.push_back({"propagation_head", [](std::uint64_t s) { return check_head(s, Head::Propagation); }});
  cases.push_back({"weight_head", [](std::uint64_t s) { return check_head(s, Head::Weight); }});
  return cases;
}

}  // namespace ppro::testing
