#include "doctest.h"
#include "fixtures.hpp"
#include "scenarios.hpp"

#include <algorithm>
#include <cmath>

#include "ppro/controllers.hpp"
#include "ppro/error.hpp"

using namespace ppro;
using namespace ppro::testing;

namespace {

Controllers zeroed(std::size_t h, int hidden) {
  Rng rng(1);
  Controllers c(h, hidden, rng);
  for (Parameter* p : c.parameters()) p->value.fill(0.0);
  return c;
}

double eval(Var v) { return scalar_value(v); }

}  // namespace

TEST_CASE("input width and layout") {
  CHECK(controller_input_width(2) == 10);
  Matrix z{{1, 2, 3}, {4, 5, 6}};
  Matrix h0{{10, 11}, {12, 13}};
  Matrix hk{{20, 21}, {22, 23}};
  Matrix agg{{30, 31}, {32, 33}};
  Matrix best{{1, 1}, {2, 2}};
  const std::size_t nodes[] = {1};
  Matrix b = propagation_input(Strategy::Break, z, h0, hk, agg, nullptr, nodes);
  CHECK(b == Matrix{{4, 5, 6, 12, 13, 22, 23, 32, 33, 0}});
  Matrix u = propagation_input(Strategy::Update, z, h0, hk, agg, &best, nodes);
  CHECK(u == Matrix{{4, 5, 6, 12, 13, 20, 21, 32, 33, 0}});
  const std::int32_t depth[] = {3, 2};
  Matrix w = weight_input(z, h0, best, depth, 4, nodes);
  CHECK(w == Matrix{{4, 5, 6, 12, 13, 2, 2, 0, 0, 0.5}});
  Matrix masked = weight_input(z, h0, best, depth, 4, nodes, InputMask{false, false});
  CHECK(masked == Matrix{{0, 0, 0, 12, 13, 2, 2, 0, 0, 0}});
  CHECK_THROWS_AS(propagation_input(Strategy::Update, z, h0, hk, agg, nullptr, nodes), ContractViolation);
}

TEST_CASE("zero parameters give probability and weight exactly 0.5") {
  Controllers c = zeroed(3, 5);
  Rng rng(2);
  Matrix x = random_matrix(6, c.input_width(), rng);
  for (double p : c.propagation_probability(x)) CHECK(p == 0.5);
  for (double w : c.priority_weight(x)) CHECK(w == 0.5);
  Tape t;
  auto b = c.bind(t);
  for (double p : c.propagation_probability(b, t.constant(x)).value().values()) CHECK(p == 0.5);
}

TEST_CASE("outputs stay in (0, 1) and the matrix path matches the tape path bitwise") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Rng init = rng.derive(static_cast<std::uint64_t>(trial));
    Controllers c(4, 8, init);
    Matrix x = random_matrix(7, c.input_width(), rng, 2.0);
    Tape t;
    auto b = c.bind(t);
    const Matrix& tp = c.propagation_probability(b, t.constant(x)).value();
    const Matrix& tw = c.priority_weight(b, t.constant(x)).value();
    auto mp = c.propagation_probability(x);
    auto mw = c.priority_weight(x);
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(mp[i] > 0.0);
      CHECK(mp[i] < 1.0);
      CHECK(mw[i] > 0.0);
      CHECK(mw[i] < 1.0);
      CHECK(mp[i] == tp(i, 0));
      CHECK(mw[i] == tw(i, 0));
    }
  }
}

TEST_CASE("raising the weight-head bias by 10 saturates the weights") {
  Rng rng(4);
  Controllers c(2, 6, rng);
  Matrix x = random_matrix(5, c.input_width(), rng, 0.1);
  c.weight_head_bias().value(0, 0) += 10.0;
  for (double w : c.priority_weight(x)) CHECK(w > 0.99);
}

TEST_CASE("decide_break") {
  std::vector<std::vector<double>> probs{{0.7, 0.3, 0.2}, {0.1, 0.6, 0.4}, {0.9, 0.9, 0.5}};
  // node 0 crosses at k=1, node 1 at k=2 (first crossing), node 2 never
  CHECK(decide_break(probs, 0.5) == std::vector<std::int32_t>{1, 2, 3});
  CHECK(decide_break(probs, 0.95) == std::vector<std::int32_t>{3, 3, 3});
}

TEST_CASE("decide_break is monotone in epsilon") {
  Rng rng(5);
  std::vector<std::vector<double>> probs(6, std::vector<double>(40));
  for (auto& step : probs)
    for (auto& p : step) p = rng.uniform();
  std::vector<std::int32_t> last(40, 0);
  for (double eps = 0.05; eps < 1.0; eps += 0.05) {
    auto l = decide_break(probs, eps);
    for (std::size_t i = 0; i < 40; ++i) CHECK(l[i] >= last[i]);
    last = l;
  }
}

TEST_CASE("l2u_select") {
  std::vector<Matrix> steps;
  for (int k = 0; k <= 4; ++k) steps.push_back(Matrix(3, 2, static_cast<double>(k)));
  // step-major: probs[k-1][i]
  std::vector<std::vector<double>> probs{{0.1, 0.2, 0.9}, {0.1, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.2, 0.9}};
  UpdateSelection sel = l2u_select(probs, steps, 0.5);
  CHECK(sel.depth == std::vector<std::int32_t>{0, 3, 4});
  CHECK(sel.best.row(0)[0] == 0.0);
  CHECK(sel.best.row(1)[1] == 3.0);
  CHECK(sel.best.row(2)[0] == 4.0);
}

TEST_CASE("UpdateSelection::advance touches only the listed nodes") {
  Matrix h0(3, 1, 0.0);
  UpdateSelection sel(h0);
  Matrix h1(3, 1, 1.0);
  const double probs[] = {0.9, 0.9};
  const std::size_t nodes[] = {0, 2};
  sel.advance(1, probs, h1, nodes, 0.5);
  CHECK(sel.depth == std::vector<std::int32_t>{1, 0, 1});
  CHECK(sel.best == Matrix{{1.0}, {0.0}, {1.0}});
}

TEST_CASE("loss_l2b examples") {
  Tape t;
  const double c01[] = {0.0, 1.0};
  CHECK(eval(loss_l2b(t.constant(Matrix{{0.0}, {1.0}}), c01)) == 0.0);
  CHECK(eval(loss_l2b(t.constant(Matrix{{1.0}, {0.0}}), c01)) == 1.0);
  const double same[] = {0.7, 0.7, 0.7};
  CHECK(eval(loss_l2b(t.constant(Matrix(3, 1, 0.5)), same)) == 0.5);
}

TEST_CASE("loss_l2b is invariant to positive affine rescaling of the errors") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + rng.below(10);
    std::vector<double> c(m), scaled(m);
    Matrix p(m, 1);
    for (std::size_t i = 0; i < m; ++i) {
      // Dyadic values keep every intermediate exactly representable.
      c[i] = static_cast<double>(rng.below(64)) / 64.0;
      p(i, 0) = static_cast<double>(rng.below(64)) / 64.0;
    }
    const double a = std::ldexp(1.0, static_cast<int>(rng.below(5))), b = static_cast<double>(rng.below(9));
    for (std::size_t i = 0; i < m; ++i) scaled[i] = a * c[i] + b;
    Tape t;
    CHECK(eval(loss_l2b(t.constant(p), c)) == eval(loss_l2b(t.constant(p), scaled)));
  }
}

TEST_CASE("loss_l2u examples") {
  Tape t;
  const double c[] = {0.4, 0.9, 0.1}, best[] = {0.4, 0.9, 0.1};
  CHECK(eval(loss_l2u(t.constant(Matrix{{0.3}, {0.8}, {0.6}}), c, best)) == 0.0);
  const double c1[] = {0.7}, b1[] = {0.5};
  CHECK(eval(loss_l2u(t.constant(Matrix{{1.0}}), c1, b1)) == doctest::Approx(0.2).epsilon(1e-15));
  const double lower[] = {0.1, 0.2}, running[] = {0.5, 0.5};
  CHECK(eval(loss_l2u(t.constant(Matrix{{0.9}, {0.8}}), lower, running)) < 0.0);
}

TEST_CASE("loss_weight examples") {
  Tape t;
  const double c[] = {0.5, 1.2, 0.3};
  CHECK(eval(loss_weight(t.constant(Matrix(3, 1, 0.0)), c, 1.0)) == 0.0);
  // lambda1 = 0 and positive errors: strictly increasing in each weight
  Matrix w(3, 1, 0.2);
  const double base = eval(loss_weight(t.constant(w), c, 0.0));
  for (std::size_t i = 0; i < 3; ++i) {
    Matrix up = w;
    up(i, 0) += 0.1;
    CHECK(eval(loss_weight(t.constant(up), c, 0.0)) > base);
  }
  // stationary at C / (2 lambda1)
  Parameter wp{"w", Matrix{{0.25}, {0.6}, {0.15}}, {}};
  Tape g;
  g.backward(loss_weight(g.parameter(wp), c, 1.0));
  for (double v : wp.grad.values()) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("merged controller loss") {
  Tape t;
  Var lp = t.constant(Matrix{{0.4}});
  Var lw = t.constant(Matrix{{0.1}});
  CHECK(eval(merged_controller_loss(lp, lw, 0.0)) == 0.4);
  CHECK(eval(merged_controller_loss(lp, lw, 1.0)) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("shared-layer gradient of the merged loss combines both heads") {
  Rng rng(7);
  Rng init(8);
  Controllers c(2, 5, init);
  for (auto& v : c.shared_bias().value.values()) v = 0.5;
  Matrix x = random_matrix(6, c.input_width(), rng);
  std::vector<double> errors(6);
  for (auto& e : errors) e = rng.uniform();
  auto grads = [&](int which) {
    Tape t;
    auto b = c.bind(t);
    Var lp = loss_l2b(ad::affine(c.propagation_probability(b, t.constant(x)), -1.0, 1.0), errors);
    Var lw = loss_weight(c.priority_weight(b, t.constant(x)), errors, 0.5);
    Var root = which == 0 ? lp : which == 1 ? lw : merged_controller_loss(lp, lw, 2.0);
    t.backward(root);
    return c.shared_weight().grad;
  };
  Matrix gp = grads(0), gw = grads(1), gm = grads(2);
  double norm_p = 0.0, norm_w = 0.0;
  for (std::size_t i = 0; i < gm.size(); ++i) {
    CHECK(gm.values()[i] == doctest::Approx(gp.values()[i] - 2.0 * gw.values()[i]).epsilon(1e-12));
    norm_p += std::abs(gp.values()[i]);
    norm_w += std::abs(gw.values()[i]);
  }
  CHECK(norm_p > 0.0);
  CHECK(norm_w > 0.0);
}

TEST_CASE("weight head converges to clamp(C / (2 lambda1), 0, 1)") {
  const double l1 = 0.1;
  std::vector<double> c{0.02, 0.05, 0.12, 0.3};
  auto w = weight_fixed_point(c, l1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(w[i] - c[i] / (2 * l1)) < 1e-3);
  CHECK(w[3] > 0.95);
  std::vector<double> c2{0.3, 0.8, 1.5, 2.5};
  auto w2 = weight_fixed_point(c2, 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(w2[i] - c2[i] / 2.0) < 1e-3);
  CHECK(w2[3] > 0.95);
}

TEST_CASE("strategy names") {
  CHECK(parse_strategy("l2b") == Strategy::Break);
  CHECK(parse_strategy("l2u") == Strategy::Update);
  CHECK(to_string(Strategy::Update) == "l2u");
  CHECK_THROWS(parse_strategy("l2x"));
}
