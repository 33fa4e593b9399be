#include "ppro/controllers.hpp"

#include <algorithm>
#include <string>

#include "ppro/backbone.hpp"
#include "ppro/error.hpp"

namespace ppro {

std::string_view to_string(Strategy s) { return s == Strategy::Break ? "l2b" : "l2u"; }

Strategy parse_strategy(std::string_view text) {
  if (text == "l2b" || text == "L2B") return Strategy::Break;
  if (text == "l2u" || text == "L2U") return Strategy::Update;
  throw InputError("unknown strategy '" + std::string(text) + "' (expected l2b or l2u)");
}

std::size_t controller_input_width(std::size_t embedding_dim) { return 3 + 3 * embedding_dim + 1; }

namespace {

void copy_into(std::span<double> dst, std::size_t offset, std::span<const double> src) {
  std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace

Matrix propagation_input(Strategy strategy, const Matrix& z, const Matrix& h0, const Matrix& hk,
                         const Matrix& aggregate, const Matrix* best, std::span<const std::size_t> nodes,
                         InputMask mask) {
  const std::size_t h = h0.cols();
  PPRO_EXPECT(z.cols() == 3, "propagation_input: priority features must have 3 columns");
  PPRO_EXPECT(hk.cols() == h && aggregate.cols() == h, "propagation_input: embedding widths differ");
  PPRO_EXPECT(strategy == Strategy::Break || (best && best->cols() == h),
              "propagation_input: L2U rows need the running best embedding");
  Matrix out(nodes.size(), controller_input_width(h));
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const std::size_t i = nodes[r];
    auto row = out.row(r);
    if (mask.priority) copy_into(row, 0, z.row(i));
    copy_into(row, 3, h0.row(i));
    auto a = row.subspan(3 + h, h);
    auto hrow = hk.row(i);
    if (strategy == Strategy::Break) {
      std::copy(hrow.begin(), hrow.end(), a.begin());
    } else {
      auto brow = best->row(i);
      for (std::size_t c = 0; c < h; ++c) a[c] = hrow[c] - brow[c];
    }
    copy_into(row, 3 + 2 * h, aggregate.row(i));
  }
  return out;
}

Matrix weight_input(const Matrix& z, const Matrix& h0, const Matrix& best, std::span<const std::int32_t> depth,
                    int max_steps, std::span<const std::size_t> nodes, InputMask mask) {
  const std::size_t h = h0.cols();
  PPRO_EXPECT(best.cols() == h, "weight_input: embedding widths differ");
  PPRO_EXPECT(max_steps >= 1, "weight_input: L must be >= 1");
  Matrix out(nodes.size(), controller_input_width(h));
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const std::size_t i = nodes[r];
    auto row = out.row(r);
    if (mask.priority) copy_into(row, 0, z.row(i));
    copy_into(row, 3, h0.row(i));
    copy_into(row, 3 + h, best.row(i));
    if (mask.depth) row[3 + 3 * h] = static_cast<double>(depth[i]) / static_cast<double>(max_steps);
  }
  return out;
}

// ---------------------------------------------------------------- Controllers

Controllers::Controllers(std::size_t embedding_dim, int hidden, Rng& init_rng)
    : embedding_dim_(embedding_dim), hidden_(hidden) {
  PPRO_EXPECT(embedding_dim >= 1 && hidden >= 1, "Controllers: dimensions must be positive");
  const auto width = controller_input_width(embedding_dim);
  const auto hid = static_cast<std::size_t>(hidden);
  params_.push_back({"controller.Ws", glorot_uniform(width, hid, init_rng), {}});
  params_.push_back({"controller.bs", Matrix(1, hid), {}});
  params_.push_back({"controller.phi_p", glorot_uniform(hid, 1, init_rng), {}});
  params_.push_back({"controller.bp", Matrix(1, 1), {}});
  params_.push_back({"controller.phi_w", glorot_uniform(hid, 1, init_rng), {}});
  params_.push_back({"controller.bw", Matrix(1, 1), {}});
}

ParameterList Controllers::parameters() {
  ParameterList out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

Controllers::Bound Controllers::bind(Tape& tape) {
  return {tape.parameter(params_[0]), tape.parameter(params_[1]), tape.parameter(params_[2]),
          tape.parameter(params_[3]), tape.parameter(params_[4]), tape.parameter(params_[5])};
}

Controllers::Bound Controllers::bind_constant(Tape& tape) const {
  return {tape.constant(params_[0].value), tape.constant(params_[1].value), tape.constant(params_[2].value),
          tape.constant(params_[3].value), tape.constant(params_[4].value), tape.constant(params_[5].value)};
}

Var Controllers::propagation_probability(const Bound& b, Var input) const {
  PPRO_EXPECT(input.cols() == input_width(), "controller input has the wrong width");
  Var hidden = ad::relu(ad::add_row(ad::matmul(input, b.shared_w), b.shared_b));
  return ad::sigmoid(ad::add_row(ad::matmul(hidden, b.prop_w), b.prop_b));
}

Var Controllers::priority_weight(const Bound& b, Var input) const {
  PPRO_EXPECT(input.cols() == input_width(), "controller input has the wrong width");
  Var hidden = ad::relu(ad::add_row(ad::matmul(input, b.shared_w), b.shared_b));
  return ad::sigmoid(ad::add_row(ad::matmul(hidden, b.weight_w), b.weight_b));
}

std::vector<double> Controllers::propagation_probability(const Matrix& input) const {
  Tape tape;
  auto b = bind_constant(tape);
  auto v = propagation_probability(b, tape.constant(input)).value().values();
  return {v.begin(), v.end()};
}

std::vector<double> Controllers::priority_weight(const Matrix& input) const {
  Tape tape;
  auto b = bind_constant(tape);
  auto v = priority_weight(b, tape.constant(input)).value().values();
  return {v.begin(), v.end()};
}

// ---------------------------------------------------------------- decisions

std::vector<std::int32_t> decide_break(std::span<const std::vector<double>> step_probs, double epsilon) {
  PPRO_EXPECT(epsilon > 0.0 && epsilon < 1.0, "decide_break: epsilon must lie in (0, 1)");
  PPRO_EXPECT(!step_probs.empty(), "decide_break: need at least one step");
  const auto L = static_cast<std::int32_t>(step_probs.size());
  const std::size_t n = step_probs[0].size();
  std::vector<std::int32_t> depth(n, L);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::int32_t k = 1; k <= L; ++k) {
      PPRO_EXPECT(step_probs[static_cast<std::size_t>(k - 1)].size() == n, "decide_break: ragged probabilities");
      if (step_probs[static_cast<std::size_t>(k - 1)][i] > epsilon) {
        depth[i] = k;
        break;
      }
    }
  }
  return depth;
}

void UpdateSelection::advance(int k, std::span<const double> probs, const Matrix& hk,
                              std::span<const std::size_t> nodes, double epsilon) {
  PPRO_EXPECT(probs.size() == nodes.size(), "UpdateSelection: one probability per node");
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    if (probs[r] <= epsilon) continue;
    const std::size_t i = nodes[r];
    std::copy(hk.row(i).begin(), hk.row(i).end(), best.row(i).begin());
    depth[i] = k;
  }
}

UpdateSelection l2u_select(std::span<const std::vector<double>> step_probs, std::span<const Matrix> steps,
                           double epsilon) {
  PPRO_EXPECT(epsilon > 0.0 && epsilon < 1.0, "l2u_select: epsilon must lie in (0, 1)");
  PPRO_EXPECT(steps.size() == step_probs.size() + 1, "l2u_select: need H^(0..L) and L probability rows");
  UpdateSelection sel(steps[0]);
  std::vector<std::size_t> all(steps[0].rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t k = 1; k < steps.size(); ++k)
    sel.advance(static_cast<int>(k), step_probs[k - 1], steps[k], all, epsilon);
  return sel;
}

// ---------------------------------------------------------------- losses

Var loss_l2b(Var continue_prob, std::span<const double> errors, double delta) {
  PPRO_EXPECT(continue_prob.cols() == 1 && continue_prob.rows() == errors.size(),
              "loss_l2b: one continue probability per error");
  PPRO_EXPECT(!errors.empty(), "loss_l2b: empty training set");
  const auto [lo, hi] = std::minmax_element(errors.begin(), errors.end());
  const double range = std::max(*hi - *lo, delta);
  Matrix target(errors.size(), 1);
  for (std::size_t i = 0; i < errors.size(); ++i) target(i, 0) = (errors[i] - *lo) / range;
  Var t = continue_prob.tape->constant(std::move(target));
  return ad::mean(ad::abs(ad::sub(t, continue_prob)));
}

Var loss_l2u(Var update_prob, std::span<const double> step_errors, std::span<const double> running_best) {
  PPRO_EXPECT(update_prob.cols() == 1 && update_prob.rows() == step_errors.size() &&
                  step_errors.size() == running_best.size(),
              "loss_l2u: probabilities, step errors and running best must align");
  PPRO_EXPECT(!step_errors.empty(), "loss_l2u: empty input");
  Matrix gap(step_errors.size(), 1);
  for (std::size_t r = 0; r < step_errors.size(); ++r) gap(r, 0) = step_errors[r] - running_best[r];
  Var g = update_prob.tape->constant(std::move(gap));
  return ad::mean(ad::mul(update_prob, g));
}

Var loss_weight(Var weights, std::span<const double> errors, double lambda1) {
  PPRO_EXPECT(weights.cols() == 1 && weights.rows() == errors.size(), "loss_weight: one weight per error");
  PPRO_EXPECT(!errors.empty(), "loss_weight: empty training set");
  Var c = weights.tape->constant(Matrix::column(errors));
  const double inv_m = 1.0 / static_cast<double>(errors.size());
  Var fit = ad::scale(ad::sum(ad::mul(weights, c)), inv_m);
  Var penalty = ad::scale(ad::sum_sq(weights), lambda1 * inv_m);
  return ad::sub(fit, penalty);
}

Var merged_controller_loss(Var propagation_loss, Var weight_loss, double lambda2) {
  return ad::sub(propagation_loss, ad::scale(weight_loss, lambda2));
}

}  // namespace ppro
