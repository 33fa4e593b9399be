#include "ppro/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "ppro/error.hpp"

namespace ppro {

std::string_view to_string(BackboneKind kind) { return kind == BackboneKind::Appnp ? "appnp" : "gcn"; }

BackboneKind parse_backbone_kind(std::string_view text) {
  if (text == "appnp" || text == "APPNP") return BackboneKind::Appnp;
  if (text == "gcn" || text == "GCN") return BackboneKind::Gcn;
  throw InputError("unknown backbone '" + std::string(text) + "' (expected appnp or gcn)");
}

void BackboneConfig::validate() const {
  PPRO_EXPECT(steps >= 1, "backbone: steps L must be >= 1");
  PPRO_EXPECT(hidden >= 1, "backbone: hidden width must be >= 1");
  PPRO_EXPECT(alpha >= 0.0 && alpha <= 1.0, "backbone: alpha must lie in [0, 1]");
  PPRO_EXPECT(dropout >= 0.0 && dropout < 1.0, "backbone: dropout must lie in [0, 1)");
  PPRO_EXPECT(in_dim >= 1 && classes >= 1, "backbone: input and class dimensions must be set");
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (auto& v : w.values()) v = rng.uniform(-a, a);
  return w;
}

Backbone::Backbone(const BackboneConfig& config, Rng& init_rng) : config_(config) {
  config_.validate();
  const auto d = config_.in_dim;
  const auto h = static_cast<std::size_t>(config_.hidden);
  const auto c = config_.classes;
  if (config_.kind == BackboneKind::Appnp) {
    params_.push_back({"backbone.W1", glorot_uniform(d, h, init_rng), {}});
    params_.push_back({"backbone.b1", Matrix(1, h), {}});
    params_.push_back({"backbone.W2", glorot_uniform(h, c, init_rng), {}});
    params_.push_back({"backbone.b2", Matrix(1, c), {}});
  } else {
    for (int k = 1; k <= config_.steps; ++k)
      params_.push_back({"backbone.W" + std::to_string(k), glorot_uniform(k == 1 ? d : h, h, init_rng), {}});
    params_.push_back({"backbone.Wout", glorot_uniform(h, c, init_rng), {}});
    params_.push_back({"backbone.bout", Matrix(1, c), {}});
  }
}

ParameterList Backbone::parameters() {
  ParameterList out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t Backbone::embedding_dim() const {
  return config_.kind == BackboneKind::Appnp ? config_.classes : static_cast<std::size_t>(config_.hidden);
}

Backbone::Bound Backbone::bind(Tape& tape) {
  Bound b;
  for (auto& p : params_) b.params.push_back(tape.parameter(p));
  return b;
}

Var Backbone::encode(const Bound& bound, Var x, Rng* dropout_rng) const {
  PPRO_EXPECT(x.cols() == config_.in_dim, "encode: feature width differs from configured input dimension");
  if (config_.kind == BackboneKind::Gcn) return x;
  const double rate = dropout_rng ? config_.dropout : 0.0;
  Var h = x;
  if (rate > 0.0) h = ad::dropout(h, rate, *dropout_rng);
  h = ad::relu(ad::add_row(ad::matmul(h, bound.params[0]), bound.params[1]));
  if (rate > 0.0) h = ad::dropout(h, rate, *dropout_rng);
  return ad::add_row(ad::matmul(h, bound.params[2]), bound.params[3]);
}

std::pair<Var, Var> Backbone::propagate_step(const NormalizedAdjacency& adj, Var prev, Var h0, const Bound& bound,
                                             int k, Rng* dropout_rng) const {
  PPRO_EXPECT(k >= 1 && k <= config_.steps, "propagate_step: k outside [1, L]");
  if (config_.kind == BackboneKind::Appnp) {
    Var aggregate = ad::spmm(adj, prev);
    Var next = ad::add(ad::scale(aggregate, 1.0 - config_.alpha), ad::scale(h0, config_.alpha));
    return {aggregate, next};
  }
  Var input = prev;
  if (dropout_rng && config_.dropout > 0.0) input = ad::dropout(input, config_.dropout, *dropout_rng);
  Var aggregate = ad::spmm(adj, input);
  Var next = ad::matmul(aggregate, bound.params[static_cast<std::size_t>(k - 1)]);
  if (k < config_.steps) next = ad::relu(next);
  return {aggregate, next};
}

PropagationTrace Backbone::run(const NormalizedAdjacency& adj, Var x, const Bound& bound, Rng* dropout_rng,
                               std::optional<std::span<const std::int32_t>> depth_bound) const {
  const std::size_t n = x.rows();
  PPRO_EXPECT(adj.num_nodes() == n, "run: adjacency and feature rows disagree");
  const int L = config_.steps;
  if (depth_bound) {
    PPRO_EXPECT(config_.kind == BackboneKind::Appnp, "run: per-node depth bounds need the APPNP backbone");
    PPRO_EXPECT(depth_bound->size() == n, "run: one depth bound per node required");
    for (auto l : *depth_bound) PPRO_EXPECT(l >= 0 && l <= L, "run: depth bound outside [0, L]");
  }

  PropagationTrace trace;
  Var h0 = encode(bound, x, dropout_rng);
  trace.steps.push_back(h0);
  std::vector<std::int32_t> keep(n);
  for (int k = 1; k <= L; ++k) {
    auto [aggregate, next] = propagate_step(adj, trace.steps.back(), h0, bound, k, dropout_rng);
    if (depth_bound) {
      for (std::size_t i = 0; i < n; ++i) keep[i] = k <= (*depth_bound)[i] ? 1 : 0;
      const Var layers[] = {trace.steps.back(), next};
      next = ad::pick_rows(layers, keep);
    }
    trace.aggregates.push_back(aggregate);
    trace.steps.push_back(next);
  }
  trace.best = trace.steps.back();
  if (depth_bound)
    trace.depth.assign(depth_bound->begin(), depth_bound->end());
  else
    trace.depth.assign(n, L);
  return trace;
}

Var Backbone::logits(const Bound& bound, Var embedding) const {
  if (config_.kind == BackboneKind::Appnp) return embedding;
  const std::size_t head = static_cast<std::size_t>(config_.steps);
  return ad::add_row(ad::matmul(embedding, bound.params[head]), bound.params[head + 1]);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto x = logits.row(i);
    auto y = p.row(i);
    const double mx = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) z += (y[j] = std::exp(x[j] - mx));
    for (auto& v : y) v /= z;
  }
  return p;
}

std::vector<std::int32_t> argmax_rows(const Matrix& m) {
  std::vector<std::int32_t> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    out[i] = static_cast<std::int32_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

std::vector<double> cross_entropy_rows(const Matrix& logits, std::span<const std::int32_t> labels,
                                       std::span<const std::size_t> nodes) {
  std::vector<double> out;
  out.reserve(nodes.size());
  for (std::size_t i : nodes) {
    auto x = logits.row(i);
    const double mx = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (double v : x) z += std::exp(v - mx);
    out.push_back(mx + std::log(z) - x[static_cast<std::size_t>(labels[i])]);
  }
  return out;
}

}  // namespace ppro
