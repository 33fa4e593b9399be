#include "ppro/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "ppro/error.hpp"
#include "ppro/log.hpp"

namespace ppro {

void TrainConfig::validate() const {
  backbone.validate();
  PPRO_EXPECT(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  PPRO_EXPECT(lambda1 >= 0.0 && lambda2 >= 0.0, "lambda1 and lambda2 must be non-negative");
  PPRO_EXPECT(lr >= 0.0 && lr_controller >= 0.0, "learning rates must be non-negative");
  PPRO_EXPECT(weight_decay >= 0.0, "weight decay must be non-negative");
  PPRO_EXPECT(controller_hidden >= 1, "controller hidden width must be >= 1");
  PPRO_EXPECT(epochs >= 0 && patience >= 1, "epochs must be >= 0 and patience >= 1");
  PPRO_EXPECT(plain() || backbone.kind == BackboneKind::Appnp,
              "the propagation and weight controllers require the APPNP backbone");
}

Rng seed_stream(std::uint64_t seed, SeedStream stream) {
  return Rng(seed).derive(static_cast<std::uint64_t>(stream));
}

Problem make_problem(Graph graph, const NodeFeatures& features, Labels labels, SplitMasks masks) {
  const std::size_t n = graph.num_nodes();
  PPRO_EXPECT(features.num_nodes() == n, "make_problem: feature rows differ from node count");
  PPRO_EXPECT(labels.size() == n, "make_problem: label count differs from node count");
  masks.validate(n);
  Problem p;
  p.adjacency = normalize(graph);
  p.priority = build_priority(graph, features);
  p.features = std::make_shared<const Matrix>(features.to_matrix());
  p.graph = std::move(graph);
  p.labels = std::move(labels);
  p.train_nodes = masks.train_nodes();
  p.val_nodes = masks.val_nodes();
  p.test_nodes = masks.test_nodes();
  p.masks = std::move(masks);
  return p;
}

// ---------------------------------------------------------------- Trainer

struct Trainer::Forward {
  std::unique_ptr<Tape> tape = std::make_unique<Tape>();
  Backbone::Bound bound;
  PropagationTrace trace;

  std::vector<Matrix> step_values() const {
    std::vector<Matrix> out;
    for (const Var& v : trace.steps) out.push_back(v.value());
    return out;
  }
  std::vector<Matrix> aggregate_values() const {
    std::vector<Matrix> out;
    for (const Var& v : trace.aggregates) out.push_back(v.value());
    return out;
  }
};

namespace {

std::size_t controller_width(const TrainConfig& c) {
  return c.backbone.kind == BackboneKind::Appnp ? c.backbone.classes : static_cast<std::size_t>(c.backbone.hidden);
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, std::shared_ptr<const Problem> problem)
    : config_(config),
      problem_(std::move(problem)),
      backbone_([&] {
        config_.validate();
        Rng rng = seed_stream(config_.seed, SeedStream::BackboneInit);
        return Backbone(config_.backbone, rng);
      }()),
      controllers_([&] {
        Rng rng = seed_stream(config_.seed, SeedStream::ControllerInit);
        return Controllers(controller_width(config_), config_.controller_hidden, rng);
      }()),
      dropout_rng_(seed_stream(config_.seed, SeedStream::Dropout)),
      input_mask_{!config_.ablation.no_priority_input, !config_.ablation.no_depth_input} {
  PPRO_EXPECT(problem_ != nullptr, "Trainer needs a problem");
  PPRO_EXPECT(problem_->features->cols() == config_.backbone.in_dim, "feature width differs from backbone in_dim");
  PPRO_EXPECT(static_cast<std::size_t>(problem_->labels.num_classes) == config_.backbone.classes,
              "class count differs from backbone classes");
  PPRO_EXPECT(!problem_->train_nodes.empty(), "empty training set");
  backbone_opt_ = std::make_unique<Adam>(backbone_.parameters(),
                                         AdamConfig{config_.lr, 0.9, 0.999, 1e-8, config_.weight_decay});
  controller_opt_ = std::make_unique<Adam>(controllers_.parameters(), AdamConfig{config_.lr_controller});
}

ParameterList Trainer::parameters() {
  ParameterList out = backbone_.parameters();
  for (Parameter* p : controllers_.parameters()) out.push_back(p);
  return out;
}

Trainer::Forward Trainer::forward_values(Rng* dropout_rng, std::optional<std::span<const std::int32_t>> depth_bound) {
  Forward f;
  f.bound = backbone_.bind(*f.tape);
  Var x = f.tape->constant(problem_->features);
  f.trace = backbone_.run(problem_->adjacency, x, f.bound, dropout_rng, depth_bound);
  return f;
}

Trainer::Decisions Trainer::decide(const std::vector<Matrix>& steps, const std::vector<Matrix>& aggregates,
                                   std::span<const std::size_t> nodes) const {
  const int L = config_.backbone.steps;
  const Matrix& z = problem_->priority.standardized;
  const Matrix& h0 = steps[0];
  Decisions d;
  d.depth.assign(h0.rows(), L);

  if (config_.ablation.no_propagation_controller) {
    d.best = steps.back();
    return d;
  }

  if (config_.strategy == Strategy::Break) {
    std::vector<std::vector<double>> probs;
    for (int k = 1; k <= L; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      probs.push_back(controllers_.propagation_probability(
          propagation_input(Strategy::Break, z, h0, steps[ku], aggregates[ku - 1], nullptr, nodes, input_mask_)));
    }
    const auto local = decide_break(probs, config_.epsilon);
    d.best = steps.back();
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      const std::size_t i = nodes[r];
      d.depth[i] = local[r];
      const auto& src = steps[static_cast<std::size_t>(local[r])];
      std::copy(src.row(i).begin(), src.row(i).end(), d.best.row(i).begin());
    }
    return d;
  }

  UpdateSelection sel(h0);
  for (int k = 1; k <= L; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    Matrix input = propagation_input(Strategy::Update, z, h0, steps[ku], aggregates[ku - 1], &sel.best, nodes,
                                     input_mask_);
    const auto probs = controllers_.propagation_probability(input);
    d.update_inputs.push_back(std::move(input));
    sel.advance(k, probs, steps[ku], nodes, config_.epsilon);
  }
  d.best = std::move(sel.best);
  for (std::size_t i : nodes) d.depth[i] = sel.depth[i];
  return d;
}

EpochStats Trainer::train_epoch() {
  const Problem& P = *problem_;
  const auto& train = P.train_nodes;
  const auto& labels = P.labels.y;
  const int L = config_.backbone.steps;
  const Ablation& ab = config_.ablation;
  EpochStats stats;

  // Backbone step: decisions and weights from the current controllers are
  // constants; only theta receives gradient.
  {
    Forward f = forward_values(&dropout_rng_);
    Var embedding = f.trace.best;
    std::vector<double> weights;
    if (!config_.plain()) {
      const auto steps = f.step_values();
      const auto aggregates = f.aggregate_values();
      Decisions d = decide(steps, aggregates, train);
      if (!ab.no_propagation_controller) embedding = ad::pick_rows(f.trace.steps, d.depth);
      if (!ab.no_weight_controller)
        weights = controllers_.priority_weight(weight_input(P.priority.standardized, steps[0], d.best, d.depth, L,
                                                            train, input_mask_));
    }
    Var loss = ad::masked_nll(backbone_.logits(f.bound, embedding), labels, train, weights);
    f.tape->backward(loss);
    backbone_opt_->step();
    stats.loss_g = scalar_value(loss);
  }

  if (config_.plain()) return stats;

  // Controller step on a dropout-free pass with the updated backbone; all
  // backbone outputs and errors are constants here.
  Forward f = forward_values(nullptr);
  const auto steps = f.step_values();
  const auto aggregates = f.aggregate_values();
  Decisions d = decide(steps, aggregates, train);
  const auto errors = cross_entropy_rows(d.best, labels, train);

  Tape tape;
  auto cb = controllers_.bind(tape);
  std::optional<Var> loss_p;
  std::optional<Var> loss_w;
  if (!ab.no_propagation_controller) {
    if (config_.strategy == Strategy::Break) {
      Matrix input(train.size(), controllers_.input_width());
      for (std::size_t r = 0; r < train.size(); ++r) {
        const std::size_t i = train[r];
        const auto k = static_cast<std::size_t>(d.depth[i]);
        const std::size_t one[] = {i};
        Matrix row = propagation_input(Strategy::Break, P.priority.standardized, steps[0], steps[k],
                                       aggregates[k - 1], nullptr, one, input_mask_);
        std::copy(row.row(0).begin(), row.row(0).end(), input.row(r).begin());
      }
      Var p_break = controllers_.propagation_probability(cb, tape.constant(std::move(input)));
      loss_p = loss_l2b(ad::affine(p_break, -1.0, 1.0), errors);
    } else {
      // Step-major stacking of the inputs recorded during the scan, with the
      // error of H^(k) and of the running best before step k.
      const std::size_t m = train.size();
      Matrix stacked(m * static_cast<std::size_t>(L), controllers_.input_width());
      std::vector<double> step_errors;
      std::vector<double> best_errors;
      Matrix running = steps[0];
      for (int k = 1; k <= L; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const Matrix& in = d.update_inputs[ku - 1];
        std::copy(in.values().begin(), in.values().end(), stacked.row((ku - 1) * m).begin());
        const auto ck = cross_entropy_rows(steps[ku], labels, train);
        const auto cb_err = cross_entropy_rows(running, labels, train);
        step_errors.insert(step_errors.end(), ck.begin(), ck.end());
        best_errors.insert(best_errors.end(), cb_err.begin(), cb_err.end());
        // Replay the recorded decisions to advance the running best.
        const auto probs = controllers_.propagation_probability(in);
        UpdateSelection replay(running);
        replay.advance(k, probs, steps[ku], train, config_.epsilon);
        running = std::move(replay.best);
      }
      Var p_update = controllers_.propagation_probability(cb, tape.constant(std::move(stacked)));
      loss_p = loss_l2u(p_update, step_errors, best_errors);
    }
  }
  if (!ab.no_weight_controller) {
    Var w = controllers_.priority_weight(
        cb, tape.constant(weight_input(P.priority.standardized, steps[0], d.best, d.depth, L, train, input_mask_)));
    loss_w = loss_weight(w, errors, config_.lambda1);
  }
  Var total = loss_p && loss_w ? merged_controller_loss(*loss_p, *loss_w, config_.lambda2)
              : loss_p         ? *loss_p
                               : ad::scale(*loss_w, -config_.lambda2);
  tape.backward(total);
  controller_opt_->step();
  if (loss_p) stats.loss_p = scalar_value(*loss_p);
  if (loss_w) stats.loss_w = scalar_value(*loss_w);
  return stats;
}

Inference Trainer::infer() {
  const Problem& P = *problem_;
  const std::size_t n = P.num_nodes();
  const int L = config_.backbone.steps;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  Inference inf;
  Forward f = forward_values(nullptr);
  Matrix best;
  if (config_.ablation.no_propagation_controller) {
    inf.depth.assign(n, L);
    inf.logits = backbone_.logits(f.bound, f.trace.best).value();
    best = f.trace.best.value();
  } else {
    const auto steps = f.step_values();
    Decisions d = decide(steps, f.aggregate_values(), all);
    inf.depth = d.depth;
    if (config_.strategy == Strategy::Break) {
      Forward masked = forward_values(nullptr, std::span<const std::int32_t>(inf.depth));
      best = masked.trace.best.value();
    } else {
      best = std::move(d.best);
    }
    inf.logits = best;
  }
  inf.prediction = argmax_rows(inf.logits);

  if (config_.ablation.no_weight_controller || config_.backbone.kind != BackboneKind::Appnp) {
    inf.weight.assign(n, 1.0);
  } else {
    const Matrix& h0 = f.trace.steps[0].value();
    inf.weight = controllers_.priority_weight(
        weight_input(P.priority.standardized, h0, best, inf.depth, L, all, input_mask_));
  }
  return inf;
}

double Trainer::accuracy(const Inference& inf, std::span<const std::size_t> nodes) const {
  PPRO_EXPECT(!nodes.empty(), "accuracy over an empty node mask");
  std::size_t hit = 0;
  for (std::size_t i : nodes) hit += inf.prediction[i] == problem_->labels.y[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

double Trainer::evaluate(std::span<const std::size_t> nodes) {
  PPRO_EXPECT(!nodes.empty(), "evaluate over an empty node mask");
  return accuracy(infer(), nodes);
}

std::vector<Matrix> Trainer::snapshot() {
  std::vector<Matrix> out;
  for (Parameter* p : parameters()) out.push_back(p->value);
  return out;
}

void Trainer::restore(const std::vector<Matrix>& values) {
  auto params = parameters();
  PPRO_EXPECT(values.size() == params.size(), "restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

// ---------------------------------------------------------------- fit

TrainReport fit(const TrainConfig& config, std::shared_ptr<const Problem> problem) {
  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(config, problem);
  const Problem& P = *problem;
  const auto& select_nodes = P.val_nodes.empty() ? P.train_nodes : P.val_nodes;

  TrainReport report;
  report.seed = config.seed;
  double best_val = -1.0;
  std::vector<Matrix> best_params = trainer.snapshot();
  int since_best = 0;
  for (int e = 1; e <= config.epochs; ++e) {
    EpochStats s = trainer.train_epoch();
    s.epoch = e;
    const Inference inf = trainer.infer();
    s.train_acc = trainer.accuracy(inf, P.train_nodes);
    s.val_acc = trainer.accuracy(inf, select_nodes);
    report.epochs.push_back(s);
    if (s.val_acc > best_val) {
      best_val = s.val_acc;
      report.best_epoch = e;
      best_params = trainer.snapshot();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  trainer.restore(best_params);

  const Inference inf = trainer.infer();
  report.best_val_acc = config.epochs > 0 ? best_val : trainer.accuracy(inf, select_nodes);
  report.test_acc = P.test_nodes.empty() ? 0.0 : trainer.accuracy(inf, P.test_nodes);
  report.weight = inf.weight;
  report.depth = inf.depth;
  for (Parameter* p : trainer.parameters()) report.parameters.push_back({p->name, p->value, {}});
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
  out << "epoch,loss_g,loss_p,loss_w,train_acc,val_acc\n";
  out << std::setprecision(12);
  for (const auto& s : report.epochs)
    out << s.epoch << ',' << s.loss_g << ',' << s.loss_p << ',' << s.loss_w << ',' << s.train_acc << ','
        << s.val_acc << '\n';
}

void write_report_summary(std::ostream& out, const TrainReport& report) {
  out << std::setprecision(12);
  out << "seed = " << report.seed << '\n'
      << "epochs_run = " << report.epochs.size() << '\n'
      << "best_epoch = " << report.best_epoch << '\n'
      << "best_val_acc = " << report.best_val_acc << '\n'
      << "test_acc = " << report.test_acc << '\n'
      << "wall_seconds = " << std::setprecision(4) << report.wall_seconds << '\n';
}

// ---------------------------------------------------------------- grid search

GridResult grid_search(std::span<const TrainConfig> space, std::shared_ptr<const Problem> problem,
                       std::size_t budget) {
  PPRO_EXPECT(!space.empty(), "grid_search: empty search space");
  const std::size_t count = budget == 0 ? space.size() : std::min(budget, space.size());
  GridResult result;
  for (std::size_t i = 0; i < count; ++i) {
    if (auto outside = outside_search_grid(space[i]); !outside.empty()) {
      std::string names;
      for (const auto& s : outside) names += (names.empty() ? "" : ", ") + s;
      warn("config " + std::to_string(i) + " lies outside the reference search grid: " + names);
    }
    const TrainReport r = fit(space[i], problem);
    result.leaderboard.push_back({i, space[i], r.best_val_acc, r.test_acc});
  }
  std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                   [](const LeaderboardEntry& a, const LeaderboardEntry& b) { return a.val_acc > b.val_acc; });
  result.best = result.leaderboard.front().config;
  return result;
}

std::vector<std::string> outside_search_grid(const TrainConfig& c) {
  auto in_set = [](double v, std::initializer_list<double> set) {
    return std::any_of(set.begin(), set.end(), [v](double s) { return std::abs(v - s) <= 1e-12 * std::max(1.0, s); });
  };
  std::vector<std::string> out;
  if (!in_set(c.lr, {0.005, 0.01, 0.05, 0.1})) out.push_back("lr");
  if (c.backbone.dropout < 0.0 || c.backbone.dropout > 0.9) out.push_back("dropout");
  if (c.patience != 100 && c.patience != 200) out.push_back("patience");
  if (!in_set(c.weight_decay, {1e-5, 5e-4, 1e-4, 5e-3, 1e-3})) out.push_back("weight_decay");
  if (!in_set(c.lambda1, {0.01, 0.1, 1, 10, 100})) out.push_back("lambda1");
  if (!in_set(c.lambda2, {0.01, 0.1, 1, 10, 100})) out.push_back("lambda2");
  if (c.epsilon < 0.1 || c.epsilon > 0.9) out.push_back("epsilon");
  return out;
}

}  // namespace ppro
