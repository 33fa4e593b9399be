#include "ppro/experiment.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "ppro/checkpoint.hpp"
#include "ppro/error.hpp"
#include "ppro/log.hpp"

namespace ppro {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = value.find(',', pos);
    std::string item = trim(std::string_view(value).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw InputError("bad value '" + value + "' for " + key + " (expected " + expected + ")");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return to_int<std::size_t>(key, v); }

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

// Keys that only affect training; the only ones a grid may vary.
const std::set<std::string>& training_keys() {
  static const std::set<std::string> keys{"strategy", "backbone",     "steps",        "hidden",
                                          "alpha",    "dropout",      "epsilon",      "lambda1",
                                          "lambda2",  "lr",           "lr_controller", "weight_decay",
                                          "controller_hidden", "epochs", "patience",   "ablation"};
  return keys;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream os;
  fn(os);
  write_file(path, os.str());
}

std::string strategy_name(const ExperimentConfig& c) {
  return c.plain ? "none" : std::string(to_string(c.train.strategy));
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? "," : "") + std::to_string(seeds[i]);
  return out;
}

bool needs_resplit(const ExperimentConfig& c) {
  if (c.uses_sbm() || c.split != SplitProtocol::Random) return false;
  fs::path dir = c.dataset;
  if (dir.is_relative() && !c.base_dir.empty()) dir = c.base_dir / dir;
  return !fs::exists(dir / "masks.tsv");
}

}  // namespace

// ---------------------------------------------------------------- config

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  TrainConfig& t = c.train;
  if (key == "name") {
    if (value.empty() || value.find('/') != std::string::npos) bad_value(key, value, "a plain name");
    c.name = value;
  } else if (key == "dataset") {
    c.dataset = value;
  } else if (key == "sbm.n") {
    c.sbm.n = to_size(key, value);
  } else if (key == "sbm.blocks") {
    c.sbm.blocks = to_size(key, value);
  } else if (key == "sbm.p_in") {
    c.sbm.p_in = to_double(key, value);
  } else if (key == "sbm.p_out") {
    c.sbm.p_out = to_double(key, value);
  } else if (key == "sbm.dim") {
    c.sbm.dim = to_size(key, value);
  } else if (key == "sbm.separation") {
    c.sbm.separation = to_double(key, value);
  } else if (key == "sbm.informative") {
    c.sbm.informative = to_double(key, value);
  } else if (key == "sbm.labels_per_class") {
    c.sbm.labels_per_class = to_size(key, value);
  } else if (key == "sbm.seed") {
    c.sbm.seed = to_int<std::uint64_t>(key, value);
  } else if (key == "split") {
    c.split = parse_split_protocol(value);
  } else if (key == "split_seed") {
    c.split_seed = to_int<std::uint64_t>(key, value);
  } else if (key == "strategy") {
    if (value == "none") {
      c.plain = true;
    } else {
      c.plain = false;
      t.strategy = parse_strategy(value);
    }
  } else if (key == "backbone") {
    t.backbone.kind = parse_backbone_kind(value);
  } else if (key == "steps") {
    t.backbone.steps = to_int<int>(key, value);
  } else if (key == "hidden") {
    t.backbone.hidden = to_int<int>(key, value);
  } else if (key == "alpha") {
    t.backbone.alpha = to_double(key, value);
  } else if (key == "dropout") {
    t.backbone.dropout = to_double(key, value);
  } else if (key == "epsilon") {
    t.epsilon = to_double(key, value);
  } else if (key == "lambda1") {
    t.lambda1 = to_double(key, value);
  } else if (key == "lambda2") {
    t.lambda2 = to_double(key, value);
  } else if (key == "lr") {
    t.lr = to_double(key, value);
  } else if (key == "lr_controller") {
    t.lr_controller = to_double(key, value);
  } else if (key == "weight_decay") {
    t.weight_decay = to_double(key, value);
  } else if (key == "controller_hidden") {
    t.controller_hidden = to_int<int>(key, value);
  } else if (key == "epochs") {
    t.epochs = to_int<int>(key, value);
  } else if (key == "patience") {
    t.patience = to_int<int>(key, value);
  } else if (key == "ablation") {
    t.ablation = Ablation{};
    for (const auto& item : split_list(value)) {
      if (item == "none") continue;
      if (item == "nw")
        t.ablation.no_weight_controller = true;
      else if (item == "np")
        t.ablation.no_propagation_controller = true;
      else if (item == "nz")
        t.ablation.no_priority_input = true;
      else if (item == "nl")
        t.ablation.no_depth_input = true;
      else
        bad_value(key, value, "a list of nw, np, nz, nl or none");
    }
  } else if (key == "seeds") {
    c.seeds.clear();
    for (const auto& item : split_list(value)) c.seeds.push_back(to_int<std::uint64_t>(key, item));
    if (c.seeds.empty()) bad_value(key, value, "at least one seed");
  } else if (key == "seed") {
    const auto first = to_int<std::uint64_t>(key, value);
    const std::size_t count = c.seeds.size();
    c.seeds.resize(count);
    for (std::size_t i = 0; i < count; ++i) c.seeds[i] = first + i;
  } else if (key == "repeat") {
    const auto count = to_size(key, value);
    if (count == 0) bad_value(key, value, "a positive count");
    const std::uint64_t first = c.seeds.empty() ? 0 : c.seeds.front();
    c.seeds.resize(count);
    for (std::size_t i = 0; i < count; ++i) c.seeds[i] = first + i;
  } else if (key == "depth_sweep") {
    c.depth_sweep = to_bool(key, value);
  } else if (key == "depths") {
    c.depths.clear();
    for (const auto& item : split_list(value)) c.depths.push_back(to_int<int>(key, item));
    if (c.depths.empty()) bad_value(key, value, "at least one depth");
  } else if (key == "budget") {
    c.budget = to_size(key, value);
  } else if (key.rfind("grid.", 0) == 0) {
    const std::string inner = key.substr(5);
    if (!training_keys().count(inner)) throw InputError("grid key '" + inner + "' is not a training setting");
    auto values = split_list(value);
    if (values.empty()) bad_value(key, value, "a comma-separated list");
    ExperimentConfig scratch = c;
    for (const auto& v : values) apply_setting(scratch, inner, v);
    c.grid.emplace_back(inner, std::move(values));
  } else {
    throw InputError("unknown setting '" + key + "'");
  }
}

ExperimentConfig parse_experiment_config(std::istream& in, const std::string& source) {
  ExperimentConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw InputError(source + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(c, trim(std::string_view(text).substr(0, eq)), trim(std::string_view(text).substr(eq + 1)));
    } catch (const InputError& e) {
      throw InputError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot read config " + file.string());
  ExperimentConfig c = parse_experiment_config(in, file.string());
  c.base_dir = file.parent_path();
  return c;
}

fs::path output_root() {
  const char* env = std::getenv("PPRO_OUTPUT");
  return env && *env ? fs::path(env) : fs::path("ppro_out");
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

// ---------------------------------------------------------------- runs

DatasetBundle experiment_dataset(const ExperimentConfig& c, std::size_t index) {
  if (c.uses_sbm()) return generate_sbm(c.sbm);
  fs::path dir = c.dataset;
  if (dir.is_relative() && !c.base_dir.empty()) dir = c.base_dir / dir;
  const std::uint64_t split_seed = needs_resplit(c) ? c.split_seed + index : c.split_seed;
  return load_dataset(dir, c.split, split_seed);
}

TrainConfig experiment_train_config(const ExperimentConfig& c, const DatasetBundle& bundle, std::uint64_t seed) {
  TrainConfig t = c.train;
  t.backbone.in_dim = bundle.features.dim();
  t.backbone.classes = static_cast<std::size_t>(bundle.labels.num_classes);
  t.seed = seed;
  if (c.plain) {
    t.ablation.no_weight_controller = true;
    t.ablation.no_propagation_controller = true;
  }
  return t;
}

void write_priority_tsv(std::ostream& out, const PriorityFeatures& priority) {
  out << "node_id\tdegree\teigcen\thetero\n" << std::setprecision(10);
  for (std::size_t i = 0; i < priority.raw.rows(); ++i)
    out << i << '\t' << priority.raw(i, kDegreeColumn) << '\t' << priority.raw(i, kEigenColumn) << '\t'
        << priority.raw(i, kHeteroColumn) << '\n';
}

void write_nodes_tsv(std::ostream& out, std::span<const double> weight, std::span<const std::int32_t> depth) {
  PPRO_EXPECT(weight.size() == depth.size(), "write_nodes_tsv: weight and depth sizes differ");
  out << "node_id\tweight\tstep\n" << std::setprecision(10);
  for (std::size_t i = 0; i < weight.size(); ++i) out << i << '\t' << weight[i] << '\t' << depth[i] << '\n';
}

void write_graph_dot(std::ostream& out, const Graph& g, const Labels& labels, std::span<const double> weight,
                     std::span<const std::int32_t> depth) {
  PPRO_EXPECT(weight.size() == g.num_nodes() && depth.size() == g.num_nodes() && labels.size() == g.num_nodes(),
              "write_graph_dot: one weight, step and label per node required");
  out << "graph ppro {\n" << std::setprecision(6);
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    out << "  " << i << " [label=" << labels.y[i] << ", weight=" << weight[i] << ", step=" << depth[i] << "];\n";
  for (auto [a, b] : g.edges()) out << "  " << a << " -- " << b << ";\n";
  out << "}\n";
}

namespace {

struct DepthRun {
  std::vector<TrainReport> runs;
  Aggregate test;
  Aggregate val;
};

DepthRun run_depth(const ExperimentConfig& c, int steps, const fs::path& dir) {
  fs::create_directories(dir);
  DepthRun out;
  const bool resplit = needs_resplit(c);
  std::shared_ptr<const Problem> problem;
  DatasetBundle bundle;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    if (!problem || resplit) {
      bundle = experiment_dataset(c, i);
      problem = std::make_shared<const Problem>(make_problem(bundle.graph, bundle.features, bundle.labels, bundle.masks));
    }
    TrainConfig t = experiment_train_config(c, bundle, c.seeds[i]);
    t.backbone.steps = steps;
    TrainReport r = fit(t, problem);

    const std::string stem = "run_" + std::to_string(c.seeds[i]);
    write_with(dir / (stem + ".csv"), [&](std::ostream& os) { write_report_csv(os, r); });
    write_with(dir / (stem + ".summary.txt"), [&](std::ostream& os) { write_report_summary(os, r); });
    write_with(dir / (stem + ".nodes.tsv"), [&](std::ostream& os) { write_nodes_tsv(os, r.weight, r.depth); });
    ParameterList params;
    for (auto& p : r.parameters) params.push_back(&p);
    save_checkpoint(dir / (stem + ".ckpt"), params);
    if (i == 0) {
      write_with(dir / "priority.tsv", [&](std::ostream& os) { write_priority_tsv(os, problem->priority); });
      write_with(dir / "graph.dot",
                 [&](std::ostream& os) { write_graph_dot(os, problem->graph, problem->labels, r.weight, r.depth); });
    }
    out.runs.push_back(std::move(r));
  }
  std::vector<double> tests, vals;
  for (const auto& r : out.runs) {
    tests.push_back(r.test_acc);
    vals.push_back(r.best_val_acc);
  }
  out.test = aggregate(tests);
  out.val = aggregate(vals);

  write_with(dir / "summary.txt", [&](std::ostream& os) {
    os << "name = " << c.name << '\n'
       << "dataset = " << c.dataset << '\n'
       << "provenance = " << bundle.provenance << '\n'
       << "strategy = " << strategy_name(c) << '\n'
       << "backbone = " << to_string(c.train.backbone.kind) << '\n'
       << "steps = " << steps << '\n'
       << "runs = " << out.runs.size() << '\n'
       << "seeds = " << join_seeds(c.seeds) << '\n'
       << std::setprecision(17);
    for (const auto& r : out.runs) os << "test_acc[" << r.seed << "] = " << r.test_acc << '\n';
    os << "test_acc_mean = " << out.test.mean << '\n'
       << "test_acc_std = " << out.test.std << '\n'
       << "val_acc_mean = " << out.val.mean << '\n'
       << "val_acc_std = " << out.val.std << '\n';
  });
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& c, const fs::path& out_root) {
  PPRO_EXPECT(!c.seeds.empty(), "run_experiment: no seeds");
  ExperimentResult result;
  result.dir = out_root / c.name;
  fs::create_directories(result.dir);
  const fs::path marker = result.dir / "FAILED";
  fs::remove(marker);
  try {
    if (!c.depth_sweep) {
      DepthRun d = run_depth(c, c.train.backbone.steps, result.dir);
      result.runs = std::move(d.runs);
      result.test = d.test;
    } else {
      for (int steps : c.depths) {
        DepthRun d = run_depth(c, steps, result.dir / ("steps_" + std::to_string(steps)));
        result.sweep.emplace_back(steps, d.test);
        for (auto& r : d.runs) result.runs.push_back(std::move(r));
      }
      write_with(result.dir / "depth_sweep.csv", [&](std::ostream& os) {
        os << "steps,test_acc_mean,test_acc_std,runs\n" << std::setprecision(12);
        for (const auto& [steps, a] : result.sweep) os << steps << ',' << a.mean << ',' << a.std << ',' << a.count << '\n';
      });
    }
  } catch (const std::exception& e) {
    write_file(marker, std::string(e.what()) + "\n");
    throw;
  }
  return result;
}

ExperimentResult run_sweep(const ExperimentConfig& c, const fs::path& out_root) {
  PPRO_EXPECT(!c.seeds.empty(), "run_sweep: no seeds");
  const fs::path dir = out_root / c.name;
  fs::create_directories(dir);

  // Cartesian product, last grid key varying fastest.
  std::vector<std::vector<std::size_t>> combos{{}};
  for (const auto& [key, values] : c.grid) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& prefix : combos)
      for (std::size_t v = 0; v < values.size(); ++v) {
        next.push_back(prefix);
        next.back().push_back(v);
      }
    combos = std::move(next);
  }
  auto configure = [&](const std::vector<std::size_t>& combo) {
    ExperimentConfig e = c;
    for (std::size_t k = 0; k < combo.size(); ++k) apply_setting(e, c.grid[k].first, c.grid[k].second[combo[k]]);
    return e;
  };

  DatasetBundle bundle = experiment_dataset(c, 0);
  auto problem = std::make_shared<const Problem>(make_problem(bundle.graph, bundle.features, bundle.labels, bundle.masks));
  std::vector<TrainConfig> space;
  for (const auto& combo : combos) space.push_back(experiment_train_config(configure(combo), bundle, c.seeds.front()));
  GridResult grid = grid_search(space, problem, c.budget);

  write_with(dir / "leaderboard.csv", [&](std::ostream& os) {
    os << "rank,config_index,val_acc,test_acc";
    for (const auto& [key, values] : c.grid) os << ',' << key;
    os << '\n' << std::setprecision(12);
    for (std::size_t r = 0; r < grid.leaderboard.size(); ++r) {
      const auto& e = grid.leaderboard[r];
      os << r + 1 << ',' << e.config_index << ',' << e.val_acc << ',' << e.test_acc;
      for (std::size_t k = 0; k < c.grid.size(); ++k) os << ',' << c.grid[k].second[combos[e.config_index][k]];
      os << '\n';
    }
  });

  ExperimentConfig best = configure(combos[grid.leaderboard.front().config_index]);
  best.name = "best";
  best.depth_sweep = false;
  return run_experiment(best, dir);
}

void export_priority(const ExperimentConfig& c, const fs::path& checkpoint, const fs::path& out_dir) {
  DatasetBundle bundle = experiment_dataset(c, 0);
  auto problem = std::make_shared<const Problem>(make_problem(bundle.graph, bundle.features, bundle.labels, bundle.masks));
  Trainer trainer(experiment_train_config(c, bundle, c.seeds.front()), problem);
  assign_checkpoint(load_checkpoint(checkpoint), trainer.parameters());
  const Inference inf = trainer.infer();
  fs::create_directories(out_dir);
  write_with(out_dir / "priority.tsv", [&](std::ostream& os) { write_priority_tsv(os, problem->priority); });
  write_with(out_dir / "nodes.tsv", [&](std::ostream& os) { write_nodes_tsv(os, inf.weight, inf.depth); });
  write_with(out_dir / "graph.dot",
             [&](std::ostream& os) { write_graph_dot(os, problem->graph, problem->labels, inf.weight, inf.depth); });
}

}  // namespace ppro
