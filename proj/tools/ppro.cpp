// ppro: command-line front end for datasets, training, sweeps and exports.
#include <iomanip>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ppro/dataset.hpp"
#include "ppro/error.hpp"
#include "ppro/experiment.hpp"

namespace fs = std::filesystem;
using namespace ppro;

namespace {

void print_stats(const DatasetBundle& b) {
  std::cout << "nodes = " << b.graph.num_nodes() << '\n'
            << "edges = " << b.graph.num_edges() << '\n'
            << "features = " << b.features.dim() << '\n'
            << "classes = " << b.labels.num_classes << '\n'
            << "train = " << b.masks.train_nodes().size() << '\n'
            << "val = " << b.masks.val_nodes().size() << '\n'
            << "test = " << b.masks.test_nodes().size() << '\n'
            << std::setprecision(6) << "edge_homophily = " << edge_homophily(b.graph, b.labels) << '\n'
            << "provenance = " << b.provenance << '\n';
}

void print_result(const ExperimentResult& r) {
  std::cout << std::setprecision(6);
  if (r.sweep.empty()) {
    std::cout << "test_acc = " << r.test.mean << " +/- " << r.test.std << " over " << r.test.count << " runs\n";
  } else {
    for (const auto& [steps, a] : r.sweep)
      std::cout << "steps " << steps << ": test_acc = " << a.mean << " +/- " << a.std << '\n';
  }
  std::cout << "output = " << r.dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned propagation depth for graph neural networks"};
  app.require_subcommand(1);

  std::string dir, out, split = "planetoid", config, checkpoint;
  std::uint64_t split_seed = 0;
  SbmSpec sbm;

  auto* ingest = app.add_subcommand("ingest", "Load and validate a dataset directory and print statistics");
  ingest->add_option("dir", dir, "Dataset directory")->required();
  ingest->add_option("--split", split, "Split protocol used when masks.tsv is absent (planetoid|random)");
  ingest->add_option("--split-seed", split_seed, "Seed for a regenerated split");
  ingest->add_option("--out", out, "Write the normalized dataset to this directory");

  auto* synth = app.add_subcommand("synth", "Generate a stochastic block model dataset");
  synth->add_option("--n", sbm.n, "Number of nodes");
  synth->add_option("--blocks", sbm.blocks, "Number of blocks (classes)");
  synth->add_option("--p-in", sbm.p_in, "Intra-block edge probability");
  synth->add_option("--p-out", sbm.p_out, "Inter-block edge probability");
  synth->add_option("--dim", sbm.dim, "Feature dimension");
  synth->add_option("--separation", sbm.separation, "Distance between class feature means");
  synth->add_option("--informative", sbm.informative, "Fraction of nodes whose features carry the class signal");
  synth->add_option("--labels-per-class", sbm.labels_per_class, "Training labels per class");
  synth->add_option("--seed", sbm.seed, "Generator seed");
  synth->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Run an experiment config over its seeds");
  train->add_option("--config", config, "Experiment config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output root (default: $PPRO_OUTPUT or ppro_out)");

  auto* sweep = app.add_subcommand("sweep", "Grid search over the grid.* keys of a config");
  sweep->add_option("--config", config, "Experiment config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Output root (default: $PPRO_OUTPUT or ppro_out)");

  auto* exp = app.add_subcommand("export-priority", "Write priority features, weights and steps for a checkpoint");
  exp->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  exp->add_option("--config", config, "Config the checkpoint was trained with")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out, "Output directory (default: <output root>/<name>/export)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      DatasetBundle b = load_dataset(dir, parse_split_protocol(split), split_seed);
      print_stats(b);
      if (!out.empty()) save_dataset(b, out);
    } else if (*synth) {
      DatasetBundle b = generate_sbm(sbm);
      save_dataset(b, out);
      print_stats(b);
    } else if (*train || *sweep) {
      ExperimentConfig c = load_experiment_config(config);
      const fs::path root = out.empty() ? output_root() : fs::path(out);
      print_result(*train ? run_experiment(c, root) : run_sweep(c, root));
    } else if (*exp) {
      ExperimentConfig c = load_experiment_config(config);
      const fs::path target = out.empty() ? output_root() / c.name / "export" : fs::path(out);
      export_priority(c, checkpoint, target);
      std::cout << "output = " << target.string() << '\n';
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
