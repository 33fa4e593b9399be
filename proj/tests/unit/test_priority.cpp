#include "doctest.h"
#include "fixtures.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "ppro/log.hpp"
#include "ppro/priority.hpp"

using namespace ppro;
using namespace ppro::testing;

namespace {

struct CaptureWarnings {
  std::vector<std::string> seen;
  CaptureWarnings() {
    set_warning_sink([this](const std::string& m) { seen.push_back(m); });
  }
  ~CaptureWarnings() { set_warning_sink(nullptr); }
};

NodeFeatures one_hot_rows(std::span<const int> hot, std::size_t dim) {
  NodeFeatures f(hot.size(), dim);
  for (std::size_t i = 0; i < hot.size(); ++i) f(i, static_cast<std::size_t>(hot[i])) = 1.0f;
  return f;
}

}  // namespace

TEST_CASE("degree centrality") {
  CHECK(degree_centrality(path_graph(3)) == std::vector<double>{1, 2, 1});
  CHECK(degree_centrality(clique(4)) == std::vector<double>{3, 3, 3, 3});
  CHECK(degree_centrality(star(3)) == std::vector<double>{3, 1, 1, 1});
  Rng rng(20);
  Graph g = random_graph(20, 0.2, rng);
  Eigen::VectorXd rows = to_eigen(dense_adjacency(g)).rowwise().sum();
  auto d = degree_centrality(g);
  for (std::size_t i = 0; i < 20; ++i) CHECK(d[i] == rows(static_cast<Eigen::Index>(i)));
}

TEST_CASE("eigenvector centrality: C4 is uniform") {
  auto ec = eigenvector_centrality(cycle_graph(4));
  CHECK(ec.converged);
  for (double v : ec.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("eigenvector centrality: P3") {
  auto ec = eigenvector_centrality(path_graph(3));
  CHECK(std::abs(ec.values[0] - 0.5) < 1e-6);
  CHECK(std::abs(ec.values[1] - std::sqrt(0.5)) < 1e-6);
  CHECK(std::abs(ec.values[2] - 0.5) < 1e-6);
}

TEST_CASE("eigenvector centrality matches the dense eigensolver") {
  Rng rng(50);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    Graph g = random_graph(n, rng.uniform(0.05, 0.5), rng, true);
    double lambda = 0.0;
    auto expected = dense_dominant_eigenvector(g, &lambda);
    auto ec = eigenvector_centrality(g);
    CHECK(ec.converged);
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err = std::max(err, std::abs(ec.values[i] - expected[i]));
      norm += ec.values[i] * ec.values[i];
      CHECK(ec.values[i] >= 0.0);
    }
    CHECK(err < 1e-6);
    CHECK(std::abs(norm - 1.0) < 1e-12);

    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(ec.values.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd av = to_eigen(dense_adjacency(g)) * v;
    CHECK((av - lambda * v).norm() / (lambda * v).norm() < 1e-5);
  }
}

TEST_CASE("eigenvector centrality permutes with the node labels") {
  Rng rng(77);
  Graph g = random_graph(15, 0.3, rng, true);
  std::vector<NodeId> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 14; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<Edge> relabeled;
  for (auto [a, b] : g.edges()) relabeled.emplace_back(perm[a], perm[b]);
  auto ec = eigenvector_centrality(g);
  auto ecp = eigenvector_centrality(build_graph(relabeled, 15));
  for (std::size_t i = 0; i < 15; ++i) CHECK(std::abs(ec.values[i] - ecp.values[perm[i]]) < 1e-9);
}

TEST_CASE("eigenvector centrality: edgeless graph warns and is uniform") {
  CaptureWarnings warnings;
  auto ec = eigenvector_centrality(build_graph({}, 4));
  for (double v : ec.values) CHECK(v == doctest::Approx(0.5));
  CHECK(warnings.seen.size() == 1);
}

TEST_CASE("eigenvector centrality: iteration cap flags non-convergence") {
  CaptureWarnings warnings;
  Rng rng(3);
  auto ec = eigenvector_centrality(random_graph(30, 0.2, rng, true), 1e-15, 2);
  CHECK_FALSE(ec.converged);
  CHECK(ec.iterations == 2);
  CHECK(warnings.seen.size() == 1);
}

TEST_CASE("heterophily degree: identical and orthogonal pairs") {
  Graph pair = path_graph(2);
  const int same[] = {0, 0};
  CHECK(heterophily_degree(pair, one_hot_rows(same, 3)) == std::vector<double>{0.0, 0.0});
  const int ortho[] = {0, 1};
  auto he = heterophily_degree(pair, one_hot_rows(ortho, 3));
  CHECK(he[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(he[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("heterophily degree: star with orthogonal center") {
  const int hot[] = {0, 1, 1, 1};
  auto he = heterophily_degree(star(3), one_hot_rows(hot, 2));
  for (double v : he) CHECK(v == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("heterophily degree normalizes rows and handles isolated nodes") {
  NodeFeatures f(3, 2);
  f(0, 0) = 5.0f;  // same direction as node 1 after normalization
  f(1, 0) = 0.5f;
  f(2, 1) = 2.0f;
  std::vector<Edge> e{{0, 1}};
  auto he = heterophily_degree(build_graph(e, 3), f);
  CHECK(he == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("heterophily degree warns on zero rows and stays bounded") {
  CaptureWarnings warnings;
  NodeFeatures f(3, 2);
  f(1, 0) = 1.0f;
  f(2, 1) = 1.0f;
  auto he = heterophily_degree(path_graph(3), f);
  CHECK(warnings.seen.size() == 1);
  CHECK(he[0] == doctest::Approx(1.0));

  Rng rng(31);
  Graph g = random_graph(40, 0.2, rng);
  auto hr = heterophily_degree(g, features_from(random_matrix(40, 6, rng)));
  for (double v : hr) {
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("build_priority: P3 center row") {
  const int hot[] = {0, 1, 0};
  NodeFeatures f = one_hot_rows(hot, 2);
  PriorityFeatures z = build_priority(path_graph(3), f);
  CHECK(z.raw(1, kDegreeColumn) == 2.0);
  CHECK(std::abs(z.raw(1, kEigenColumn) - std::sqrt(0.5)) < 1e-6);
  CHECK(z.raw(1, kHeteroColumn) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("build_priority: clique with identical features standardizes to zeros") {
  const int hot[] = {1, 1, 1, 1, 1};
  PriorityFeatures z = build_priority(clique(5), one_hot_rows(hot, 3));
  for (double v : z.standardized.values()) CHECK(v == 0.0);
}

TEST_CASE("build_priority: standardized columns have zero mean and unit variance; deterministic") {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    Graph g = random_graph(n, 0.15, rng, true);
    NodeFeatures f = features_from(random_matrix(n, 4, rng));
    PriorityFeatures z = build_priority(g, f);
    auto d = degrees(g);
    for (std::size_t i = 0; i < n; ++i) CHECK(z.raw(i, kDegreeColumn) == static_cast<double>(d[i]));
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0, var = 0.0;
      bool constant = true;
      for (std::size_t i = 0; i < n; ++i) {
        mean += z.standardized(i, c);
        constant = constant && z.raw(i, c) == z.raw(0, c);
      }
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) var += (z.standardized(i, c) - mean) * (z.standardized(i, c) - mean);
      var /= static_cast<double>(n);
      CHECK(std::abs(mean) < 1e-6);
      if (!constant) CHECK(std::abs(var - 1.0) < 1e-6);
    }
    PriorityFeatures again = build_priority(g, f);
    CHECK(again.raw == z.raw);
    CHECK(again.standardized == z.standardized);
  }
}
