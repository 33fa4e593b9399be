// Small graphs, random instances and dense oracles shared by the test suites.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "ppro/graph.hpp"
#include "ppro/matrix.hpp"
#include "ppro/node_data.hpp"
#include "ppro/rng.hpp"

namespace ppro::testing {

inline Graph path_graph(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
  return build_graph(e, n);
}

inline Graph cycle_graph(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n));
  return build_graph(e, n);
}

inline Graph clique(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  return build_graph(e, n);
}

/// Star with center 0 and `spokes` leaves.
inline Graph star(std::size_t spokes) {
  std::vector<Edge> e;
  for (std::size_t i = 1; i <= spokes; ++i) e.emplace_back(0, static_cast<NodeId>(i));
  return build_graph(e, spokes + 1);
}

/// Erdos-Renyi graph; with `connected`, a random spanning tree is added first.
inline Graph random_graph(std::size_t n, double p, Rng& rng, bool connected = false) {
  std::vector<Edge> e;
  if (connected)
    for (std::size_t i = 1; i < n; ++i) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(rng.below(i)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  return build_graph(e, n);
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = scale * rng.normal();
  return m;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

/// Dense D~^{-1/2} (A + I) D~^{-1/2}, computed independently of normalize().
inline Eigen::MatrixXd dense_normalized(const Graph& g) {
  Eigen::MatrixXd a = to_eigen(dense_adjacency(g)) + Eigen::MatrixXd::Identity(g.num_nodes(), g.num_nodes());
  Eigen::VectorXd d = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * a * d.asDiagonal();
}

/// Dominant eigenvector of A via a symmetric eigensolver, sign-fixed nonnegative, unit norm.
inline std::vector<double> dense_dominant_eigenvector(const Graph& g, double* eigenvalue = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(dense_adjacency(g)));
  const Eigen::Index top = solver.eigenvalues().size() - 1;
  Eigen::VectorXd v = solver.eigenvectors().col(top);
  if (v.sum() < 0) v = -v;
  v /= v.norm();
  if (eigenvalue) *eigenvalue = solver.eigenvalues()(top);
  return {v.data(), v.data() + v.size()};
}

inline NodeFeatures features_from(const Matrix& m) {
  NodeFeatures f(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) f(i, j) = static_cast<float>(m(i, j));
  return f;
}

}  // namespace ppro::testing
