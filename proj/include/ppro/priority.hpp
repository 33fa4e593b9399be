#pragma once

#include <vector>

#include "ppro/graph.hpp"
#include "ppro/matrix.hpp"
#include "ppro/node_data.hpp"

namespace ppro {

struct EigenvectorCentrality {
  std::vector<double> values;
  bool converged = false;
  int iterations = 0;
};

/// Column order of PriorityFeatures::raw / standardized.
enum PriorityColumn : std::size_t { kDegreeColumn = 0, kEigenColumn = 1, kHeteroColumn = 2 };

struct PriorityFeatures {
  Matrix raw;           // n x 3: [degree, eigenvector centrality, heterophily degree]
  Matrix standardized;  // column-wise (x - mean) / std; constant columns become 0
  bool eigen_converged = true;
};

std::vector<double> degree_centrality(const Graph& g);

/// Power iteration on (A + I) from the all-ones vector, L2-normalized each
/// round; stops once successive iterates differ by less than `tol` in L-inf.
/// The shift shares A's eigenvectors and keeps bipartite graphs from
/// oscillating. Warns and flags non-convergence; an edgeless graph yields the
/// uniform vector 1/sqrt(n).
EigenvectorCentrality eigenvector_centrality(const Graph& g, double tol = 1e-8, int max_iter = 1000);

/// he_i = || x_i - mean_{j in N(i)} x_j ||_2 over row-L2-normalized features.
/// Isolated nodes get 0; all-zero feature rows stay zero (with a warning).
std::vector<double> heterophily_degree(const Graph& g, const NodeFeatures& x);

PriorityFeatures build_priority(const Graph& g, const NodeFeatures& x);

}  // namespace ppro
