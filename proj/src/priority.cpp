#include "ppro/priority.hpp"

#include <algorithm>
#include <cmath>

#include "ppro/error.hpp"
#include "ppro/log.hpp"

namespace ppro {

std::vector<double> degree_centrality(const Graph& g) {
  std::vector<double> d(g.num_nodes());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(g.degree(static_cast<NodeId>(i)));
  return d;
}

EigenvectorCentrality eigenvector_centrality(const Graph& g, double tol, int max_iter) {
  const std::size_t n = g.num_nodes();
  EigenvectorCentrality out;
  if (n == 0) {
    out.converged = true;
    return out;
  }
  if (g.num_edges() == 0) {
    warn("eigenvector centrality of an edgeless graph; returning the uniform vector");
    out.values.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
    out.converged = true;
    return out;
  }

  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> next(n);
  for (int it = 1; it <= max_iter; ++it) {
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = x[i];
      for (NodeId j : g.neighbors(static_cast<NodeId>(i))) s += x[static_cast<std::size_t>(j)];
      next[i] = s;
      norm += s * s;
    }
    norm = std::sqrt(norm);
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= norm;
      delta = std::max(delta, std::abs(next[i] - x[i]));
    }
    x.swap(next);
    out.iterations = it;
    if (delta < tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged)
    warn("eigenvector centrality did not converge in " + std::to_string(max_iter) + " iterations");
  out.values = std::move(x);
  return out;
}

std::vector<double> heterophily_degree(const Graph& g, const NodeFeatures& x) {
  const std::size_t n = g.num_nodes();
  PPRO_EXPECT(x.num_nodes() == n, "heterophily_degree: feature rows differ from node count");
  const std::size_t dim = x.dim();

  Matrix h(n, dim);
  std::size_t zero_rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto src = x.row(i);
    double norm = 0.0;
    for (float v : src) norm += static_cast<double>(v) * static_cast<double>(v);
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      ++zero_rows;
      continue;
    }
    auto dst = h.row(i);
    for (std::size_t j = 0; j < dim; ++j) dst[j] = static_cast<double>(src[j]) / norm;
  }
  if (zero_rows > 0)
    warn(std::to_string(zero_rows) + " node(s) have all-zero features; treated as zero vectors");

  std::vector<double> he(n, 0.0);
  std::vector<double> agg(dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto nbrs = g.neighbors(static_cast<NodeId>(i));
    if (nbrs.empty()) continue;
    std::fill(agg.begin(), agg.end(), 0.0);
    for (NodeId j : nbrs) {
      auto r = h.row(static_cast<std::size_t>(j));
      for (std::size_t c = 0; c < dim; ++c) agg[c] += r[c];
    }
    const double inv = 1.0 / static_cast<double>(nbrs.size());
    auto self = h.row(i);
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double diff = self[c] - agg[c] * inv;
      s += diff * diff;
    }
    he[i] = std::sqrt(s);
  }
  return he;
}

PriorityFeatures build_priority(const Graph& g, const NodeFeatures& x) {
  const std::size_t n = g.num_nodes();
  const auto degree = degree_centrality(g);
  const auto eigen = eigenvector_centrality(g);
  const auto hetero = heterophily_degree(g, x);

  PriorityFeatures z;
  z.eigen_converged = eigen.converged;
  z.raw = Matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    z.raw(i, kDegreeColumn) = degree[i];
    z.raw(i, kEigenColumn) = eigen.values[i];
    z.raw(i, kHeteroColumn) = hetero[i];
  }

  z.standardized = Matrix(n, 3);
  if (n == 0) return z;
  for (std::size_t c = 0; c < 3; ++c) {
    double lo = z.raw(0, c);
    double hi = lo;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, z.raw(i, c));
      hi = std::max(hi, z.raw(i, c));
      mean += z.raw(i, c);
    }
    if (lo == hi) continue;  // constant column stays all zeros
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (z.raw(i, c) - mean) * (z.raw(i, c) - mean);
    const double sd = std::max(std::sqrt(var / static_cast<double>(n)), 1e-12);
    for (std::size_t i = 0; i < n; ++i) z.standardized(i, c) = (z.raw(i, c) - mean) / sd;
  }
  return z;
}

}  // namespace ppro
