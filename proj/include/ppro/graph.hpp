#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppro/matrix.hpp"

namespace ppro {

using NodeId = std::int32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected simple graph in CSR form. Each edge is stored in both
/// directions; rows are sorted and duplicate-free; there are no self-loops.
/// Immutable once built.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const { return row_offsets_.empty() ? 0 : row_offsets_.size() - 1; }
  /// Undirected edge count (each edge counted once).
  std::size_t num_edges() const { return col_indices_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId i) const {
    return {col_indices_.data() + row_offsets_[i],
            static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }
  std::size_t degree(NodeId i) const { return static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i]); }

  std::span<const std::int64_t> row_offsets() const { return row_offsets_; }
  std::span<const NodeId> col_indices() const { return col_indices_; }

  /// Each undirected edge once, with src < dst, in row-major order.
  std::vector<Edge> edges() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  friend Graph build_graph(std::span<const Edge> edges, std::size_t n);
  std::vector<std::int64_t> row_offsets_{0};
  std::vector<NodeId> col_indices_;
};

/// Canonicalizes an arbitrary edge list: drops self-loops and duplicates and
/// symmetrizes. Throws InputError on ids outside [0, n).
Graph build_graph(std::span<const Edge> edges, std::size_t n);

/// Raw degrees d_i = sum_j A_ij (self-loops excluded).
std::vector<std::int64_t> degrees(const Graph& g);

/// D~^{-1/2} (A + I) D~^{-1/2} in CSR, where D~ counts the added self-loop.
/// Isolated nodes end up with a unit self-loop.
class NormalizedAdjacency {
 public:
  std::size_t num_nodes() const { return row_offsets_.size() - 1; }
  std::size_t nnz() const { return col_indices_.size(); }

  std::span<const std::int64_t> row_offsets() const { return row_offsets_; }
  std::span<const NodeId> col_indices() const { return col_indices_; }
  std::span<const double> weights() const { return weights_; }

  Matrix to_dense() const;

 private:
  friend NormalizedAdjacency normalize(const Graph& g);
  std::vector<std::int64_t> row_offsets_{0};
  std::vector<NodeId> col_indices_;
  std::vector<double> weights_;
};

NormalizedAdjacency normalize(const Graph& g);

/// out_i = sum_j weight(i,j) * h_j, accumulated in column order per row.
Matrix spmm(const NormalizedAdjacency& adj, const Matrix& h);

Matrix dense_adjacency(const Graph& g);

/// Reads `src<TAB>dst` lines; blank lines and `#` comments are skipped. Any
/// whitespace separates the two ids. `source` names the input in errors.
std::vector<Edge> read_edge_list(std::istream& in, const std::string& source);
Graph read_graph(std::istream& in, std::size_t n, const std::string& source);
void write_edge_list(std::ostream& out, const Graph& g);

}  // namespace ppro
