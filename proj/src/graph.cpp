#include "ppro/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "ppro/error.hpp"

namespace ppro {

Graph build_graph(std::span<const Edge> edges, std::size_t n) {
  std::vector<std::vector<NodeId>> adjacency(n);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto [u, v] = edges[k];
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
      std::ostringstream os;
      os << "edge " << k << " (" << u << ", " << v << ") has a node id outside [0, " << n << ")";
      throw InputError(os.str());
    }
    if (u == v) continue;
    adjacency[u].push_back(v);
    adjacency[v].push_back(u);
  }

  Graph g;
  g.row_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = adjacency[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.row_offsets_[i + 1] = g.row_offsets_[i] + static_cast<std::int64_t>(row.size());
  }
  g.col_indices_.reserve(static_cast<std::size_t>(g.row_offsets_[n]));
  for (const auto& row : adjacency) g.col_indices_.insert(g.col_indices_.end(), row.begin(), row.end());
  return g;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (std::size_t i = 0; i < num_nodes(); ++i)
    for (NodeId j : neighbors(static_cast<NodeId>(i)))
      if (static_cast<NodeId>(i) < j) out.emplace_back(static_cast<NodeId>(i), j);
  return out;
}

std::vector<std::int64_t> degrees(const Graph& g) {
  std::vector<std::int64_t> d(g.num_nodes());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<std::int64_t>(g.degree(static_cast<NodeId>(i)));
  return d;
}

NormalizedAdjacency normalize(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(static_cast<NodeId>(i)) + 1));

  NormalizedAdjacency adj;
  adj.row_offsets_.assign(n + 1, 0);
  adj.col_indices_.reserve(g.col_indices().size() + n);
  adj.weights_.reserve(g.col_indices().size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto self = static_cast<NodeId>(i);
    bool self_done = false;
    auto emit = [&](NodeId j) {
      adj.col_indices_.push_back(j);
      adj.weights_.push_back(inv_sqrt[i] * inv_sqrt[static_cast<std::size_t>(j)]);
    };
    for (NodeId j : g.neighbors(self)) {
      if (!self_done && j > self) {
        emit(self);
        self_done = true;
      }
      emit(j);
    }
    if (!self_done) emit(self);
    adj.row_offsets_[i + 1] = static_cast<std::int64_t>(adj.col_indices_.size());
  }
  return adj;
}

Matrix NormalizedAdjacency::to_dense() const {
  const std::size_t n = num_nodes();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto e = row_offsets_[i]; e < row_offsets_[i + 1]; ++e)
      m(i, static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(e)])) = weights_[static_cast<std::size_t>(e)];
  return m;
}

Matrix spmm(const NormalizedAdjacency& adj, const Matrix& h) {
  PPRO_EXPECT(h.rows() == adj.num_nodes(), "spmm: H row count differs from node count");
  const std::size_t n = adj.num_nodes();
  const std::size_t width = h.cols();
  Matrix out(n, width);
  const auto offsets = adj.row_offsets();
  const auto cols = adj.col_indices();
  const auto weights = adj.weights();
  for (std::size_t i = 0; i < n; ++i) {
    auto orow = out.row(i);
    for (auto e = offsets[i]; e < offsets[i + 1]; ++e) {
      const auto idx = static_cast<std::size_t>(e);
      const double w = weights[idx];
      auto hrow = h.row(static_cast<std::size_t>(cols[idx]));
      for (std::size_t c = 0; c < width; ++c) orow[c] += w * hrow[c];
    }
  }
  return out;
}

Matrix dense_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (NodeId j : g.neighbors(static_cast<NodeId>(i))) a(i, static_cast<std::size_t>(j)) = 1.0;
  return a;
}

namespace {

std::vector<std::pair<Edge, std::size_t>> parse_edges(std::istream& in, const std::string& source) {
  std::vector<std::pair<Edge, std::size_t>> edges;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw InputError(source + ":" + std::to_string(line_no) + ": " + why + " in '" + line + "'");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    long long u = 0;
    long long v = 0;
    std::string rest;
    if (!(fields >> u >> v) || (fields >> rest)) fail("expected two node ids");
    if (u < 0 || v < 0 || u > INT32_MAX || v > INT32_MAX) fail("node id out of range");
    edges.push_back({{static_cast<NodeId>(u), static_cast<NodeId>(v)}, line_no});
  }
  return edges;
}

}  // namespace

std::vector<Edge> read_edge_list(std::istream& in, const std::string& source) {
  std::vector<Edge> edges;
  for (auto& [e, line] : parse_edges(in, source)) edges.push_back(e);
  return edges;
}

Graph read_graph(std::istream& in, std::size_t n, const std::string& source) {
  std::vector<Edge> edges;
  for (auto& [e, line] : parse_edges(in, source)) {
    if (static_cast<std::size_t>(e.first) >= n || static_cast<std::size_t>(e.second) >= n) {
      std::ostringstream os;
      os << source << ":" << line << ": edge (" << e.first << ", " << e.second << ") references a node outside [0, "
         << n << ")";
      throw InputError(os.str());
    }
    edges.push_back(e);
  }
  return build_graph(edges, n);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  for (auto [u, v] : g.edges()) out << u << '\t' << v << '\n';
}

}  // namespace ppro
