#include "pan/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "pan/error.hpp"

namespace pan {

namespace {

constexpr double kWalkCountLimit = 4503599627370496.0;  // 2^52

Edge canonical(Edge e) { return e.first <= e.second ? e : Edge{e.second, e.first}; }

}  // namespace

std::size_t Graph::degree(std::size_t node) const {
  std::size_t d = 0;
  for (const auto& [u, v] : edges_) {
    if (u == node) ++d;
    if (v == node) ++d;
  }
  return d;
}

Graph build_graph(std::size_t num_nodes, std::vector<Edge> edges, IntMatrix node_feat,
                  IntMatrix edge_feat, std::optional<int> label) {
  if (node_feat.rows == 0 && node_feat.cols == 0) node_feat = IntMatrix(num_nodes, 0);
  if (edge_feat.rows == 0 && edge_feat.cols == 0) edge_feat = IntMatrix(edges.size(), 0);

  std::set<Edge> seen;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [u, v] = edges[i];
    if (u >= num_nodes || v >= num_nodes) {
      std::ostringstream msg;
      msg << "edge " << i << " = (" << u << ", " << v << ") with num_nodes = " << num_nodes;
      throw Error(ErrorCode::OutOfRangeEndpoint, msg.str());
    }
    if (!seen.insert(canonical(edges[i])).second) {
      std::ostringstream msg;
      msg << "edge " << i << " = (" << u << ", " << v << ") repeats an earlier edge";
      throw Error(ErrorCode::DuplicateEdge, msg.str());
    }
  }
  if (node_feat.rows != num_nodes) {
    throw Error(ErrorCode::FeatureShapeMismatch,
                "node_feat has " + std::to_string(node_feat.rows) + " rows, expected " +
                    std::to_string(num_nodes));
  }
  if (edge_feat.rows != edges.size()) {
    throw Error(ErrorCode::FeatureShapeMismatch,
                "edge_feat has " + std::to_string(edge_feat.rows) + " rows, expected " +
                    std::to_string(edges.size()));
  }
  if (label && *label != 0 && *label != 1) {
    throw Error(ErrorCode::BadLabel, "label must be 0 or 1, got " + std::to_string(*label));
  }

  Graph g;
  g.num_nodes_ = num_nodes;
  g.edges_ = std::move(edges);
  g.node_feat_ = std::move(node_feat);
  g.edge_feat_ = std::move(edge_feat);
  g.label_ = label;
  return g;
}

DenseMatrix adjacency(const Graph& g) {
  DenseMatrix a(g.num_nodes(), g.num_nodes());
  for (const auto& [u, v] : g.edges()) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

std::vector<DenseMatrix> walk_count_powers(const Graph& g, std::size_t max_l) {
  std::vector<DenseMatrix> powers;
  powers.reserve(max_l + 1);
  powers.push_back(DenseMatrix::identity(g.num_nodes()));
  if (max_l == 0) return powers;
  const DenseMatrix a = adjacency(g);
  for (std::size_t l = 1; l <= max_l; ++l) {
    DenseMatrix next = matmul(powers.back(), a);
    for (double x : next.data()) {
      if (x > kWalkCountLimit) {
        throw Error(ErrorCode::Overflow,
                    "walk count exceeds 2^52 at length " + std::to_string(l));
      }
    }
    powers.push_back(std::move(next));
  }
  return powers;
}

DenseMatrix walk_counts(const Graph& g, std::size_t l) { return walk_count_powers(g, l).back(); }

Graph induced_subgraph(const Graph& g, std::span<const std::size_t> kept) {
  constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
  std::vector<std::size_t> relabel(g.num_nodes(), kDropped);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    if (kept[j] >= g.num_nodes()) throw Error(ErrorCode::OutOfRangeEndpoint, "kept index out of range");
    if (j > 0 && kept[j] <= kept[j - 1]) {
      throw Error(ErrorCode::InvalidArgument, "kept indices must be strictly increasing");
    }
    relabel[kept[j]] = j;
  }

  const IntMatrix& nf = g.node_feat();
  IntMatrix node_feat(kept.size(), nf.cols);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    std::copy_n(nf.row(kept[j]).begin(), nf.cols, node_feat.data.begin() + j * nf.cols);
  }

  std::vector<Edge> edges;
  std::vector<std::size_t> edge_rows;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto [u, v] = g.edges()[e];
    if (relabel[u] != kDropped && relabel[v] != kDropped) {
      edges.emplace_back(relabel[u], relabel[v]);
      edge_rows.push_back(e);
    }
  }
  const IntMatrix& ef = g.edge_feat();
  IntMatrix edge_feat(edges.size(), ef.cols);
  for (std::size_t j = 0; j < edge_rows.size(); ++j) {
    std::copy_n(ef.row(edge_rows[j]).begin(), ef.cols, edge_feat.data.begin() + j * ef.cols);
  }
  return build_graph(kept.size(), std::move(edges), std::move(node_feat), std::move(edge_feat),
                     g.label());
}

Graph permute_nodes(const Graph& g, std::span<const std::size_t> perm) {
  const std::size_t n = g.num_nodes();
  if (perm.size() != n) throw Error(ErrorCode::ShapeMismatch, "permutation length differs from num_nodes");
  std::vector<bool> hit(n, false);
  for (std::size_t p : perm) {
    if (p >= n || hit[p]) throw Error(ErrorCode::InvalidArgument, "not a permutation");
    hit[p] = true;
  }
  const IntMatrix& nf = g.node_feat();
  IntMatrix node_feat(n, nf.cols);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(nf.row(i).begin(), nf.cols, node_feat.data.begin() + perm[i] * nf.cols);
  }
  std::vector<Edge> edges;
  edges.reserve(g.num_edges());
  for (const auto& [u, v] : g.edges()) edges.emplace_back(perm[u], perm[v]);
  return build_graph(n, std::move(edges), std::move(node_feat), g.edge_feat(), g.label());
}

}  // namespace pan
