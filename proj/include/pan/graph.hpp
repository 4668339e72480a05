#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pan/dense_matrix.hpp"

namespace pan {

using Edge = std::pair<std::size_t, std::size_t>;

class Graph;

/// Validates and builds a graph. (u, v) and (v, u) name the same edge; listing
/// both is a DuplicateEdge error. Empty feature matrices (0 rows, 0 cols) are
/// widened to the right row count with zero columns.
Graph build_graph(std::size_t num_nodes, std::vector<Edge> edges, IntMatrix node_feat = {},
                  IntMatrix edge_feat = {}, std::optional<int> label = std::nullopt);

/// Immutable undirected graph with categorical node and edge features.
///
/// Every undirected edge is stored once; self-loops are kept if the source
/// data has them. Construct through build_graph().
class Graph {
 public:
  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const IntMatrix& node_feat() const noexcept { return node_feat_; }
  const IntMatrix& edge_feat() const noexcept { return edge_feat_; }
  std::optional<int> label() const noexcept { return label_; }

  std::size_t degree(std::size_t node) const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  friend Graph build_graph(std::size_t, std::vector<Edge>, IntMatrix, IntMatrix, std::optional<int>);

  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  IntMatrix node_feat_;
  IntMatrix edge_feat_;
  std::optional<int> label_;
};

/// Symmetric {0,1} adjacency matrix.
DenseMatrix adjacency(const Graph& g);

/// Number of length-l walks between every node pair, i.e. A^l.
/// Throws Overflow once any count exceeds 2^52.
DenseMatrix walk_counts(const Graph& g, std::size_t l);

/// All powers A^0 .. A^max_l, sharing the repeated products.
std::vector<DenseMatrix> walk_count_powers(const Graph& g, std::size_t max_l);

/// Subgraph induced by `kept` (which must be strictly increasing). Nodes are
/// relabeled to their position in `kept`; surviving edges keep their order
/// and feature rows.
Graph induced_subgraph(const Graph& g, std::span<const std::size_t> kept);

/// Relabels node i to perm[i]. Edge order and edge features are preserved.
Graph permute_nodes(const Graph& g, std::span<const std::size_t> perm);

}  // namespace pan
