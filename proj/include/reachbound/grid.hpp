#pragma once

// Regular 2D grids and their 4-connected graphs. Nodes are numbered row-major:
// node = row * nx + col, with col along x and row along y.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "reachbound/kernels.hpp"

namespace reachbound::grid {

struct GridSpec {
  std::size_t nx = 2;
  std::size_t ny = 2;
  double dx = 1.0;
  double dy = 1.0;

  /// Throws std::invalid_argument unless nx, ny >= 2, dx, dy > 0 and dx == dy.
  void validate() const;
  std::size_t node_count() const { return nx * ny; }
  double lx() const { return double(nx - 1) * dx; }
  double ly() const { return double(ny - 1) * dy; }
  std::size_t node(std::size_t row, std::size_t col) const { return row * nx + col; }
  std::size_t row_of(std::size_t node) const { return node / nx; }
  std::size_t col_of(std::size_t node) const { return node % nx; }
  double x_of(std::size_t node) const { return double(col_of(node)) * dx; }
  double y_of(std::size_t node) const { return double(row_of(node)) * dy; }
  bool is_boundary(std::size_t node) const;

  bool operator==(const GridSpec&) const = default;
};

/// Symmetric directed edge set stored as incoming-neighbour CSR.
class GraphTopology {
 public:
  GraphTopology() = default;
  /// `neighbors[i]` lists the nodes j with an edge j -> i (and hence i -> j).
  explicit GraphTopology(std::vector<std::vector<std::uint32_t>> neighbors);

  std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const { return nbrs_.size(); }
  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {nbrs_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  /// Directed edges (i, j) meaning j is in N(i), in CSR order.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges() const;
  kernels::CsrView csr() const { return {node_count(), offsets_.data(), nbrs_.data()}; }

  /// Disjoint union of `copies` relabelled copies (batched graphs).
  GraphTopology replicate(std::size_t copies) const;
  /// Topology after relabelling node i to perm[i].
  GraphTopology permuted(std::span<const std::uint32_t> perm) const;

  bool operator==(const GraphTopology&) const = default;

 private:
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> nbrs_;
};

struct NodeMask {
  std::vector<bool> is_boundary;
  /// Per-node one-hot node type: [interior, boundary].
  static constexpr std::size_t type_count = 2;
  std::vector<std::uint8_t> node_type;  // 0 interior, 1 boundary
};

/// 4-connected lattice; rejects nx or ny < 2.
GraphTopology build_grid_graph(const GridSpec& spec);
NodeMask build_node_mask(const GridSpec& spec);

/// BFS shortest-path length.
std::size_t hop_distance(const GraphTopology& topo, std::size_t i, std::size_t j);
/// BFS from one source; entry k is hop(source, k).
std::vector<std::size_t> hop_distances_from(const GraphTopology& topo, std::size_t source);
/// Exact diameter by BFS from every node.
std::size_t graph_diameter(const GraphTopology& topo);

/// Plain-text header "grid nx ny dx dy"; topology is rebuilt from it.
void write_grid_header(std::ostream& out, const GridSpec& spec);
GridSpec read_grid_header(std::istream& in);

}  // namespace reachbound::grid
