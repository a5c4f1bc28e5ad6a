#include "reachbound/grid.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>

namespace reachbound::grid {

void GridSpec::validate() const {
  if (nx < 2 || ny < 2)
    throw std::invalid_argument("grid needs nx, ny >= 2 (got " + std::to_string(nx) + "x" +
                                std::to_string(ny) + ")");
  if (!(dx > 0.0) || !(dy > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  if (std::abs(dx - dy) > 1e-12 * std::max(dx, dy))
    throw std::invalid_argument("grid spacing must be uniform (dx == dy)");
}

bool GridSpec::is_boundary(std::size_t n) const {
  const auto r = row_of(n), c = col_of(n);
  return r == 0 || c == 0 || r + 1 == ny || c + 1 == nx;
}

GraphTopology::GraphTopology(std::vector<std::vector<std::uint32_t>> neighbors) {
  offsets_.reserve(neighbors.size() + 1);
  offsets_.push_back(0);
  for (const auto& list : neighbors) {
    nbrs_.insert(nbrs_.end(), list.begin(), list.end());
    offsets_.push_back(std::uint32_t(nbrs_.size()));
  }
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> GraphTopology::edges() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(nbrs_.size());
  for (std::size_t i = 0; i < node_count(); ++i)
    for (auto j : neighbors(i)) out.emplace_back(std::uint32_t(i), j);
  return out;
}

GraphTopology GraphTopology::replicate(std::size_t copies) const {
  const auto n = node_count();
  std::vector<std::vector<std::uint32_t>> lists(n * copies);
  for (std::size_t c = 0; c < copies; ++c)
    for (std::size_t i = 0; i < n; ++i)
      for (auto j : neighbors(i)) lists[c * n + i].push_back(std::uint32_t(c * n + j));
  return GraphTopology(std::move(lists));
}

GraphTopology GraphTopology::permuted(std::span<const std::uint32_t> perm) const {
  const auto n = node_count();
  if (perm.size() != n) throw std::invalid_argument("permutation size mismatch");
  std::vector<std::vector<std::uint32_t>> lists(n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : neighbors(i)) lists[perm[i]].push_back(perm[j]);
  return GraphTopology(std::move(lists));
}

GraphTopology build_grid_graph(const GridSpec& spec) {
  spec.validate();
  std::vector<std::vector<std::uint32_t>> lists(spec.node_count());
  for (std::size_t r = 0; r < spec.ny; ++r) {
    for (std::size_t c = 0; c < spec.nx; ++c) {
      auto& l = lists[spec.node(r, c)];
      // fixed order: south, west, east, north
      if (r > 0) l.push_back(std::uint32_t(spec.node(r - 1, c)));
      if (c > 0) l.push_back(std::uint32_t(spec.node(r, c - 1)));
      if (c + 1 < spec.nx) l.push_back(std::uint32_t(spec.node(r, c + 1)));
      if (r + 1 < spec.ny) l.push_back(std::uint32_t(spec.node(r + 1, c)));
    }
  }
  return GraphTopology(std::move(lists));
}

NodeMask build_node_mask(const GridSpec& spec) {
  spec.validate();
  NodeMask m;
  m.is_boundary.resize(spec.node_count());
  m.node_type.resize(spec.node_count());
  for (std::size_t i = 0; i < spec.node_count(); ++i) {
    m.is_boundary[i] = spec.is_boundary(i);
    m.node_type[i] = m.is_boundary[i] ? 1 : 0;
  }
  return m;
}

std::vector<std::size_t> hop_distances_from(const GraphTopology& topo, std::size_t source) {
  constexpr auto inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(topo.node_count(), inf);
  if (source >= topo.node_count()) throw std::out_of_range("hop_distances_from: bad node id");
  std::queue<std::size_t> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : topo.neighbors(u)) {
      if (dist[v] == inf) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  return dist;
}

std::size_t hop_distance(const GraphTopology& topo, std::size_t i, std::size_t j) {
  if (j >= topo.node_count()) throw std::out_of_range("hop_distance: bad node id");
  return hop_distances_from(topo, i)[j];
}

std::size_t graph_diameter(const GraphTopology& topo) {
  std::size_t best = 0;
  for (std::size_t s = 0; s < topo.node_count(); ++s) {
    const auto d = hop_distances_from(topo, s);
    best = std::max(best, *std::max_element(d.begin(), d.end()));
  }
  return best;
}

void write_grid_header(std::ostream& out, const GridSpec& spec) {
  out.precision(17);
  out << "grid " << spec.nx << ' ' << spec.ny << ' ' << spec.dx << ' ' << spec.dy << '\n';
}

GridSpec read_grid_header(std::istream& in) {
  std::string tag;
  GridSpec s;
  if (!(in >> tag >> s.nx >> s.ny >> s.dx >> s.dy) || tag != "grid")
    throw std::runtime_error("malformed grid header");
  s.validate();
  return s;
}

}  // namespace reachbound::grid
