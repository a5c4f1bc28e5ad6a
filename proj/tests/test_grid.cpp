#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "reachbound/grid.hpp"

using namespace reachbound::grid;

TEST_CASE("2x2 grid: 4 nodes, 8 directed edges, all degree 2") {
  const auto t = build_grid_graph({2, 2, 1.0, 1.0});
  CHECK(t.node_count() == 4);
  CHECK(t.edge_count() == 8);
  for (std::size_t i = 0; i < 4; ++i) CHECK(t.degree(i) == 2);
}

TEST_CASE("edge count formula and degree pattern") {
  for (auto [nx, ny] : std::vector<std::pair<std::size_t, std::size_t>>{{3, 3}, {25, 25}, {7, 4}, {2, 9}}) {
    const GridSpec g{nx, ny, 0.1, 0.1};
    const auto t = build_grid_graph(g);
    CHECK(t.node_count() == nx * ny);
    CHECK(t.edge_count() == 2 * (nx * (ny - 1) + ny * (nx - 1)));
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      const auto r = g.row_of(i), c = g.col_of(i);
      const bool edge_r = r == 0 || r == ny - 1, edge_c = c == 0 || c == nx - 1;
      const std::size_t expect = 4 - std::size_t(r == 0) - std::size_t(r == ny - 1) -
                                 std::size_t(c == 0) - std::size_t(c == nx - 1);
      CHECK(t.degree(i) == expect);
      CHECK(g.is_boundary(i) == (edge_r || edge_c));
    }
  }
  CHECK(build_grid_graph({25, 25, 0.04, 0.04}).node_count() == 625);
}

TEST_CASE("3x3 centre has degree 4, corners degree 2") {
  const auto t = build_grid_graph({3, 3, 1.0, 1.0});
  CHECK(t.degree(4) == 4);
  for (std::size_t c : {0u, 2u, 6u, 8u}) CHECK(t.degree(c) == 2);
}

TEST_CASE("edges are symmetric and the graph is connected") {
  const auto t = build_grid_graph({6, 5, 0.2, 0.2});
  std::set<std::pair<std::uint32_t, std::uint32_t>> e;
  for (auto p : t.edges()) e.insert(p);
  for (auto [i, j] : e) CHECK(e.count({j, i}) == 1);
  const auto d = hop_distances_from(t, 0);
  for (auto v : d) CHECK(v < t.node_count());
}

TEST_CASE("hop distance: zero on the diagonal, Manhattan on the lattice") {
  const GridSpec g{25, 25, 0.04, 0.04};
  const auto t = build_grid_graph(g);
  CHECK(hop_distance(t, 17, 17) == 0);
  CHECK(hop_distance(t, 0, 624) == 48);
  CHECK(hop_distance(build_grid_graph({3, 3, 1, 1}), 4, 0) == 2);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, g.node_count() - 1);
  for (int k = 0; k < 200; ++k) {
    const auto i = pick(rng), j = pick(rng);
    const auto man = std::size_t(std::abs(long(g.row_of(i)) - long(g.row_of(j))) +
                                 std::abs(long(g.col_of(i)) - long(g.col_of(j))));
    CHECK(hop_distance(t, i, j) == man);
    CHECK(hop_distance(t, i, j) == hop_distance(t, j, i));
  }
}

TEST_CASE("diameter") {
  CHECK(graph_diameter(build_grid_graph({2, 2, 1, 1})) == 2);
  CHECK(graph_diameter(build_grid_graph({11, 11, 0.1, 0.1})) == 20);
  CHECK(graph_diameter(build_grid_graph({7, 3, 0.1, 0.1})) == 8);
}

TEST_CASE("degenerate and anisotropic grids are rejected") {
  CHECK_THROWS_AS(build_grid_graph({1, 5, 0.1, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(build_grid_graph({5, 1, 0.1, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec({4, 4, 0.1, 0.2}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec({4, 4, 0.0, 0.0}).validate(), std::invalid_argument);
}

TEST_CASE("construction is deterministic and replicate/permute keep structure") {
  const GridSpec g{4, 3, 0.5, 0.5};
  CHECK(build_grid_graph(g) == build_grid_graph(g));
  const auto t = build_grid_graph(g);
  const auto r = t.replicate(3);
  CHECK(r.node_count() == 3 * t.node_count());
  CHECK(r.edge_count() == 3 * t.edge_count());
  for (std::size_t i = 0; i < t.node_count(); ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(r.degree(k * t.node_count() + i) == t.degree(i));
  CHECK(hop_distance(r, 0, t.node_count()) >= r.node_count());  // copies are disconnected

  std::vector<std::uint32_t> perm(t.node_count());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = std::uint32_t(perm.size() - 1 - i);
  const auto p = t.permuted(perm);
  for (std::size_t i = 0; i < t.node_count(); ++i)
    for (std::size_t j = 0; j < t.node_count(); ++j)
      CHECK(hop_distance(p, perm[i], perm[j]) == hop_distance(t, i, j));
}

TEST_CASE("node mask marks exactly the perimeter") {
  const GridSpec g{5, 4, 0.1, 0.1};
  const auto m = build_node_mask(g);
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    CHECK(m.is_boundary[i] == g.is_boundary(i));
    CHECK(m.node_type[i] == (m.is_boundary[i] ? 1 : 0));
    count += m.is_boundary[i];
  }
  CHECK(count == 2 * 5 + 2 * 4 - 4);
}

TEST_CASE("grid header round trip") {
  const GridSpec g{25, 10, 0.04, 0.04};
  std::stringstream ss;
  write_grid_header(ss, g);
  CHECK(ss.str().rfind("grid 25 10", 0) == 0);
  CHECK(read_grid_header(ss) == g);
  std::stringstream bad("mesh 1 2");
  CHECK_THROWS(read_grid_header(bad));
}
