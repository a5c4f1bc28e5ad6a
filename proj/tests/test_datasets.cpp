#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "reachbound/datasets.hpp"
#include "reachbound/errors.hpp"

using namespace reachbound;
using namespace reachbound::data;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec(Problem p) {
  DatasetSpec s;
  s.problem = p;
  s.dx = 0.1;
  s.n_sims = 10;
  s.seed = 7;
  if (p == Problem::heat) {
    s.horizon = 0.2;
    s.solver_dt = 0.0004;
  }
  return s;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("reachbound_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("surrogate stride for the default wave spec") {
  DatasetSpec s;
  s.problem = Problem::wave;
  CHECK(s.grid().nx == 25);
  CHECK(s.grid().node_count() == 625);
  CHECK(s.gnn_dt() == doctest::Approx(2.0 / 9.0));
  CHECK(s.fine_dt() <= s.solver_dt);
  CHECK(s.fine_dt() * double(s.substeps()) == doctest::Approx(s.gnn_dt()));
  CHECK(bounds::mpi_lower_bound(s.bound_spec()) == 4);
  s.dx = 0.02;
  CHECK(bounds::mpi_lower_bound(s.bound_spec()) == 8);
}

TEST_CASE("geometric bound specs come from the extent") {
  auto s = small_spec(Problem::heat);
  CHECK(bounds::mpi_lower_bound(s.bound_spec()) == 10);
  s.domain_x = s.domain_y = 2.0;
  CHECK(bounds::mpi_lower_bound(s.bound_spec()) == 20);
  auto p = small_spec(Problem::poisson);
  CHECK(bounds::mpi_lower_bound(p.bound_spec()) == 10);
  p.domain_x = 3.0;
  CHECK(bounds::mpi_lower_bound(p.bound_spec()) == 30);
}

TEST_CASE("initial conditions: replay, boundary, charge count") {
  const auto s = small_spec(Problem::wave);
  const auto g = s.grid();
  std::mt19937_64 a(11), b(11);
  const auto ia = sample_initial_condition(s, g, a), ib = sample_initial_condition(s, g, b);
  CHECK(ia.u0.values == ib.u0.values);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (g.is_boundary(i)) CHECK(ia.u0.values[i] == 0.0);
    CHECK(ia.v0.values[i] == 0.0);
  }

  auto p = small_spec(Problem::poisson);
  p.min_charges = p.max_charges = 3;
  std::mt19937_64 r(3);
  for (int k = 0; k < 20; ++k) {
    const auto ic = sample_initial_condition(p, g, r);
    std::size_t nz = 0;
    for (std::size_t i = 0; i < g.node_count(); ++i)
      if (ic.rho.values[i] != 0.0) {
        ++nz;
        CHECK_FALSE(g.is_boundary(i));
        CHECK(std::abs(ic.rho.values[i]) >= 0.5);
        CHECK(std::abs(ic.rho.values[i]) <= 1.5);
      }
    CHECK(nz == 3);
  }
}

TEST_CASE("splits are deterministic, disjoint and sized by the fractions") {
  const auto s = make_splits(1000, {0.8, 0.1, 0.1}, 42);
  CHECK(s.train.size() == 800);
  CHECK(s.val.size() == 100);
  CHECK(s.test.size() == 100);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 1000);
  CHECK(make_splits(1000, {0.8, 0.1, 0.1}, 42) == s);
  CHECK_FALSE(make_splits(1000, {0.8, 0.1, 0.1}, 43) == s);
}

TEST_CASE("generated wave data: shapes, times, determinism") {
  const auto s = small_spec(Problem::wave);
  const auto ds = generate(s, 2);
  REQUIRE(ds.trajectories.size() == 10);
  for (const auto& t : ds.trajectories) {
    REQUIRE(t.snapshots.size() == 10);
    for (std::size_t k = 0; k < 10; ++k) {
      CHECK(t.snapshots[k].n_dof == 2);
      CHECK(t.snapshots[k].time == doctest::Approx(double(k) * ds.gnn_dt).epsilon(1e-12));
    }
  }
  const auto again = generate(s, 1);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t k = 0; k < 10; ++k)
      CHECK(again.trajectories[i].snapshots[k].values == ds.trajectories[i].snapshots[k].values);
  CHECK(again.stats == ds.stats);
}

TEST_CASE("stats use the training split only") {
  const auto ds = generate(small_spec(Problem::heat));
  auto copy = ds;
  for (auto i : copy.splits.val)
    for (auto& snap : copy.trajectories[i].snapshots)
      for (auto& v : snap.values) v = 1e6;
  CHECK(compute_stats(copy) == ds.stats);

  // normalised training inputs have zero mean
  double sum = 0;
  std::size_t n = 0;
  for (auto i : ds.splits.train)
    for (const auto& snap : ds.trajectories[i].snapshots)
      for (double v : normalize(snap.values, ds.stats.input)) {
        sum += v;
        ++n;
      }
  CHECK(std::abs(sum / double(n)) < 1e-10);
}

TEST_CASE("normalize round trip and degenerate channels") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d(3.0, 2.0);
  std::vector<double> x(600);
  for (auto& v : x) v = d(rng);
  const ChannelStats st{{1.5, -2.0}, {0.3, 4.0}};
  const auto back = denormalize(normalize(x, st), st);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);

  const ChannelStats flat{{5.0}, {0.0}};
  const std::vector<double> c(10, 5.0);
  for (double v : normalize(c, flat)) CHECK(v == 0.0);
}

TEST_CASE("poisson samples are (rho, u) pairs") {
  const auto ds = generate(small_spec(Problem::poisson));
  for (const auto& t : ds.trajectories) {
    REQUIRE(t.snapshots.size() == 2);
    CHECK(t.snapshots[0].n_dof == 1);
    CHECK(pde::poisson_residual(ds.grid, t.snapshots[1], t.snapshots[0], 1.0) <= 1e-8);
  }
  CHECK(ds.gnn_dt == 0.0);
}

TEST_CASE("dataset files round trip byte for byte") {
  const auto s = small_spec(Problem::wave);
  const auto a = temp_dir("ds_a"), b = temp_dir("ds_b");
  save_dataset(generate(s), a);
  save_dataset(generate(s), b);
  // header: magic, n_snapshots, n_nodes, n_channels
  const auto raw = slurp(a / "traj_00000.bin");
  REQUIRE(raw.size() == 16 + 10 * 100 * 2 * 8);
  std::uint32_t h[4];
  std::memcpy(h, raw.data(), 16);
  CHECK(h[0] == kTrajectoryMagic);
  CHECK(h[1] == 10);
  CHECK(h[2] == 100);
  CHECK(h[3] == 2);
  for (const auto& e : fs::directory_iterator(a)) CHECK(slurp(e.path()) == slurp(b / e.path().filename()));

  const auto loaded = load_dataset(a);
  const auto orig = generate(s);
  CHECK(loaded.spec == s);
  CHECK(loaded.splits == orig.splits);
  CHECK(loaded.stats == orig.stats);
  CHECK(loaded.trajectories[3].snapshots[5].values == orig.trajectories[3].snapshots[5].values);
  CHECK(loaded.trajectories[3].snapshots[5].time == doctest::Approx(orig.trajectories[3].snapshots[5].time));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("bad inputs") {
  CHECK_THROWS_AS(load_dataset(temp_dir("missing")), InputError);
  const auto d = temp_dir("garbage");
  fs::create_directories(d);
  std::ofstream(d / "x.bin") << "nope";
  CHECK_THROWS_AS(read_trajectory_file(d / "x.bin"), InputError);
  fs::remove_all(d);

  auto s = small_spec(Problem::wave);
  s.solver_dt = 1.0;  // a single substep exceeds CFL
  s.constants.c = 5.0;
  CHECK_THROWS_AS(generate(s), StabilityError);
  auto v = small_spec(Problem::wave);
  v.keep_snapshots = 1;
  CHECK_THROWS_AS(v.validate(), std::invalid_argument);
}
