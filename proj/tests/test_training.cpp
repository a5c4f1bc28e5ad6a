#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "reachbound/errors.hpp"
#include "reachbound/training.hpp"

using namespace reachbound;
using namespace reachbound::train;
namespace fs = std::filesystem;

namespace {

data::DatasetSpec tiny_spec(data::Problem p) {
  data::DatasetSpec s;
  s.problem = p;
  s.dx = 0.2;
  s.n_sims = 10;
  s.seed = 3;
  s.keep_snapshots = 4;
  if (p == data::Problem::heat) {
    s.horizon = 0.06;
    s.solver_dt = 0.005;
  }
  return s;
}

gnn::GnnConfig tiny_model(const data::Dataset& ds, std::size_t mpi) {
  gnn::GnnConfig c;
  c.latent_dim = 8;
  c.hidden_layers = 1;
  c.mpi = mpi;
  if (ds.spec.problem == data::Problem::poisson) c.mode = gnn::PredictionMode::direct;
  return model_config_for(ds, c);
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.lr = 3e-3;
  return t;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("reachbound_train_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("pairs: count, zero increments, telescoping") {
  auto ds = data::generate(tiny_spec(data::Problem::wave));
  const std::vector<std::size_t> one{0};
  const auto ps = make_pairs(ds, one);
  CHECK(ps.size() == 3);
  CHECK(ps.n_dof == 2);
  // cumulative sum of denormalised increments rebuilds the trajectory
  auto u = ds.trajectories[0].snapshots[0].values;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const auto d = data::denormalize(ps.targets[k], ds.stats.target);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += d[i];
    for (std::size_t i = 0; i < u.size(); ++i)
      CHECK(u[i] == doctest::Approx(ds.trajectories[0].snapshots[k + 1].values[i]).epsilon(1e-12).scale(1.0));
  }

  auto flat = ds;
  for (auto& s : flat.trajectories[1].snapshots) s.values = flat.trajectories[1].snapshots[0].values;
  const std::vector<std::size_t> two{1};
  for (const auto& t : make_pairs(flat, two).targets)
    for (double v : t) CHECK(v == 0.0);

  const auto pp = data::generate(tiny_spec(data::Problem::poisson));
  CHECK(make_pairs(pp, pp.splits.train).size() == pp.splits.train.size());
}

TEST_CASE("zero targets are fitted") {
  auto ds = data::generate(tiny_spec(data::Problem::heat));
  for (auto& t : ds.trajectories)
    for (auto& s : t.snapshots) std::fill(s.values.begin(), s.values.end(), 0.0);
  ds.stats = data::compute_stats(ds);
  auto tc = quick(50);
  tc.noise_std = 0.0;
  tc.batch_size = 1;
  tc.lr = 1e-3;
  const auto r = train::train(ds, tiny_model(ds, 1), tc);
  CHECK(r.report.final_train_loss < 1e-8);
  CHECK(r.report.epochs.size() == 50);
}

TEST_CASE("training reduces the loss and is deterministic") {
  const auto ds = data::generate(tiny_spec(data::Problem::heat));
  const auto cfg = tiny_model(ds, 2);
  const auto a = train::train(ds, cfg, quick(6));
  const auto b = train::train(ds, cfg, quick(6));
  CHECK(a.report.epochs.back().train_loss < a.report.epochs.front().train_loss);
  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) CHECK(a.report.epochs[e] == b.report.epochs[e]);
  CHECK(a.checkpoint.model.params == b.checkpoint.model.params);
  auto other = quick(6);
  other.seed = 1;
  CHECK_FALSE(train::train(ds, cfg, other).checkpoint.model.params == a.checkpoint.model.params);
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) CHECK(a.report.epochs[e].epoch == e);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig t;
  t.epochs = 9;
  t.lr = 1e-3;
  CHECK(t.lr_at(0) == doctest::Approx(1e-3));
  CHECK(t.lr_at(2) == doctest::Approx(1e-3));
  CHECK(t.lr_at(3) == doctest::Approx(5e-4));
  CHECK(t.lr_at(8) == doctest::Approx(2.5e-4));
  t.lr = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("checkpoint round trip reproduces the reported loss") {
  const auto ds = data::generate(tiny_spec(data::Problem::poisson));
  const auto dir = temp_dir("ck");
  const auto r = train::train(ds, tiny_model(ds, 3), quick(4), dir);
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "params.bin"));
  CHECK(fs::exists(dir / "report.json"));
  const auto ck = load_checkpoint(dir);
  CHECK(ck.model.params == r.checkpoint.model.params);
  CHECK(ck.model.config == r.checkpoint.model.config);
  CHECK(ck.model.stats == ds.stats);
  CHECK(ck.dataset == ds.spec);
  const auto topo = grid::build_grid_graph(ds.grid);
  const auto mask = grid::build_node_mask(ds.grid);
  CHECK(std::abs(evaluate_loss(ck.model, topo, mask, make_pairs(ds, ds.splits.val)) -
                 r.report.final_val_loss) < 1e-10);
  CHECK(std::abs(evaluate_loss(ck.model, topo, mask, make_pairs(ds, ds.splits.train)) -
                 r.report.final_train_loss) < 1e-10);
  CHECK(checkpoint_hash(dir) == checkpoint_hash(dir));
  CHECK(checkpoint_hash(dir).size() == 64);

  std::ofstream(dir / "params.bin", std::ios::trunc) << "junk";
  CHECK_THROWS(load_checkpoint(dir));
  fs::remove_all(dir);
}

TEST_CASE("divergence is reported") {
  const auto ds = data::generate(tiny_spec(data::Problem::heat));
  auto tc = quick(3);
  tc.lr = 1e30;
  CHECK_THROWS_AS(train::train(ds, tiny_model(ds, 1), tc), DivergenceError);
}

TEST_CASE("sweep: 12 cells, equal parameter counts, resumable") {
  const auto ds = data::generate(tiny_spec(data::Problem::heat));
  const auto dir = temp_dir("sweep");
  const std::size_t mpis[] = {1, 2, 4, 6};
  const std::uint64_t seeds[] = {0, 1, 2};
  const auto m = train_sweep(ds, tiny_model(ds, 1), quick(1), mpis, seeds, dir);
  REQUIRE(m.cells.size() == 12);
  for (const auto& c : m.cells) {
    CHECK(c.status == "done");
    CHECK(c.parameter_count == m.cells[0].parameter_count);
    CHECK(fs::exists(dir / c.checkpoint / "params.bin"));
  }
  CHECK(m.cells[0].checkpoint == cell_name(m.cells[0].mpi, m.cells[0].seed));
  const auto stamp = fs::last_write_time(dir / m.cells[5].checkpoint / "params.bin");
  const auto again = train_sweep(ds, tiny_model(ds, 1), quick(1), mpis, seeds, dir);
  CHECK(fs::last_write_time(dir / m.cells[5].checkpoint / "params.bin") == stamp);
  for (std::size_t k = 0; k < 12; ++k) CHECK(again.cells[k].wall_seconds == m.cells[k].wall_seconds);
  CHECK(read_sweep_manifest(dir).cells.size() == 12);

  // a removed checkpoint is retrained on resume
  fs::remove_all(dir / m.cells[3].checkpoint);
  const auto fixed = train_sweep(ds, tiny_model(ds, 1), quick(1), mpis, seeds, dir);
  CHECK(fs::exists(dir / m.cells[3].checkpoint / "params.bin"));
  CHECK(fixed.cells[3].status == "done");
  fs::remove_all(dir);
}
