#include "reachbound/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <utility>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "reachbound/adam.hpp"
#include "reachbound/checkpoint.hpp"
#include "reachbound/config.hpp"
#include "reachbound/errors.hpp"
#include "reachbound/hashing.hpp"

namespace reachbound::train {

std::string_view precision_name(Precision p) {
  return p == Precision::float32 ? "float32" : "float64";
}

Precision parse_precision(std::string_view name) {
  if (name == "float32" || name == "f32") return Precision::float32;
  if (name == "float64" || name == "f64") return Precision::float64;
  throw std::invalid_argument("unknown precision: " + std::string(name));
}

void TrainConfig::validate() const {
  auto fail = [](const char* m) { throw std::invalid_argument(std::string("training config: ") + m); };
  if (epochs == 0) fail("epochs must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) fail("lr_decay must be in (0, 1]");
  if (decay_stages == 0) fail("decay_stages must be positive");
  if (!(noise_std >= 0.0)) fail("noise_std must be non-negative");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  const std::size_t stage = std::min(decay_stages - 1, epoch * decay_stages / epochs);
  return lr * std::pow(lr_decay, double(stage));
}

PairSet make_pairs(const data::Dataset& ds, std::span<const std::size_t> trajectories) {
  PairSet ps;
  ps.n_nodes = ds.grid.node_count();
  const bool td = data::is_time_dependent(ds.spec.problem);
  ps.n_dof = data::channels_of(ds.spec.problem);
  ps.noise_to_target.assign(ps.n_dof, 0.0);
  if (td)
    for (std::size_t c = 0; c < ps.n_dof; ++c) {
      auto safe = [](double v) { return (v < 1e-12 || !std::isfinite(v)) ? 1.0 : v; };
      ps.noise_to_target[c] = safe(ds.stats.input.std[c]) / safe(ds.stats.target.std[c]);
    }
  for (auto t : trajectories) {
    if (t >= ds.trajectories.size()) throw std::out_of_range("make_pairs: trajectory index");
    const auto& snaps = ds.trajectories[t].snapshots;
    if (!td) {
      if (snaps.size() != 2) throw InputError("poisson sample must hold (rho, u)");
      ps.inputs.push_back(data::normalize(snaps[0].values, ds.stats.input));
      ps.targets.push_back(data::normalize(snaps[1].values, ds.stats.target));
      continue;
    }
    for (std::size_t k = 0; k + 1 < snaps.size(); ++k) {
      std::vector<double> d(snaps[k].values.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = snaps[k + 1].values[i] - snaps[k].values[i];
      ps.inputs.push_back(data::normalize(snaps[k].values, ds.stats.input));
      ps.targets.push_back(data::normalize(d, ds.stats.target));
    }
  }
  return ps;
}

gnn::GnnConfig model_config_for(const data::Dataset& ds, gnn::GnnConfig base) {
  base.n_dof = data::channels_of(ds.spec.problem);
  return base;
}

namespace {

using Clock = std::chrono::steady_clock;

// Training allocates many short-lived activation buffers of a few hundred KB.
// glibc serves those with fresh mmaps, so every one page-faults; keeping them
// on the heap roughly halves the cost of an epoch.
void keep_buffers_on_heap() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    mallopt(M_TOP_PAD, 64 << 20);
  });
#endif
}

/// Copies pairs[idx[0..count)] into stacked features/targets.
template <class T>
void assemble(const PairSet& ps, std::span<const std::size_t> idx, const grid::NodeMask& mask,
              double noise_std, std::mt19937_64* noise_rng, Tensor2<T>& feats, Tensor2<T>& targets) {
  const std::size_t N = ps.n_nodes, C = ps.n_dof, W = C + grid::NodeMask::type_count;
  feats.resize(idx.size() * N, W);
  feats.fill(T(0));
  targets.resize(idx.size() * N, C);
  std::normal_distribution<double> noise(0.0, noise_std > 0 ? noise_std : 1.0);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& in = ps.inputs[idx[b]];
    const auto& tg = ps.targets[idx[b]];
    for (std::size_t i = 0; i < N; ++i) {
      T* f = feats.data() + (b * N + i) * W;
      const bool perturb = noise_rng && !mask.is_boundary[i];
      for (std::size_t c = 0; c < C; ++c) {
        double v = in[i * C + c], t = tg[i * C + c];
        if (perturb) {
          // the target still points at the clean next state
          const double n = noise(*noise_rng);
          v += n;
          t -= n * ps.noise_to_target[c];
        }
        f[c] = static_cast<T>(v);
        targets(b * N + i, c) = static_cast<T>(t);
      }
      f[C + mask.node_type[i]] = T(1);
    }
  }
}

/// Squared error sum and, optionally, d(sum)/d(out) scaled by `grad_scale`.
template <class T>
double squared_error(const Tensor2<T>& out, const Tensor2<T>& targets, const grid::NodeMask& mask,
                     bool clamp_boundary, Tensor2<T>* grad, double grad_scale) {
  const std::size_t N = mask.node_type.size(), C = out.cols();
  if (grad) grad->resize(out.rows(), C);
  double sum = 0.0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const bool skip = clamp_boundary && mask.is_boundary[r % N];
    for (std::size_t c = 0; c < C; ++c) {
      const double d = skip ? 0.0 : double(out(r, c)) - double(targets(r, c));
      sum += d * d;
      if (grad) (*grad)(r, c) = static_cast<T>(2.0 * d * grad_scale);
    }
  }
  return sum;
}

struct TopologyCache {
  const grid::GraphTopology* base;
  std::map<std::size_t, grid::GraphTopology> by_copies;
  const grid::GraphTopology& get(std::size_t copies) {
    auto it = by_copies.find(copies);
    if (it == by_copies.end()) it = by_copies.emplace(copies, base->replicate(copies)).first;
    return it->second;
  }
};

template <class T>
double mean_loss(const gnn::GnnParams<T>& p, const gnn::GnnConfig& cfg, TopologyCache& topos,
                 const grid::NodeMask& mask, const PairSet& ps, std::size_t batch) {
  if (ps.size() == 0) return 0.0;
  std::vector<std::size_t> idx(ps.size());
  std::iota(idx.begin(), idx.end(), 0);
  const bool clamp = cfg.mode == gnn::PredictionMode::residual;
  double sum = 0.0;
  Tensor2<T> feats, targets;
  for (std::size_t s = 0; s < idx.size(); s += batch) {
    const std::size_t n = std::min(batch, idx.size() - s);
    const std::span<const std::size_t> chunk(idx.data() + s, n);
    assemble(ps, chunk, mask, 0.0, nullptr, feats, targets);
    const auto out = gnn::forward_raw(p, cfg, topos.get(n), feats);
    sum += squared_error<T>(out, targets, mask, clamp, nullptr, 0.0);
  }
  return sum / double(ps.size() * ps.n_nodes * ps.n_dof);
}

template <class T>
gnn::GnnParams<double> train_impl(const data::Dataset& ds, const gnn::GnnConfig& cfg,
                                  const TrainConfig& tc, const PairSet& train_pairs,
                                  const PairSet& val_pairs, TrainReport& report) {
  keep_buffers_on_heap();
  const auto topo = grid::build_grid_graph(ds.grid);
  const auto mask = grid::build_node_mask(ds.grid);
  TopologyCache topos{&topo, {}};

  auto params = gnn::init_params<T>(cfg, tc.seed);
  auto grads = params.zeros_like();
  nn::AdamState<T> adam(nn::AdamHyper{tc.lr}, params.buffers());

  std::seed_seq shuffle_seq{tc.seed, std::uint64_t(1), std::uint64_t(0x7a1)};
  std::seed_seq noise_seq{tc.seed, std::uint64_t(2), std::uint64_t(0x7a1)};
  std::mt19937_64 shuffle_rng(shuffle_seq);
  std::mt19937_64 noise_rng(noise_seq);
  const bool use_noise = data::is_time_dependent(ds.spec.problem) && tc.noise_std > 0.0;
  const bool clamp = cfg.mode == gnn::PredictionMode::residual;
  const double denom_per_pair = double(train_pairs.n_nodes * train_pairs.n_dof);

  gnn::GnnParams<T> best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), 0);
  Tensor2<T> feats, targets, grad_out;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = tc.lr_at(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    for (std::size_t s = 0; s < order.size(); s += tc.batch_size) {
      const std::size_t n = std::min(tc.batch_size, order.size() - s);
      const std::span<const std::size_t> chunk(order.data() + s, n);
      assemble(train_pairs, chunk, mask, tc.noise_std, use_noise ? &noise_rng : nullptr, feats,
               targets);
      const auto& bt = topos.get(n);
      gnn::ForwardCache<T> cache;
      const auto out = gnn::forward_raw(params, cfg, bt, feats, &cache);
      const double denom = double(n) * denom_per_pair;
      const double sq = squared_error(out, targets, mask, clamp, &grad_out, 1.0 / denom);
      if (!std::isfinite(sq))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) +
                              " (M = " + std::to_string(cfg.mpi) + ", lr = " + std::to_string(lr) +
                              "); try a lower learning rate");
      epoch_sum += sq;
      grads.set_zero();
      gnn::backward(params, cfg, bt, cache, grad_out, grads);
      const auto& cg = grads;
      adam.step(params.buffers(), cg.buffers(), lr);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = epoch_sum / (double(order.size()) * denom_per_pair);
    rec.val_loss = mean_loss(params, cfg, topos, mask, val_pairs, tc.batch_size);
    if (!std::isfinite(rec.val_loss))
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    if (rec.val_loss < best_val || val_pairs.size() == 0) {
      best_val = rec.val_loss;
      best = params;
      report.best_epoch = epoch;
    }
    report.epochs.push_back(rec);
  }
  return gnn::params_cast<double>(best);
}

}  // namespace

double evaluate_loss(const gnn::Surrogate& model, const grid::GraphTopology& topo,
                     const grid::NodeMask& mask, const PairSet& pairs) {
  TopologyCache topos{&topo, {}};
  return mean_loss(model.params, model.config, topos, mask, pairs, 8);
}

TrainResult train(const data::Dataset& ds, const gnn::GnnConfig& model_cfg,
                  const TrainConfig& train_cfg, const std::filesystem::path& out_dir) {
  train_cfg.validate();
  const auto cfg = model_config_for(ds, model_cfg);
  cfg.validate();
  if (ds.trajectories.empty() || ds.splits.train.empty())
    throw InputError("train: dataset has no training trajectories");
  const auto t0 = Clock::now();
  const auto train_pairs = make_pairs(ds, ds.splits.train);
  const auto val_pairs = make_pairs(ds, ds.splits.val);

  TrainResult r;
  r.checkpoint.train = train_cfg;
  r.checkpoint.dataset = ds.spec;
  r.checkpoint.model.config = cfg;
  r.checkpoint.model.stats = ds.stats;
  r.checkpoint.model.params =
      train_cfg.precision == Precision::float32
          ? train_impl<float>(ds, cfg, train_cfg, train_pairs, val_pairs, r.report)
          : train_impl<double>(ds, cfg, train_cfg, train_pairs, val_pairs, r.report);

  const auto topo = grid::build_grid_graph(ds.grid);
  const auto mask = grid::build_node_mask(ds.grid);
  r.report.final_train_loss = evaluate_loss(r.checkpoint.model, topo, mask, train_pairs);
  r.report.final_val_loss = evaluate_loss(r.checkpoint.model, topo, mask, val_pairs);
  r.report.parameter_count = r.checkpoint.model.params.parameter_count();
  r.report.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!out_dir.empty()) {
    save_checkpoint(r.checkpoint, out_dir);
    r.report.checkpoint = out_dir;
    save_report(r.report, out_dir / "report.json");
  }
  return r;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j = {{"format", "reachbound-checkpoint"},
            {"version", 1},
            {"model", ck.model.config},
            {"training", ck.train},
            {"dataset", ck.dataset},
            {"stats", ck.model.stats},
            {"parameter_count", ck.model.params.parameter_count()}};
  write_json_file(dir / "config.json", j);
  const auto& p = ck.model.params;
  nn::write_parameter_file(dir / "params.bin", {{"encoder", p.encoder},
                                                {"message", p.message},
                                                {"update", p.update},
                                                {"decoder", p.decoder}});
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "config.json") || !std::filesystem::exists(dir / "params.bin"))
    throw InputError("no checkpoint in " + dir.string());
  const json j = read_json_file(dir / "config.json");
  Checkpoint ck;
  try {
    require_keys(j, {"format", "version", "model", "training", "dataset", "stats", "parameter_count"},
                 "checkpoint");
    if (j.value("format", "") != "reachbound-checkpoint" || j.value("version", 0) != 1)
      throw InputError("unsupported checkpoint format in " + dir.string());
    ck.model.config = j.at("model").get<gnn::GnnConfig>();
    ck.train = j.at("training").get<TrainConfig>();
    ck.dataset = j.at("dataset").get<data::DatasetSpec>();
    ck.model.stats = j.at("stats").get<data::NormalizationStats>();
  } catch (const json::exception& e) {
    throw InputError("malformed checkpoint config: " + std::string(e.what()));
  }
  auto nets = nn::read_parameter_file(dir / "params.bin");
  auto find = [&](const char* name) -> nn::Mlp<double> {
    for (auto& n : nets)
      if (n.name == name) return std::move(n.net);
    throw InputError(std::string("checkpoint lacks network '") + name + "'");
  };
  ck.model.params = {find("encoder"), find("message"), find("update"), find("decoder")};
  const auto expect = gnn::zero_params<double>(ck.model.config);
  const auto a = expect.buffers();
  const auto b = std::as_const(ck.model.params).buffers();
  bool shape_ok = a.size() == b.size();
  for (std::size_t k = 0; shape_ok && k < a.size(); ++k) shape_ok = a[k].size() == b[k].size();
  if (!shape_ok) throw InputError("checkpoint parameters do not match its model config");
  return ck;
}

void save_report(const TrainReport& r, const std::filesystem::path& path) {
  write_json_file(path, json(r));
}

std::string checkpoint_hash(const std::filesystem::path& dir) {
  std::string bytes;
  for (const char* f : {"config.json", "params.bin"}) {
    std::ifstream in(dir / f, std::ios::binary);
    if (!in) throw InputError("no checkpoint in " + dir.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes += ss.str();
  }
  return sha256_hex({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

std::string cell_name(std::size_t mpi, std::uint64_t seed) {
  return "M" + std::to_string(mpi) + "_s" + std::to_string(seed);
}

SweepManifest read_sweep_manifest(const std::filesystem::path& dir) {
  const json j = read_json_file(dir / "sweep.json");
  SweepManifest m;
  try {
    require_keys(j, {"format", "cells"}, "sweep manifest");
    m.cells = j.at("cells").get<std::vector<SweepCell>>();
  } catch (const json::exception& e) {
    throw InputError("malformed sweep manifest: " + std::string(e.what()));
  }
  return m;
}

void write_sweep_manifest(const SweepManifest& m, const std::filesystem::path& dir) {
  write_json_file(dir / "sweep.json", {{"format", "reachbound-sweep"}, {"cells", m.cells}});
}

SweepManifest train_sweep(const data::Dataset& ds, const gnn::GnnConfig& base_model,
                          const TrainConfig& base_train, std::span<const std::size_t> mpi_list,
                          std::span<const std::uint64_t> seeds, const std::filesystem::path& out_dir,
                          std::size_t jobs) {
  std::filesystem::create_directories(out_dir);
  SweepManifest previous;
  if (std::filesystem::exists(out_dir / "sweep.json")) previous = read_sweep_manifest(out_dir);

  SweepManifest m;
  for (auto M : mpi_list)
    for (auto s : seeds) {
      SweepCell c;
      c.mpi = M;
      c.seed = s;
      c.checkpoint = cell_name(M, s);
      c.status = "pending";
      for (const auto& p : previous.cells)
        if (p.mpi == M && p.seed == s && p.status == "done" &&
            std::filesystem::exists(out_dir / p.checkpoint / "params.bin"))
          c = p;
      m.cells.push_back(c);
    }
  write_sweep_manifest(m, out_dir);

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next++;
      if (k >= m.cells.size()) return;
      SweepCell cell;
      {
        std::lock_guard lock(mu);
        cell = m.cells[k];
      }
      if (cell.status == "done") continue;
      auto model = base_model;
      model.mpi = cell.mpi;
      auto tc = base_train;
      tc.seed = cell.seed;
      try {
        const auto r = train(ds, model, tc, out_dir / cell.checkpoint);
        cell.status = "done";
        cell.error.clear();
        cell.parameter_count = r.report.parameter_count;
        cell.wall_seconds = r.report.wall_seconds;
      } catch (const std::exception& e) {
        cell.status = "failed";
        cell.error = e.what();
      }
      std::lock_guard lock(mu);
      m.cells[k] = cell;
      write_sweep_manifest(m, out_dir);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, m.cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return m;
}

}  // namespace reachbound::train
