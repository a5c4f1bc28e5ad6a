#include "reachbound/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "reachbound/errors.hpp"

namespace reachbound::eval {

RrmseResult rrmse(const pde::Trajectory& pred, const pde::Trajectory& truth, std::size_t channel,
                  bool skip_first) {
  if (pred.snapshots.size() != truth.snapshots.size())
    throw std::invalid_argument("rrmse: snapshot counts differ");
  RrmseResult r;
  double num = 0.0, den = 0.0;
  for (std::size_t k = skip_first ? 1 : 0; k < truth.snapshots.size(); ++k) {
    const auto& p = pred.snapshots[k];
    const auto& t = truth.snapshots[k];
    if (p.n_dof != t.n_dof || p.values.size() != t.values.size() || channel >= t.n_dof)
      throw std::invalid_argument("rrmse: snapshot shapes differ");
    if (std::abs(p.time - t.time) > 1e-9 * std::max(1.0, std::abs(t.time)))
      throw std::invalid_argument("rrmse: snapshot times differ");
    double e = 0.0, s = 0.0;
    for (std::size_t i = channel; i < t.values.size(); i += t.n_dof) {
      const double d = p.values[i] - t.values[i];
      e += d * d;
      s += t.values[i] * t.values[i];
    }
    r.err_sq.push_back(e);
    r.truth_sq.push_back(s);
    r.per_step.push_back(s > 0 ? std::sqrt(e / s) : (e > 0 ? INFINITY : 0.0));
    num += e;
    den += s;
  }
  r.aggregate = den > 0 ? std::sqrt(num / den) : (num > 0 ? INFINITY : 0.0);
  return r;
}

SweepRow evaluate_checkpoint(const train::Checkpoint& ck, const data::Dataset& ds,
                             std::span<const std::size_t> trajectories) {
  if (ck.dataset.problem != ds.spec.problem)
    throw InputError("checkpoint was trained on a different problem");
  if (ck.model.config.n_dof != data::channels_of(ds.spec.problem))
    throw InputError("checkpoint channel count does not match dataset");
  if (trajectories.empty()) throw NothingToEvaluate("no trajectories to evaluate");
  const auto topo = grid::build_grid_graph(ds.grid);
  const bool td = data::is_time_dependent(ds.spec.problem);

  SweepRow row;
  row.mpi = ck.model.config.mpi;
  row.seed = ck.train.seed;
  row.reach = bounds::check_under_reach(row.mpi, ds.spec.bound_spec());
  double total = 0.0;
  for (auto idx : trajectories) {
    const auto& truth = ds.trajectories.at(idx);
    RrmseResult r;
    if (td) {
      const auto pred = gnn::rollout(truth.snapshots.front(), truth.snapshots.size() - 1, ds.gnn_dt,
                                     ds.grid, topo, ck.model);
      r = rrmse(pred, truth, 0, true);
    } else {
      pde::Trajectory p, t;
      p.snapshots.push_back(gnn::forward(truth.snapshots[0], ds.grid, topo, ck.model));
      p.snapshots.back().time = truth.snapshots[1].time;
      t.snapshots.push_back(truth.snapshots[1]);
      r = rrmse(p, t, 0, false);
    }
    if (row.rrmse_per_step.empty()) row.rrmse_per_step.assign(r.per_step.size(), 0.0);
    for (std::size_t k = 0; k < r.per_step.size(); ++k) row.rrmse_per_step[k] += r.per_step[k];
    total += r.aggregate;
  }
  const double n = double(trajectories.size());
  for (auto& v : row.rrmse_per_step) v /= n;
  row.rrmse_final = total / n;
  return row;
}

std::vector<SweepAggregate> aggregate(const std::vector<SweepRow>& rows,
                                      const bounds::BoundSpec& bound) {
  std::map<std::size_t, std::vector<double>> by_m;
  for (const auto& r : rows)
    if (r.status == "done") by_m[r.mpi].push_back(r.rrmse_final);
  std::vector<SweepAggregate> out;
  for (const auto& [m, v] : by_m) {
    SweepAggregate a;
    a.mpi = m;
    a.n = v.size();
    for (double x : v) a.mean += x;
    a.mean /= double(a.n);
    for (double x : v) a.std += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(a.std / double(a.n));
    a.reach = bounds::check_under_reach(m, bound);
    out.push_back(a);
  }
  return out;
}

SweepResult evaluate_sweep(const std::filesystem::path& sweep_dir, const data::Dataset& ds,
                           std::size_t jobs) {
  std::vector<train::SweepCell> cells;
  if (std::filesystem::exists(sweep_dir / "sweep.json")) {
    cells = train::read_sweep_manifest(sweep_dir).cells;
  } else if (std::filesystem::is_directory(sweep_dir)) {
    for (const auto& e : std::filesystem::directory_iterator(sweep_dir))
      if (e.is_directory() && std::filesystem::exists(e.path() / "params.bin")) {
        train::SweepCell c;
        c.checkpoint = e.path().filename().string();
        c.status = "done";
        cells.push_back(c);
      }
    std::sort(cells.begin(), cells.end(),
              [](const auto& a, const auto& b) { return a.checkpoint < b.checkpoint; });
  }
  const bool any = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.status == "done"; });
  if (!any) throw NothingToEvaluate("nothing to evaluate: no finished checkpoints in " + sweep_dir.string());

  SweepResult res;
  res.problem = ds.spec.problem;
  const auto bspec = ds.spec.bound_spec();
  res.bound = bounds::mpi_lower_bound(bspec);
  res.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < cells.size();) {
      const auto& c = cells[k];
      SweepRow row;
      row.mpi = c.mpi;
      row.seed = c.seed;
      row.status = c.status == "done" ? "done" : "failed";
      if (c.status == "done") {
        const auto ck = train::load_checkpoint(sweep_dir / c.checkpoint);
        row = evaluate_checkpoint(ck, ds, ds.splits.test);
        row.runtime = c.wall_seconds;
      } else {
        row.reach = bounds::check_under_reach(c.mpi, bspec);
      }
      res.rows[k] = std::move(row);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  res.aggregates = aggregate(res.rows, bspec);
  return res;
}

std::optional<std::size_t> detect_saturation(const SweepResult& r, double tau) {
  if (r.aggregates.size() < 3) return std::nullopt;
  double best = INFINITY;
  for (const auto& a : r.aggregates) best = std::min(best, a.mean);
  for (const auto& a : r.aggregates)  // ascending M
    if (a.mean <= (1.0 + tau) * best) return a.mpi;
  return std::nullopt;
}

void write_sweep_csv(const SweepResult& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out.precision(17);
  out << "problem,M,seed,step,rrmse\n";
  const auto name = data::problem_name(r.problem);
  for (const auto& row : r.rows) {
    if (row.status != "done") {
      out << name << ',' << row.mpi << ',' << row.seed << ",all,failed\n";
      continue;
    }
    for (std::size_t k = 0; k < row.rrmse_per_step.size(); ++k)
      out << name << ',' << row.mpi << ',' << row.seed << ',' << k + 1 << ','
          << row.rrmse_per_step[k] << '\n';
    out << name << ',' << row.mpi << ',' << row.seed << ",all," << row.rrmse_final << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_summary_csv(const SweepResult& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out.precision(17);
  out << "M,mean,std,n,reach\n";
  for (const auto& a : r.aggregates)
    out << a.mpi << ',' << a.mean << ',' << a.std << ',' << a.n << ',' << bounds::reach_name(a.reach)
        << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ExtrapolationReport evaluate_extrapolation(const train::Checkpoint& ck,
                                           const data::DatasetSpec& spec, std::size_t jobs) {
  if (spec.problem != ck.dataset.problem)
    throw InputError("extrapolation spec must keep the training problem");
  ExtrapolationReport rep;
  rep.spec = spec;
  rep.model_mpi = ck.model.config.mpi;
  const auto bspec = spec.bound_spec();
  rep.bound = bounds::mpi_lower_bound(bspec);
  rep.reach = bounds::check_under_reach(rep.model_mpi, bspec);
  const auto ds = data::generate(spec, jobs);
  std::vector<std::size_t> all(ds.trajectories.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  double total = 0.0;
  for (auto i : all) {
    const std::size_t one[] = {i};
    const auto row = evaluate_checkpoint(ck, ds, one);
    rep.per_trajectory.push_back(row.rrmse_final);
    rep.finite = rep.finite && std::isfinite(row.rrmse_final);
    total += row.rrmse_final;
  }
  rep.rrmse = total / double(all.size());
  return rep;
}

std::vector<std::vector<double>> latent_map(const train::Checkpoint& ck, const grid::GridSpec& g,
                                            const pde::FieldSnapshot& input) {
  const auto topo = grid::build_grid_graph(g);
  return gnn::latent_norm_map(input, g, topo, ck.model);
}

void write_latent_map_csv(const std::vector<std::vector<double>>& U, const grid::GridSpec& g,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out.precision(17);
  out << "node,row,col,m,U\n";
  for (std::size_t m = 0; m < U.size(); ++m)
    for (std::size_t i = 0; i < U[m].size(); ++i)
      out << i << ',' << g.row_of(i) << ',' << g.col_of(i) << ',' << m << ',' << U[m][i] << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace reachbound::eval
