#pragma once

// Rollout error metrics, sweep aggregation, saturation and extrapolation.
//
// RRMSE = sqrt(sum (pred - truth)^2) / sqrt(sum truth^2), summed over rollout
// steps 1..n and nodes; the per-step variant sums over nodes only. Fields with
// several channels are scored on `channel` (0, the displacement, by default).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reachbound/bounds.hpp"
#include "reachbound/gnn.hpp"
#include "reachbound/training.hpp"

namespace reachbound::eval {

struct RrmseResult {
  double aggregate = 0.0;
  std::vector<double> per_step;
  std::vector<double> err_sq;    // per step, sum over nodes
  std::vector<double> truth_sq;  // per step, sum over nodes
};

/// Compares snapshots 1..n (snapshot 0 is the shared initial condition) when
/// skip_first is set, otherwise every snapshot.
/// Throws std::invalid_argument on mismatched shapes or times.
RrmseResult rrmse(const pde::Trajectory& pred, const pde::Trajectory& truth, std::size_t channel = 0,
                  bool skip_first = true);

struct SweepRow {
  std::size_t mpi = 0;
  std::uint64_t seed = 0;
  std::string status = "done";  // "done" | "failed"
  std::vector<double> rrmse_per_step;
  double rrmse_final = 0.0;  // whole-rollout RRMSE, averaged over test trajectories
  double runtime = 0.0;
  bounds::Reach reach = bounds::Reach::under;
};

struct SweepAggregate {
  std::size_t mpi = 0;
  double mean = 0.0;
  double std = 0.0;  // population std over seeds
  std::size_t n = 0;
  bounds::Reach reach = bounds::Reach::under;
};

struct SweepResult {
  data::Problem problem = data::Problem::wave;
  std::vector<SweepRow> rows;
  std::vector<SweepAggregate> aggregates;  // ascending M
  std::size_t bound = 0;
};

/// Rolls every requested test trajectory of `ds` out from its first snapshot.
SweepRow evaluate_checkpoint(const train::Checkpoint& ck, const data::Dataset& ds,
                             std::span<const std::size_t> trajectories);

/// Mean and std per M over the rows marked done.
std::vector<SweepAggregate> aggregate(const std::vector<SweepRow>& rows,
                                      const bounds::BoundSpec& bound);

/// Evaluates every cell of a sweep directory on the dataset's test split.
/// Throws NothingToEvaluate when the directory holds no checkpoints.
SweepResult evaluate_sweep(const std::filesystem::path& sweep_dir, const data::Dataset& ds,
                           std::size_t jobs = 1);

/// Smallest M whose mean error is within (1 + tau) of the minimum; nullopt when
/// fewer than three distinct M were tested.
std::optional<std::size_t> detect_saturation(const SweepResult& r, double tau = 0.5);

/// Columns: problem,M,seed,step,rrmse. step "all" is the whole-rollout value.
void write_sweep_csv(const SweepResult& r, const std::filesystem::path& path);
/// Columns: M,mean,std,n,reach.
void write_summary_csv(const SweepResult& r, const std::filesystem::path& path);

struct ExtrapolationReport {
  data::DatasetSpec spec;
  std::size_t model_mpi = 0;
  std::size_t bound = 0;
  bounds::Reach reach = bounds::Reach::under;
  double rrmse = 0.0;
  std::vector<double> per_trajectory;
  bool finite = true;
};

/// Generates `spec` afresh, rebuilds the graph and rolls the unchanged model out
/// on every trajectory (time-dependent) or sample (poisson).
ExtrapolationReport evaluate_extrapolation(const train::Checkpoint& ck,
                                           const data::DatasetSpec& spec, std::size_t jobs = 1);

/// U[m][i] for m = 0..M.
std::vector<std::vector<double>> latent_map(const train::Checkpoint& ck, const grid::GridSpec& g,
                                            const pde::FieldSnapshot& input);
/// Columns: node,row,col,m,U.
void write_latent_map_csv(const std::vector<std::vector<double>>& U, const grid::GridSpec& g,
                          const std::filesystem::path& path);

}  // namespace reachbound::eval
