#pragma once

// Dataset generation, pruning, splitting, normalisation and persistence.
//
// On disk a dataset is a directory holding `manifest.json` (spec, seed, grid,
// snapshot times, normalisation stats, split indices) plus one binary file per
// trajectory, `traj_NNNNN.bin`:
//
//   u32 magic (0x53445052, "RPDS") | u32 n_snapshots | u32 n_nodes | u32 n_channels
//   f64 payload, little-endian, row-major [snapshot, node, channel]
//
// Poisson samples have no time axis; they are stored as two-snapshot files
// (snapshot 0 = charge density rho, snapshot 1 = potential u).

#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>
#include <vector>

#include "reachbound/bounds.hpp"
#include "reachbound/grid.hpp"
#include "reachbound/pde_solvers.hpp"

namespace reachbound::data {

inline constexpr std::uint32_t kTrajectoryMagic = 0x53445052u;
inline constexpr int kManifestVersion = 1;

enum class Problem { wave, heat, poisson };

std::string_view problem_name(Problem p);
Problem parse_problem(std::string_view name);
bounds::PdeClass pde_class_of(Problem p);
/// Channels per node in stored snapshots: wave (u, du/dt), heat u, poisson rho / u.
std::size_t channels_of(Problem p);
bool is_time_dependent(Problem p);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  bool operator==(const SplitFractions&) const = default;
};

struct DatasetSpec {
  Problem problem = Problem::wave;
  double domain_x = 1.0;  // nominal extents; nodes per side = round(extent / dx)
  double domain_y = 1.0;
  double dx = 0.04;
  pde::PhysicalConstants constants;
  std::size_t n_sims = 100;
  std::size_t keep_snapshots = 10;
  double horizon = 2.0;
  double solver_dt = 0.001;  // upper bound on the fine solver step
  SplitFractions split;
  std::uint64_t seed = 0;
  std::size_t min_charges = 1;
  std::size_t max_charges = 3;
  double jacobi_tol = 1e-8;
  std::size_t jacobi_max_iters = 1000000;
  std::size_t samples_per_config = 0;  // informational only

  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
  grid::GridSpec grid() const;
  /// Largest nominal extent; the L of the geometric bound.
  double extent() const { return std::max(domain_x, domain_y); }
  /// horizon / (keep_snapshots - 1); zero for poisson.
  double gnn_dt() const;
  /// Fine steps per kept snapshot: the solver step is gnn_dt / substeps() <= solver_dt.
  std::size_t substeps() const;
  double fine_dt() const;
  bounds::BoundSpec bound_spec() const;

  bool operator==(const DatasetSpec&) const = default;
};

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
  bool operator==(const ChannelStats&) const = default;
};

struct NormalizationStats {
  ChannelStats input;   // model inputs (fields, or rho for poisson)
  ChannelStats target;  // one-step increments (zero mean, RMS scale), or u for poisson
  bool operator==(const NormalizationStats&) const = default;
};

struct Splits {
  std::vector<std::size_t> train, val, test;
  bool operator==(const Splits&) const = default;
};

struct Dataset {
  DatasetSpec spec;
  grid::GridSpec grid;
  std::vector<pde::Trajectory> trajectories;
  NormalizationStats stats;
  Splits splits;
  double gnn_dt = 0.0;
};

struct InitialCondition {
  pde::FieldSnapshot u0;   // wave / heat
  pde::FieldSnapshot v0;   // wave
  pde::FieldSnapshot rho;  // poisson
};

/// Wave/heat: 1-3 Gaussian bumps; poisson: point charges. See README for the distributions.
InitialCondition sample_initial_condition(const DatasetSpec& spec, const grid::GridSpec& g,
                                          std::mt19937_64& rng);

/// Solves spec.n_sims simulations (in parallel over `jobs` threads); deterministic given seed.
Dataset generate(const DatasetSpec& spec, std::size_t jobs = 1);

/// Deterministic shuffled split.
Splits make_splits(std::size_t n, const SplitFractions& f, std::uint64_t seed);

/// Statistics over the training split only.
NormalizationStats compute_stats(const Dataset& ds);

/// Z-score per channel on node-major values; std below 1e-12 is clamped to 1.
std::vector<double> normalize(std::span<const double> values, const ChannelStats& stats);
std::vector<double> denormalize(std::span<const double> values, const ChannelStats& stats);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

void write_trajectory_file(const std::filesystem::path& path, const pde::Trajectory& t);
/// Returns snapshots with values only (times come from the manifest).
std::vector<pde::FieldSnapshot> read_trajectory_file(const std::filesystem::path& path);

}  // namespace reachbound::data
