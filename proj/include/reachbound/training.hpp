#pragma once

// One-step supervised training and (M, seed) sweeps.
//
// A checkpoint is a directory:
//   config.json   model config, training config, normalisation stats, dataset spec
//   params.bin    float64 parameter payload (see checkpoint.hpp)
//   report.json   loss curves and timings (not part of the content hash)

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "reachbound/datasets.hpp"
#include "reachbound/gnn.hpp"

namespace reachbound::train {

enum class Precision { float32, float64 };

std::string_view precision_name(Precision p);
Precision parse_precision(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 8;   // graphs per optimiser step
  double lr = 1e-3;
  double lr_decay = 0.5;        // multiplied in at each decay stage
  std::size_t decay_stages = 3; // training is split into this many equal stages
  std::uint64_t seed = 0;
  double noise_std = 1e-3;      // on normalised inputs, time-dependent problems only
  Precision precision = Precision::float32;

  /// Throws std::invalid_argument on non-positive sizes or rates.
  void validate() const;
  double lr_at(std::size_t epoch) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Normalised one-step pairs, node-major [node, channel].
struct PairSet {
  std::size_t n_nodes = 0;
  std::size_t n_dof = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
  // per channel: normalised target shift per unit of normalised input noise
  std::vector<double> noise_to_target;
  std::size_t size() const { return inputs.size(); }
};

/// Time-dependent: (u_n, u_{n+1} - u_n) for consecutive snapshots; poisson: (rho, u).
PairSet make_pairs(const data::Dataset& ds, std::span<const std::size_t> trajectories);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double final_train_loss = 0.0;  // best checkpoint, float64, no input noise
  double final_val_loss = 0.0;
  double wall_seconds = 0.0;
  std::size_t parameter_count = 0;
  std::filesystem::path checkpoint;
};

struct Checkpoint {
  gnn::Surrogate model;
  TrainConfig train;
  data::DatasetSpec dataset;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainReport report;
};

gnn::GnnConfig model_config_for(const data::Dataset& ds, gnn::GnnConfig base);

/// Mean squared error over normalised targets, every node and channel; in
/// residual mode boundary nodes contribute zero (their increment is clamped).
double evaluate_loss(const gnn::Surrogate& model, const grid::GraphTopology& topo,
                     const grid::NodeMask& mask, const PairSet& pairs);

/// Trains from init_params(model_cfg, train_cfg.seed); keeps the best-validation
/// parameters. Writes the checkpoint when `out_dir` is non-empty.
/// Throws DivergenceError on a non-finite loss.
TrainResult train(const data::Dataset& ds, const gnn::GnnConfig& model_cfg,
                  const TrainConfig& train_cfg, const std::filesystem::path& out_dir = {});

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);
void save_report(const TrainReport& r, const std::filesystem::path& path);
/// SHA-256 of the checkpoint's config.json and params.bin.
std::string checkpoint_hash(const std::filesystem::path& dir);

struct SweepCell {
  std::size_t mpi = 0;
  std::uint64_t seed = 0;
  std::string checkpoint;  // relative to the sweep directory
  std::string status;      // "pending" | "done" | "failed"
  std::string error;
  std::size_t parameter_count = 0;
  double wall_seconds = 0.0;
};

struct SweepManifest {
  std::vector<SweepCell> cells;
};

std::string cell_name(std::size_t mpi, std::uint64_t seed);

/// One checkpoint per (M, seed) under `out_dir`, manifest in sweep.json.
/// Cells already marked done with a readable checkpoint are skipped.
SweepManifest train_sweep(const data::Dataset& ds, const gnn::GnnConfig& base_model,
                          const TrainConfig& base_train, std::span<const std::size_t> mpi_list,
                          std::span<const std::uint64_t> seeds, const std::filesystem::path& out_dir,
                          std::size_t jobs = 1);

SweepManifest read_sweep_manifest(const std::filesystem::path& dir);
void write_sweep_manifest(const SweepManifest& m, const std::filesystem::path& dir);

}  // namespace reachbound::train
