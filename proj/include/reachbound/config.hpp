#pragma once

// JSON (de)serialisation for every persisted type, and the run configuration
// read by the command line tool.
//
// Readers are strict: an unknown key anywhere is a ConfigError. Missing keys
// keep their defaults.
//
// Run configuration layout:
//   {
//     "problem":   "wave" | "heat" | "poisson",
//     "grid":      { "domain_x", "domain_y", "dx" },
//     "constants": { "c", "alpha", "eps0" },
//     "dataset":   { "n_sims", "keep_snapshots", "horizon", "solver_dt", "seed",
//                    "split": { "train", "val", "test" },
//                    "min_charges", "max_charges", "jacobi_tol", "jacobi_max_iters" },
//     "model":     { "latent_dim", "mpi", "hidden_dim", "hidden_layers", "mode",
//                    "latent_residual", "update_init_scale" },
//     "training":  { "epochs", "batch_size", "lr", "lr_decay", "decay_stages", "seed",
//                    "noise_std", "precision" },
//     "sweep":     { "mpi": [..], "seeds": [..], "jobs" }
//   }

#include <filesystem>
#include <initializer_list>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "reachbound/datasets.hpp"
#include "reachbound/gnn.hpp"
#include "reachbound/grid.hpp"
#include "reachbound/pde_solvers.hpp"
#include "reachbound/training.hpp"

namespace reachbound {

using json = nlohmann::json;

/// Throws ConfigError if `j` is not an object or holds a key outside `allowed`.
void require_keys(const json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view where);

struct SweepConfig {
  std::vector<std::size_t> mpi{1, 2, 4, 6};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t jobs = 1;
  bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
  data::DatasetSpec dataset;
  gnn::GnnConfig model;  // n_dof follows the problem
  train::TrainConfig training;
  SweepConfig sweep;
};

/// Strict parse plus semantic validation; ConfigError on any violation.
RunConfig parse_run_config(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);
json to_json(const RunConfig& rc);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

namespace grid {
void to_json(json& j, const GridSpec& g);
void from_json(const json& j, GridSpec& g);
}  // namespace grid

namespace pde {
void to_json(json& j, const PhysicalConstants& c);
void from_json(const json& j, PhysicalConstants& c);
}  // namespace pde

namespace data {
void to_json(json& j, const SplitFractions& s);
void from_json(const json& j, SplitFractions& s);
void to_json(json& j, const DatasetSpec& s);
void from_json(const json& j, DatasetSpec& s);
void to_json(json& j, const ChannelStats& s);
void from_json(const json& j, ChannelStats& s);
void to_json(json& j, const NormalizationStats& s);
void from_json(const json& j, NormalizationStats& s);
}  // namespace data

namespace gnn {
void to_json(json& j, const GnnConfig& c);
void from_json(const json& j, GnnConfig& c);
}  // namespace gnn

namespace train {
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const TrainReport& r);
void to_json(json& j, const SweepCell& c);
void from_json(const json& j, SweepCell& c);
}  // namespace train

}  // namespace reachbound
