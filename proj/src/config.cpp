#include "reachbound/config.hpp"

#include <fstream>
#include <string>

#include "reachbound/errors.hpp"

namespace reachbound {

void require_keys(const json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

}  // namespace

namespace grid {
void to_json(json& j, const GridSpec& g) {
  j = {{"nx", g.nx}, {"ny", g.ny}, {"dx", g.dx}, {"dy", g.dy}};
}
void from_json(const json& j, GridSpec& g) {
  require_keys(j, {"nx", "ny", "dx", "dy"}, "grid");
  read_opt(j, "nx", g.nx);
  read_opt(j, "ny", g.ny);
  read_opt(j, "dx", g.dx);
  read_opt(j, "dy", g.dy);
}
}  // namespace grid

namespace pde {
void to_json(json& j, const PhysicalConstants& c) {
  j = {{"c", c.c}, {"alpha", c.alpha}, {"eps0", c.eps0}};
}
void from_json(const json& j, PhysicalConstants& c) {
  require_keys(j, {"c", "alpha", "eps0"}, "constants");
  read_opt(j, "c", c.c);
  read_opt(j, "alpha", c.alpha);
  read_opt(j, "eps0", c.eps0);
}
}  // namespace pde

namespace data {
void to_json(json& j, const SplitFractions& s) {
  j = {{"train", s.train}, {"val", s.val}, {"test", s.test}};
}
void from_json(const json& j, SplitFractions& s) {
  require_keys(j, {"train", "val", "test"}, "split");
  read_opt(j, "train", s.train);
  read_opt(j, "val", s.val);
  read_opt(j, "test", s.test);
}

void to_json(json& j, const DatasetSpec& s) {
  j = {{"problem", problem_name(s.problem)},
       {"domain_x", s.domain_x},
       {"domain_y", s.domain_y},
       {"dx", s.dx},
       {"constants", s.constants},
       {"n_sims", s.n_sims},
       {"keep_snapshots", s.keep_snapshots},
       {"horizon", s.horizon},
       {"solver_dt", s.solver_dt},
       {"split", s.split},
       {"seed", s.seed},
       {"min_charges", s.min_charges},
       {"max_charges", s.max_charges},
       {"jacobi_tol", s.jacobi_tol},
       {"jacobi_max_iters", s.jacobi_max_iters}};
}

void from_json(const json& j, DatasetSpec& s) {
  require_keys(j,
               {"problem", "domain_x", "domain_y", "dx", "constants", "n_sims", "keep_snapshots",
                "horizon", "solver_dt", "split", "seed", "min_charges", "max_charges", "jacobi_tol",
                "jacobi_max_iters"},
               "dataset spec");
  if (j.contains("problem")) s.problem = parse_problem(j.at("problem").get<std::string>());
  read_opt(j, "domain_x", s.domain_x);
  read_opt(j, "domain_y", s.domain_y);
  read_opt(j, "dx", s.dx);
  read_opt(j, "constants", s.constants);
  read_opt(j, "n_sims", s.n_sims);
  read_opt(j, "keep_snapshots", s.keep_snapshots);
  read_opt(j, "horizon", s.horizon);
  read_opt(j, "solver_dt", s.solver_dt);
  read_opt(j, "split", s.split);
  read_opt(j, "seed", s.seed);
  read_opt(j, "min_charges", s.min_charges);
  read_opt(j, "max_charges", s.max_charges);
  read_opt(j, "jacobi_tol", s.jacobi_tol);
  read_opt(j, "jacobi_max_iters", s.jacobi_max_iters);
}

void to_json(json& j, const ChannelStats& s) { j = {{"mean", s.mean}, {"std", s.std}}; }
void from_json(const json& j, ChannelStats& s) {
  require_keys(j, {"mean", "std"}, "channel stats");
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.std.size()) throw ConfigError("channel stats: mean/std length mismatch");
}
void to_json(json& j, const NormalizationStats& s) {
  j = {{"input", s.input}, {"target", s.target}};
}
void from_json(const json& j, NormalizationStats& s) {
  require_keys(j, {"input", "target"}, "normalisation stats");
  s.input = j.at("input").get<ChannelStats>();
  s.target = j.at("target").get<ChannelStats>();
}
}  // namespace data

namespace gnn {
void to_json(json& j, const GnnConfig& c) {
  j = {{"latent_dim", c.latent_dim},       {"mpi", c.mpi},
       {"n_dof", c.n_dof},                 {"hidden_dim", c.hidden_dim},
       {"hidden_layers", c.hidden_layers}, {"mode", mode_name(c.mode)},
       {"latent_residual", c.latent_residual}, {"update_init_scale", c.update_init_scale}};
}
void from_json(const json& j, GnnConfig& c) {
  require_keys(j,
               {"latent_dim", "mpi", "n_dof", "hidden_dim", "hidden_layers", "mode",
                "latent_residual", "update_init_scale"},
               "model");
  read_opt(j, "latent_dim", c.latent_dim);
  read_opt(j, "mpi", c.mpi);
  read_opt(j, "n_dof", c.n_dof);
  read_opt(j, "hidden_dim", c.hidden_dim);
  read_opt(j, "hidden_layers", c.hidden_layers);
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  read_opt(j, "latent_residual", c.latent_residual);
  read_opt(j, "update_init_scale", c.update_init_scale);
}
}  // namespace gnn

namespace train {
void to_json(json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"lr", c.lr},
       {"lr_decay", c.lr_decay},
       {"decay_stages", c.decay_stages},
       {"seed", c.seed},
       {"noise_std", c.noise_std},
       {"precision", precision_name(c.precision)}};
}
void from_json(const json& j, TrainConfig& c) {
  require_keys(j,
               {"epochs", "batch_size", "lr", "lr_decay", "decay_stages", "seed", "noise_std",
                "precision"},
               "training");
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "lr", c.lr);
  read_opt(j, "lr_decay", c.lr_decay);
  read_opt(j, "decay_stages", c.decay_stages);
  read_opt(j, "seed", c.seed);
  read_opt(j, "noise_std", c.noise_std);
  if (j.contains("precision")) c.precision = parse_precision(j.at("precision").get<std::string>());
}

void to_json(json& j, const TrainReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs)
    epochs.push_back(
        {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}});
  j = {{"epochs", epochs},
       {"best_epoch", r.best_epoch},
       {"final_train_loss", r.final_train_loss},
       {"final_val_loss", r.final_val_loss},
       {"wall_seconds", r.wall_seconds},
       {"parameter_count", r.parameter_count},
       {"checkpoint", r.checkpoint.string()}};
}

void to_json(json& j, const SweepCell& c) {
  j = {{"mpi", c.mpi},
       {"seed", c.seed},
       {"checkpoint", c.checkpoint},
       {"status", c.status},
       {"error", c.error},
       {"parameter_count", c.parameter_count},
       {"wall_seconds", c.wall_seconds}};
}
void from_json(const json& j, SweepCell& c) {
  require_keys(j, {"mpi", "seed", "checkpoint", "status", "error", "parameter_count", "wall_seconds"},
               "sweep cell");
  read_opt(j, "mpi", c.mpi);
  read_opt(j, "seed", c.seed);
  read_opt(j, "checkpoint", c.checkpoint);
  read_opt(j, "status", c.status);
  read_opt(j, "error", c.error);
  read_opt(j, "parameter_count", c.parameter_count);
  read_opt(j, "wall_seconds", c.wall_seconds);
}
}  // namespace train

RunConfig parse_run_config(const json& j) {
  RunConfig rc;
  try {
    require_keys(j, {"problem", "grid", "constants", "dataset", "model", "training", "sweep"},
                 "config");
    if (!j.contains("problem")) throw ConfigError("config: 'problem' is required");
    auto& ds = rc.dataset;
    ds.problem = data::parse_problem(j.at("problem").get<std::string>());
    if (ds.problem == data::Problem::poisson) rc.model.mode = gnn::PredictionMode::direct;

    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      require_keys(g, {"domain_x", "domain_y", "dx"}, "grid");
      read_opt(g, "domain_x", ds.domain_x);
      read_opt(g, "domain_y", ds.domain_y);
      read_opt(g, "dx", ds.dx);
    }
    read_opt(j, "constants", ds.constants);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      require_keys(d,
                   {"n_sims", "keep_snapshots", "horizon", "solver_dt", "seed", "split",
                    "min_charges", "max_charges", "jacobi_tol", "jacobi_max_iters"},
                   "dataset");
      read_opt(d, "n_sims", ds.n_sims);
      read_opt(d, "keep_snapshots", ds.keep_snapshots);
      read_opt(d, "horizon", ds.horizon);
      read_opt(d, "solver_dt", ds.solver_dt);
      read_opt(d, "seed", ds.seed);
      read_opt(d, "split", ds.split);
      read_opt(d, "min_charges", ds.min_charges);
      read_opt(d, "max_charges", ds.max_charges);
      read_opt(d, "jacobi_tol", ds.jacobi_tol);
      read_opt(d, "jacobi_max_iters", ds.jacobi_max_iters);
    }
    if (j.contains("model")) {
      if (j.at("model").contains("n_dof"))
        throw ConfigError("model: n_dof is derived from the problem and cannot be set");
      from_json(j.at("model"), rc.model);
    }
    rc.model.n_dof = data::channels_of(ds.problem);
    read_opt(j, "training", rc.training);
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      require_keys(s, {"mpi", "seeds", "jobs"}, "sweep");
      read_opt(s, "mpi", rc.sweep.mpi);
      read_opt(s, "seeds", rc.sweep.seeds);
      read_opt(s, "jobs", rc.sweep.jobs);
    }
    ds.validate();
    rc.model.validate();
    rc.training.validate();
    if (rc.sweep.mpi.empty() || rc.sweep.seeds.empty() || rc.sweep.jobs == 0)
      throw ConfigError("sweep: mpi and seeds must be non-empty and jobs positive");
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

json to_json(const RunConfig& rc) {
  const auto& ds = rc.dataset;
  json model = rc.model;
  model.erase("n_dof");
  return {{"problem", data::problem_name(ds.problem)},
          {"grid", {{"domain_x", ds.domain_x}, {"domain_y", ds.domain_y}, {"dx", ds.dx}}},
          {"constants", ds.constants},
          {"dataset",
           {{"n_sims", ds.n_sims},
            {"keep_snapshots", ds.keep_snapshots},
            {"horizon", ds.horizon},
            {"solver_dt", ds.solver_dt},
            {"seed", ds.seed},
            {"split", ds.split},
            {"min_charges", ds.min_charges},
            {"max_charges", ds.max_charges},
            {"jacobi_tol", ds.jacobi_tol},
            {"jacobi_max_iters", ds.jacobi_max_iters}}},
          {"model", model},
          {"training", rc.training},
          {"sweep", {{"mpi", rc.sweep.mpi}, {"seeds", rc.sweep.seeds}, {"jobs", rc.sweep.jobs}}}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json_file(path));
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace reachbound
