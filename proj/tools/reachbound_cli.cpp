// reachbound: command line front end.
//
// Exit codes: 0 ok, 1 internal error, 2 usage, 3 config, 4 missing/bad input,
// 5 solver stability, 6 solver convergence, 7 training divergence,
// 8 nothing to evaluate.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reachbound/bounds.hpp"
#include "reachbound/config.hpp"
#include "reachbound/datasets.hpp"
#include "reachbound/errors.hpp"
#include "reachbound/evaluation.hpp"
#include "reachbound/hashing.hpp"
#include "reachbound/kernels.hpp"
#include "reachbound/svg_plot.hpp"
#include "reachbound/training.hpp"

namespace fs = std::filesystem;
using namespace reachbound;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kInput = 4,
  kStability = 5,
  kConvergence = 6,
  kDivergence = 7,
  kNothing = 8,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_root() {
  if (const char* r = std::getenv("REACHBOUND_OUTPUT_ROOT"); r && *r) return r;
  return "runs";
}

fs::path resolve_out(const std::string& out, const std::string& fallback) {
  fs::path p = out.empty() ? fs::path(fallback) : fs::path(out);
  return p.is_absolute() ? p : output_root() / p;
}

void summary(const json& j) { std::cout << j.dump() << std::endl; }

/// Hashes every regular file below `dir` except provenance.json itself.
json hash_manifest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "provenance.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  json out = json::object();
  for (const auto& f : files) out[fs::relative(f, dir).generic_string()] = sha256_file(f);
  return out;
}

std::string combined_hash(const json& manifest) {
  std::string s;
  for (const auto& [name, h] : manifest.items()) s += name + ":" + h.get<std::string>() + "\n";
  return sha256_hex({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
}

/// provenance.json: tool version, command, seed, resolved config, file hashes.
std::string write_provenance(const fs::path& dir, const std::string& command, const json& config,
                             std::uint64_t seed) {
  const json files = hash_manifest(dir);
  const std::string h = combined_hash(files);
  write_json_file(dir / "provenance.json", {{"tool", "reachbound"},
                                            {"version", REACHBOUND_VERSION},
                                            {"command", command},
                                            {"seed", seed},
                                            {"config", config},
                                            {"files", files},
                                            {"content_hash", h}});
  return h;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw UsageError("not an integer list: " + s);
    }
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

/// "3" means seeds 0, 1, 2; "4,7" is an explicit list.
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  const auto v = parse_size_list(s);
  std::vector<std::uint64_t> out;
  if (s.find(',') == std::string::npos) {
    for (std::size_t k = 0; k < v[0]; ++k) out.push_back(k);
  } else {
    out.assign(v.begin(), v.end());
  }
  if (out.empty()) throw UsageError("at least one seed is required");
  return out;
}

data::Dataset dataset_for(const RunConfig& rc, const std::string& dataset_dir, std::size_t jobs) {
  if (!dataset_dir.empty()) {
    auto ds = data::load_dataset(dataset_dir);
    if (ds.spec != rc.dataset) std::cerr << "note: dataset spec differs from config; using dataset\n";
    return ds;
  }
  return data::generate(rc.dataset, jobs);
}

void plot_sweep(const eval::SweepResult& r, const fs::path& path) {
  plot::Chart c;
  c.title = std::string(data::problem_name(r.problem)) + ": rollout error vs message passes";
  c.x_label = "message-passing iterations M";
  c.y_label = "RRMSE";
  plot::Series s;
  s.label = "mean over seeds";
  for (const auto& a : r.aggregates) {
    s.x.push_back(double(a.mpi));
    s.y.push_back(a.mean);
    s.err.push_back(a.std);
  }
  c.series.push_back(s);
  c.vline = double(r.bound);
  c.vline_label = "bound M = " + std::to_string(r.bound);
  plot::write_svg(c, path);
}

json sweep_summary(const eval::SweepResult& r, double tau) {
  json agg = json::array();
  for (const auto& a : r.aggregates)
    agg.push_back({{"M", a.mpi},
                   {"mean", a.mean},
                   {"std", a.std},
                   {"n", a.n},
                   {"reach", bounds::reach_name(a.reach)}});
  const auto knee = eval::detect_saturation(r, tau);
  json j = {{"problem", data::problem_name(r.problem)}, {"bound", r.bound}, {"aggregates", agg}};
  j["saturation_knee"] = knee ? json(*knee) : json("undefined");
  if (knee) j["knee_vs_bound"] = long(*knee) - long(r.bound);
  return j;
}

eval::SweepResult eval_and_write(const fs::path& sweep_dir, const data::Dataset& ds,
                                 const fs::path& out, std::size_t jobs, double tau, json& summ) {
  const auto r = eval::evaluate_sweep(sweep_dir, ds, jobs);
  fs::create_directories(out);
  eval::write_sweep_csv(r, out / "results.csv");
  eval::write_summary_csv(r, out / "summary.csv");
  plot_sweep(r, out / "error_vs_M.svg");
  summ = sweep_summary(r, tau);
  write_json_file(out / "evaluation.json", summ);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Message-passing bounds for graph network PDE surrogates"};
  app.set_version_flag("--version", std::string("reachbound ") + REACHBOUND_VERSION);
  app.require_subcommand(1);
  std::string simd;
  app.add_option("--simd", simd, "Kernel variant: scalar | avx2 (default: best available)")
      ->check(CLI::IsMember({"scalar", "avx2"}));

  // bound
  auto* bound = app.add_subcommand("bound", "Print the lower bound on message passes");
  std::string b_class, b_config;
  std::optional<double> b_c, b_dt, b_dx, b_L;
  std::size_t b_model_m = 0;
  bound->add_option("--class", b_class, "hyperbolic | parabolic | elliptic");
  bound->add_option("--c", b_c, "wave speed (hyperbolic)");
  bound->add_option("--dt", b_dt, "surrogate time stride (hyperbolic)");
  bound->add_option("--dx", b_dx, "mesh spacing");
  bound->add_option("--L", b_L, "largest domain extent (parabolic, elliptic)");
  bound->add_option("--config", b_config, "take the geometry from a run config");
  bound->add_option("--model-M", b_model_m, "also classify a model with this many passes");

  // generate
  auto* gen = app.add_subcommand("generate", "Solve and store a dataset");
  std::string g_config, g_out;
  std::size_t g_jobs = 1;
  std::optional<std::size_t> g_sims;
  gen->add_option("--config", g_config, "run config (JSON)")->required();
  gen->add_option("--out", g_out, "output directory (relative to the output root)");
  gen->add_option("--jobs", g_jobs, "worker threads")->check(CLI::PositiveNumber);
  gen->add_option("--n-sims", g_sims, "override dataset.n_sims");

  // train
  auto* trn = app.add_subcommand("train", "Train one model");
  std::string t_config, t_dataset, t_out;
  std::optional<std::size_t> t_m, t_epochs;
  std::optional<std::uint64_t> t_seed;
  trn->add_option("--config", t_config, "run config (JSON)")->required();
  trn->add_option("--dataset", t_dataset, "dataset directory (generated from the config if absent)");
  trn->add_option("--out", t_out, "checkpoint directory");
  trn->add_option("--M", t_m, "override model.mpi");
  trn->add_option("--seed", t_seed, "override training.seed");
  trn->add_option("--epochs", t_epochs, "override training.epochs");

  // sweep
  auto* swp = app.add_subcommand("sweep", "Train an (M, seed) grid, evaluate and plot");
  std::string s_config, s_dataset, s_out, s_m, s_seeds;
  std::optional<std::size_t> s_jobs, s_epochs;
  double s_tau = 0.5;
  swp->add_option("--config", s_config, "run config (JSON)")->required();
  swp->add_option("--dataset", s_dataset, "dataset directory (generated from the config if absent)");
  swp->add_option("--out", s_out, "sweep directory");
  swp->add_option("--M", s_m, "comma-separated message-pass counts (default: sweep.mpi)");
  swp->add_option("--seeds", s_seeds, "seed count, or comma-separated seeds (default: sweep.seeds)");
  swp->add_option("--jobs", s_jobs, "parallel training cells")->check(CLI::PositiveNumber);
  swp->add_option("--epochs", s_epochs, "override training.epochs");
  swp->add_option("--tau", s_tau, "saturation tolerance");

  // eval
  auto* evl = app.add_subcommand("eval", "Evaluate a sweep directory on its test split");
  std::string e_sweep, e_dataset, e_out;
  std::size_t e_jobs = 1;
  double e_tau = 0.5;
  evl->add_option("--sweep", e_sweep, "sweep or checkpoint-grid directory")->required();
  evl->add_option("--dataset", e_dataset, "dataset directory (default: <sweep>/dataset)");
  evl->add_option("--out", e_out, "output directory (default: <sweep>/eval)");
  evl->add_option("--jobs", e_jobs, "worker threads")->check(CLI::PositiveNumber);
  evl->add_option("--tau", e_tau, "saturation tolerance");

  // extrapolate
  auto* ext = app.add_subcommand("extrapolate", "Run a trained model on a new geometry");
  std::string x_ck, x_config, x_out;
  std::optional<double> x_dom_x, x_dom_y;
  std::optional<std::size_t> x_max_charges, x_sims;
  std::size_t x_jobs = 1;
  ext->add_option("--checkpoint", x_ck, "checkpoint directory")->required();
  ext->add_option("--config", x_config, "run config describing the new dataset");
  ext->add_option("--domain-x", x_dom_x, "override domain_x");
  ext->add_option("--domain-y", x_dom_y, "override domain_y");
  ext->add_option("--max-charges", x_max_charges, "override max_charges (poisson)");
  ext->add_option("--n-sims", x_sims, "override n_sims");
  ext->add_option("--out", x_out, "output directory");
  ext->add_option("--jobs", x_jobs, "worker threads")->check(CLI::PositiveNumber);

  // latent-map
  auto* lat = app.add_subcommand("latent-map", "Export per-iteration latent norm ratios");
  std::string l_ck, l_dataset, l_out;
  std::size_t l_index = 0;
  lat->add_option("--checkpoint", l_ck, "checkpoint directory")->required();
  lat->add_option("--dataset", l_dataset, "dataset directory")->required();
  lat->add_option("--index", l_index, "trajectory index (first snapshot is the input)");
  lat->add_option("--out", l_out, "output directory");

  // plot
  auto* plt = app.add_subcommand("plot", "Plot a summary.csv as error vs M");
  std::string p_csv, p_out, p_title;
  std::optional<double> p_bound;
  plt->add_option("--csv", p_csv, "summary.csv from eval or sweep")->required();
  plt->add_option("--out", p_out, "output SVG")->required();
  plt->add_option("--bound", p_bound, "draw the bound at this M");
  plt->add_option("--title", p_title, "chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (!simd.empty()) kernels::set_isa(kernels::parse_isa(simd));

    if (*bound) {
      bounds::BoundSpec spec;
      if (!b_config.empty()) {
        spec = load_run_config(b_config).dataset.bound_spec();
      } else {
        if (b_class.empty()) throw UsageError("bound: --class or --config is required");
        spec.pde_class = bounds::parse_pde_class(b_class);
        spec.c = b_c;
        spec.dt = b_dt;
        spec.L = b_L;
        if (!b_dx) throw UsageError("bound: --dx is required");
        spec.dx = *b_dx;
        if (spec.pde_class == bounds::PdeClass::hyperbolic && (!b_c || !b_dt))
          throw UsageError("bound: hyperbolic class needs --c and --dt");
        if (spec.pde_class != bounds::PdeClass::hyperbolic && !b_L)
          throw UsageError("bound: parabolic and elliptic classes need --L");
      }
      const auto m = bounds::mpi_lower_bound(spec);
      std::cerr << "M = " << m << "  (" << bounds::pde_class_name(spec.pde_class)
                << ", ratio " << bounds::bound_ratio(spec) << ")\n";
      json j = {{"command", "bound"},
                {"class", bounds::pde_class_name(spec.pde_class)},
                {"ratio", bounds::bound_ratio(spec)},
                {"M", m}};
      if (b_model_m) j["reach"] = bounds::reach_name(bounds::check_under_reach(b_model_m, spec));
      summary(j);
      return kOk;
    }

    if (*gen) {
      auto rc = load_run_config(g_config);
      if (g_sims) rc.dataset.n_sims = *g_sims;
      rc.dataset.validate();
      const auto out = resolve_out(g_out, "dataset_" + std::string(data::problem_name(rc.dataset.problem)));
      const auto t0 = std::chrono::steady_clock::now();
      const auto ds = data::generate(rc.dataset, g_jobs);
      data::save_dataset(ds, out);
      write_json_file(out / "run_config.json", to_json(rc));
      const auto h = write_provenance(out, "generate", to_json(rc), rc.dataset.seed);
      summary({{"command", "generate"},
               {"out", out.string()},
               {"n_sims", ds.trajectories.size()},
               {"nodes", ds.grid.node_count()},
               {"gnn_dt", ds.gnn_dt},
               {"bound", bounds::mpi_lower_bound(rc.dataset.bound_spec())},
               {"hash", h},
               {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
      return kOk;
    }

    if (*trn) {
      auto rc = load_run_config(t_config);
      if (t_m) rc.model.mpi = *t_m;
      if (t_seed) rc.training.seed = *t_seed;
      if (t_epochs) rc.training.epochs = *t_epochs;
      rc.training.validate();
      const auto ds = dataset_for(rc, t_dataset, 1);
      const auto out = resolve_out(t_out, "train_" + train::cell_name(rc.model.mpi, rc.training.seed));
      const auto r = train::train(ds, rc.model, rc.training, out);
      write_json_file(out / "run_config.json", to_json(rc));
      write_provenance(out, "train", to_json(rc), rc.training.seed);
      summary({{"command", "train"},
               {"out", out.string()},
               {"M", rc.model.mpi},
               {"seed", rc.training.seed},
               {"parameter_count", r.report.parameter_count},
               {"final_train_loss", r.report.final_train_loss},
               {"final_val_loss", r.report.final_val_loss},
               {"best_epoch", r.report.best_epoch},
               {"checkpoint_hash", train::checkpoint_hash(out)},
               {"seconds", r.report.wall_seconds}});
      return kOk;
    }

    if (*swp) {
      auto rc = load_run_config(s_config);
      if (!s_m.empty()) rc.sweep.mpi = parse_size_list(s_m);
      if (!s_seeds.empty()) rc.sweep.seeds = parse_seeds(s_seeds);
      if (s_jobs) rc.sweep.jobs = *s_jobs;
      if (s_epochs) rc.training.epochs = *s_epochs;
      rc.training.validate();
      const auto out = resolve_out(s_out, "sweep_" + std::string(data::problem_name(rc.dataset.problem)));
      fs::create_directories(out);
      data::Dataset ds;
      if (!s_dataset.empty()) {
        ds = data::load_dataset(s_dataset);
      } else if (fs::exists(out / "dataset" / "manifest.json")) {
        ds = data::load_dataset(out / "dataset");
      } else {
        ds = data::generate(rc.dataset, rc.sweep.jobs);
        data::save_dataset(ds, out / "dataset");
      }
      write_json_file(out / "run_config.json", to_json(rc));
      const auto m = train::train_sweep(ds, rc.model, rc.training, rc.sweep.mpi, rc.sweep.seeds,
                                        out / "checkpoints", rc.sweep.jobs);
      std::size_t done = 0, failed = 0;
      for (const auto& c : m.cells) (c.status == "done" ? done : failed)++;
      json summ;
      eval_and_write(out / "checkpoints", ds, out, rc.sweep.jobs, s_tau, summ);
      const auto h = write_provenance(out, "sweep", to_json(rc), rc.training.seed);
      summary({{"command", "sweep"},
               {"out", out.string()},
               {"cells", m.cells.size()},
               {"done", done},
               {"failed", failed},
               {"evaluation", summ},
               {"hash", h}});
      return failed ? kDivergence : kOk;
    }

    if (*evl) {
      const fs::path sweep_dir = e_sweep;
      fs::path ck_dir = fs::exists(sweep_dir / "checkpoints") ? sweep_dir / "checkpoints" : sweep_dir;
      fs::path ds_dir = e_dataset.empty() ? sweep_dir / "dataset" : fs::path(e_dataset);
      if (!fs::is_directory(ck_dir)) throw InputError("no such sweep directory: " + ck_dir.string());
      bool any = false;
      for (const auto& e : fs::directory_iterator(ck_dir))
        any = any || (e.is_directory() && fs::exists(e.path() / "params.bin"));
      if (!any) throw NothingToEvaluate("nothing to evaluate: no checkpoints in " + ck_dir.string());
      const auto ds = data::load_dataset(ds_dir);
      const auto out = e_out.empty() ? sweep_dir / "eval" : resolve_out(e_out, "eval");
      json summ;
      eval_and_write(ck_dir, ds, out, e_jobs, e_tau, summ);
      write_provenance(out, "eval", summ, ds.spec.seed);
      summary({{"command", "eval"}, {"out", out.string()}, {"evaluation", summ}});
      return kOk;
    }

    if (*ext) {
      const auto ck = train::load_checkpoint(x_ck);
      data::DatasetSpec spec = ck.dataset;
      if (!x_config.empty()) spec = load_run_config(x_config).dataset;
      if (x_dom_x) spec.domain_x = *x_dom_x;
      if (x_dom_y) spec.domain_y = *x_dom_y;
      if (x_max_charges) spec.max_charges = *x_max_charges;
      if (x_sims) spec.n_sims = *x_sims;
      spec.validate();
      const auto rep = eval::evaluate_extrapolation(ck, spec, x_jobs);
      const auto out = resolve_out(x_out, "extrapolate");
      json j = {{"command", "extrapolate"},
                {"checkpoint", x_ck},
                {"M", rep.model_mpi},
                {"bound", rep.bound},
                {"reach", bounds::reach_name(rep.reach)},
                {"rrmse", rep.rrmse},
                {"finite", rep.finite},
                {"per_trajectory", rep.per_trajectory},
                {"spec", spec}};
      write_json_file(out / "extrapolation.json", j);
      write_provenance(out, "extrapolate", {{"dataset", spec}}, spec.seed);
      j.erase("per_trajectory");
      summary(j);
      return kOk;
    }

    if (*lat) {
      const auto ck = train::load_checkpoint(l_ck);
      const auto ds = data::load_dataset(l_dataset);
      if (l_index >= ds.trajectories.size()) throw InputError("latent-map: --index out of range");
      const auto U = eval::latent_map(ck, ds.grid, ds.trajectories[l_index].snapshots.front());
      const auto out = resolve_out(l_out, "latent_map");
      fs::create_directories(out);
      eval::write_latent_map_csv(U, ds.grid, out / "latent_map.csv");
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& row : U)
        for (double v : row) lo = std::min(lo, v), hi = std::max(hi, v);
      write_provenance(out, "latent-map", {{"checkpoint", l_ck}, {"index", l_index}}, ck.train.seed);
      summary({{"command", "latent-map"},
               {"out", out.string()},
               {"iterations", U.size() - 1},
               {"min", lo},
               {"max", hi}});
      return kOk;
    }

    if (*plt) {
      std::ifstream in(p_csv);
      if (!in) throw InputError("cannot open " + p_csv);
      std::string line;
      std::getline(in, line);
      if (line.rfind("M,mean,std", 0) != 0) throw InputError("plot: expected a summary.csv header");
      plot::Chart c;
      c.title = p_title.empty() ? "rollout error vs message passes" : p_title;
      c.x_label = "message-passing iterations M";
      c.y_label = "RRMSE";
      plot::Series s;
      s.label = "mean over seeds";
      while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string m, mean, sd;
        std::getline(ss, m, ',');
        std::getline(ss, mean, ',');
        std::getline(ss, sd, ',');
        s.x.push_back(std::stod(m));
        s.y.push_back(std::stod(mean));
        s.err.push_back(std::stod(sd));
      }
      c.series.push_back(s);
      if (p_bound) {
        c.vline = *p_bound;
        c.vline_label = "bound";
      }
      const auto out = resolve_out(p_out, "plot.svg");
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      plot::write_svg(c, out);
      summary({{"command", "plot"}, {"out", out.string()}, {"points", s.x.size()}});
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const StabilityError& e) {
    std::cerr << "stability error: " << e.what() << '\n';
    return kStability;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << " (iterations " << e.iterations
              << ", residual " << e.residual << ")\n";
    return kConvergence;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const NothingToEvaluate& e) {
    std::cerr << e.what() << '\n';
    return kNothing;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
