#include "reachbound/datasets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "reachbound/config.hpp"
#include "reachbound/errors.hpp"

namespace reachbound::data {

using nlohmann::json;

std::string_view problem_name(Problem p) {
  switch (p) {
    case Problem::wave: return "wave";
    case Problem::heat: return "heat";
    case Problem::poisson: return "poisson";
  }
  return "?";
}

Problem parse_problem(std::string_view name) {
  if (name == "wave") return Problem::wave;
  if (name == "heat" || name == "fourier") return Problem::heat;
  if (name == "poisson") return Problem::poisson;
  throw std::invalid_argument("unknown problem: " + std::string(name));
}

bounds::PdeClass pde_class_of(Problem p) {
  switch (p) {
    case Problem::wave: return bounds::PdeClass::hyperbolic;
    case Problem::heat: return bounds::PdeClass::parabolic;
    case Problem::poisson: return bounds::PdeClass::elliptic;
  }
  return bounds::PdeClass::hyperbolic;
}

std::size_t channels_of(Problem p) { return p == Problem::wave ? 2 : 1; }
bool is_time_dependent(Problem p) { return p != Problem::poisson; }

void DatasetSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("dataset spec: " + m); };
  if (!(dx > 0.0)) fail("dx must be positive");
  if (!(domain_x > 0.0) || !(domain_y > 0.0)) fail("domain extents must be positive");
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9) fail("split fractions must sum to 1");
  if (split.train < 0 || split.val < 0 || split.test < 0) fail("split fractions must be non-negative");
  if (n_sims < 10) fail("n_sims must be >= 10");
  if (is_time_dependent(problem)) {
    if (keep_snapshots < 2) fail("keep_snapshots must be >= 2");
    if (!(horizon > 0.0) || !(solver_dt > 0.0)) fail("horizon and solver_dt must be positive");
  } else {
    if (min_charges < 1 || max_charges < min_charges) fail("charge count range is empty");
    if (!(jacobi_tol > 0.0)) fail("jacobi_tol must be positive");
  }
  if (problem == Problem::wave && !(constants.c > 0.0)) fail("c must be positive");
  if (problem == Problem::heat && !(constants.alpha > 0.0)) fail("alpha must be positive");
  if (problem == Problem::poisson && !(constants.eps0 > 0.0)) fail("eps0 must be positive");
  grid().validate();
}

grid::GridSpec DatasetSpec::grid() const {
  grid::GridSpec g;
  g.nx = static_cast<std::size_t>(std::llround(domain_x / dx));
  g.ny = static_cast<std::size_t>(std::llround(domain_y / dx));
  g.dx = g.dy = dx;
  return g;
}

double DatasetSpec::gnn_dt() const {
  if (!is_time_dependent(problem)) return 0.0;
  return horizon / double(keep_snapshots - 1);
}

std::size_t DatasetSpec::substeps() const {
  if (!is_time_dependent(problem)) return 0;
  const double r = gnn_dt() / solver_dt;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(r - 1e-9)));
}

double DatasetSpec::fine_dt() const {
  return is_time_dependent(problem) ? gnn_dt() / double(substeps()) : 0.0;
}

bounds::BoundSpec DatasetSpec::bound_spec() const {
  bounds::BoundSpec b;
  b.pde_class = pde_class_of(problem);
  b.dx = dx;
  if (problem == Problem::wave) {
    b.c = constants.c;
    b.dt = gnn_dt();
  } else {
    b.L = extent();
  }
  return b;
}

InitialCondition sample_initial_condition(const DatasetSpec& spec, const grid::GridSpec& g,
                                          std::mt19937_64& rng) {
  InitialCondition ic;
  const std::size_t n = g.node_count();
  if (spec.problem == Problem::poisson) {
    std::vector<std::size_t> interior;
    for (std::size_t i = 0; i < n; ++i)
      if (!g.is_boundary(i)) interior.push_back(i);
    std::uniform_int_distribution<std::size_t> count(spec.min_charges, spec.max_charges);
    const std::size_t k = std::min(count(rng), interior.size());
    // partial Fisher-Yates for k distinct nodes
    for (std::size_t a = 0; a < k; ++a) {
      std::uniform_int_distribution<std::size_t> pick(a, interior.size() - 1);
      std::swap(interior[a], interior[pick(rng)]);
    }
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    ic.rho.values.assign(n, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
      const double q = mag(rng);
      ic.rho.values[interior[a]] = sign(rng) ? q : -q;
    }
    return ic;
  }

  const double lx = g.lx(), ly = g.ly(), L = std::min(lx, ly);
  std::uniform_int_distribution<int> n_bumps(1, 3);
  std::uniform_real_distribution<double> cx(g.dx, lx - g.dx), cy(g.dy, ly - g.dy);
  std::uniform_real_distribution<double> width(0.05 * L, 0.2 * L), amp(0.5, 1.5);
  struct Bump { double x, y, w, a; };
  std::vector<Bump> bumps(static_cast<std::size_t>(n_bumps(rng)));
  for (auto& b : bumps) {
    b.x = cx(rng);
    b.y = cy(rng);
    b.w = width(rng);
    b.a = amp(rng);
  }
  ic.u0 = pde::sample_field(g, [&](double x, double y) {
    double v = 0.0;
    for (const auto& b : bumps) {
      const double r2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
      v += b.a * std::exp(-r2 / (2.0 * b.w * b.w));
    }
    return v;
  });
  if (spec.problem == Problem::wave) ic.v0.values.assign(n, 0.0);
  return ic;
}

Splits make_splits(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * double(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(f.val * double(n))));
  Splits s;
  s.train.assign(idx.begin(), idx.begin() + std::ptrdiff_t(n_train));
  s.val.assign(idx.begin() + std::ptrdiff_t(n_train), idx.begin() + std::ptrdiff_t(n_train + n_val));
  s.test.assign(idx.begin() + std::ptrdiff_t(n_train + n_val), idx.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

namespace {

pde::Trajectory simulate(const DatasetSpec& spec, const grid::GridSpec& g, std::size_t sim) {
  std::seed_seq seq{std::uint64_t(spec.seed), std::uint64_t(sim), std::uint64_t(0x5eed)};
  std::mt19937_64 rng(seq);
  const auto ic = sample_initial_condition(spec, g, rng);
  switch (spec.problem) {
    case Problem::wave: {
      const auto sub = spec.substeps();
      auto t = pde::solve_wave(g, spec.constants.c, spec.fine_dt(), sub * (spec.keep_snapshots - 1),
                               ic.u0, ic.v0, sub);
      for (std::size_t k = 0; k < t.snapshots.size(); ++k) t.snapshots[k].time = double(k) * spec.gnn_dt();
      return t;
    }
    case Problem::heat: {
      const auto sub = spec.substeps();
      auto t = pde::solve_heat(g, spec.constants.alpha, spec.fine_dt(), sub * (spec.keep_snapshots - 1),
                               ic.u0, sub);
      for (std::size_t k = 0; k < t.snapshots.size(); ++k) t.snapshots[k].time = double(k) * spec.gnn_dt();
      return t;
    }
    case Problem::poisson: {
      auto res = pde::solve_poisson_jacobi(g, ic.rho, spec.constants.eps0, spec.jacobi_tol,
                                           spec.jacobi_max_iters);
      pde::Trajectory t;
      t.grid = g;
      t.meta = {"jacobi-fd5", 0.0, 1, spec.constants, res.iterations};
      auto rho = ic.rho;
      rho.time = 0.0;
      res.u.time = 1.0;
      t.snapshots = {std::move(rho), std::move(res.u)};
      return t;
    }
  }
  throw std::logic_error("unreachable");
}

void check_stability(const DatasetSpec& spec, const grid::GridSpec& g) {
  if (spec.problem == Problem::wave && pde::wave_courant(g, spec.constants.c, spec.fine_dt()) > 1.0 / std::sqrt(2.0))
    throw StabilityError("dataset: wave configuration violates the CFL condition");
  if (spec.problem == Problem::heat && pde::heat_stability_ratio(g, spec.constants.alpha, spec.fine_dt()) > 0.25)
    throw StabilityError("dataset: heat configuration violates explicit stability");
}

struct StatsAccumulator {
  explicit StatsAccumulator(std::size_t n_dof) : n_dof(n_dof), sum(n_dof), sq(n_dof), count(n_dof) {}
  void add(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum[i % n_dof] += values[i];
      count[i % n_dof] += 1.0;
    }
  }
  // two-pass for the variance
  void add_sq(std::span<const double> values, const std::vector<double>& mean) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - mean[i % n_dof];
      sq[i % n_dof] += d * d;
    }
  }
  std::vector<double> means() const {
    std::vector<double> m(n_dof);
    for (std::size_t c = 0; c < n_dof; ++c) m[c] = count[c] > 0 ? sum[c] / count[c] : 0.0;
    return m;
  }
  std::size_t n_dof;
  std::vector<double> sum, sq, count;
};

template <class Visit>
ChannelStats stats_over(std::size_t n_dof, Visit&& visit, bool centre = true) {
  StatsAccumulator acc(n_dof);
  visit([&](std::span<const double> v) { acc.add(v); });
  ChannelStats s;
  s.mean = centre ? acc.means() : std::vector<double>(n_dof, 0.0);
  visit([&](std::span<const double> v) { acc.add_sq(v, s.mean); });
  s.std.resize(n_dof);
  for (std::size_t c = 0; c < n_dof; ++c)
    s.std[c] = acc.count[c] > 0 ? std::sqrt(acc.sq[c] / acc.count[c]) : 1.0;
  return s;
}

}  // namespace

NormalizationStats compute_stats(const Dataset& ds) {
  const auto n_dof = channels_of(ds.spec.problem);
  NormalizationStats st;
  if (is_time_dependent(ds.spec.problem)) {
    st.input = stats_over(n_dof, [&](auto&& f) {
      for (auto t : ds.splits.train)
        for (const auto& s : ds.trajectories[t].snapshots) f(s.values);
    });
    std::vector<double> delta;
    st.target = stats_over(n_dof, [&](auto&& f) {
      for (auto t : ds.splits.train) {
        const auto& snaps = ds.trajectories[t].snapshots;
        for (std::size_t k = 0; k + 1 < snaps.size(); ++k) {
          delta.resize(snaps[k].values.size());
          for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = snaps[k + 1].values[i] - snaps[k].values[i];
          f(delta);
        }
      }
    }, false);  // increments are scaled but not centred, so zero stays zero
  } else {
    st.input = stats_over(1, [&](auto&& f) {
      for (auto t : ds.splits.train) f(ds.trajectories[t].snapshots[0].values);
    });
    st.target = stats_over(1, [&](auto&& f) {
      for (auto t : ds.splits.train) f(ds.trajectories[t].snapshots[1].values);
    });
  }
  return st;
}

Dataset generate(const DatasetSpec& spec, std::size_t jobs) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  ds.grid = spec.grid();
  ds.gnn_dt = spec.gnn_dt();
  check_stability(spec, ds.grid);

  ds.trajectories.resize(spec.n_sims);
  jobs = std::max<std::size_t>(1, std::min(jobs, spec.n_sims));
  if (jobs == 1) {
    for (std::size_t s = 0; s < spec.n_sims; ++s) ds.trajectories[s] = simulate(spec, ds.grid, s);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t s = w; s < spec.n_sims; s += jobs) ds.trajectories[s] = simulate(spec, ds.grid, s);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  ds.splits = make_splits(spec.n_sims, spec.split, spec.seed);
  ds.stats = compute_stats(ds);
  return ds;
}

namespace {

double safe_std(double s) { return (s < 1e-12 || !std::isfinite(s)) ? 1.0 : s; }

}  // namespace

std::vector<double> normalize(std::span<const double> values, const ChannelStats& stats) {
  const auto n_dof = stats.mean.size();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = (values[i] - stats.mean[i % n_dof]) / safe_std(stats.std[i % n_dof]);
  return out;
}

std::vector<double> denormalize(std::span<const double> values, const ChannelStats& stats) {
  const auto n_dof = stats.mean.size();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = values[i] * safe_std(stats.std[i % n_dof]) + stats.mean[i % n_dof];
  return out;
}

void write_trajectory_file(const std::filesystem::path& path, const pde::Trajectory& t) {
  static_assert(std::endian::native == std::endian::little);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::uint32_t n_nodes = t.snapshots.empty() ? 0 : std::uint32_t(t.snapshots[0].node_count());
  const std::uint32_t n_ch = t.snapshots.empty() ? 0 : std::uint32_t(t.snapshots[0].n_dof);
  const std::uint32_t header[4] = {kTrajectoryMagic, std::uint32_t(t.snapshots.size()), n_nodes, n_ch};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  for (const auto& s : t.snapshots) {
    if (s.values.size() != std::size_t(n_nodes) * n_ch)
      throw std::invalid_argument("trajectory snapshots have inconsistent shapes");
    out.write(reinterpret_cast<const char*>(s.values.data()), std::streamsize(s.values.size() * 8));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<pde::FieldSnapshot> read_trajectory_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::uint32_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[0] != kTrajectoryMagic) throw InputError("not a trajectory file: " + path.string());
  std::vector<pde::FieldSnapshot> snaps(header[1]);
  for (auto& s : snaps) {
    s.n_dof = header[3];
    s.values.resize(std::size_t(header[2]) * header[3]);
    in.read(reinterpret_cast<char*>(s.values.data()), std::streamsize(s.values.size() * 8));
    if (!in) throw InputError("truncated trajectory file: " + path.string());
  }
  return snaps;
}

namespace {

std::string traj_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%05zu.bin", i);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json m;
  m["format"] = "reachbound-dataset";
  m["version"] = kManifestVersion;
  m["spec"] = ds.spec;
  m["seed"] = ds.spec.seed;
  m["grid"] = ds.grid;
  m["gnn_dt"] = ds.gnn_dt;
  m["fine_dt"] = ds.spec.fine_dt();
  m["substeps"] = ds.spec.substeps();
  std::vector<double> times;
  if (!ds.trajectories.empty())
    for (const auto& s : ds.trajectories[0].snapshots) times.push_back(s.time);
  m["times"] = times;
  m["stats"] = ds.stats;
  m["splits"] = {{"train", ds.splits.train}, {"val", ds.splits.val}, {"test", ds.splits.test}};
  json files = json::array();
  json iters = json::array();
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    write_trajectory_file(dir / traj_name(i), ds.trajectories[i]);
    files.push_back(traj_name(i));
    if (ds.spec.problem == Problem::poisson) iters.push_back(ds.trajectories[i].meta.iterations);
  }
  m["trajectories"] = files;
  if (ds.spec.problem == Problem::poisson) m["jacobi_iterations"] = iters;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << m.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InputError("no dataset manifest in " + dir.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("malformed dataset manifest: " + std::string(e.what()));
  }
  if (m.value("format", "") != "reachbound-dataset" || m.value("version", 0) != kManifestVersion)
    throw InputError("unsupported dataset manifest in " + dir.string());
  Dataset ds;
  ds.spec = m.at("spec").get<DatasetSpec>();
  ds.grid = m.at("grid").get<grid::GridSpec>();
  ds.gnn_dt = m.at("gnn_dt").get<double>();
  ds.stats = m.at("stats").get<NormalizationStats>();
  ds.splits.train = m.at("splits").at("train").get<std::vector<std::size_t>>();
  ds.splits.val = m.at("splits").at("val").get<std::vector<std::size_t>>();
  ds.splits.test = m.at("splits").at("test").get<std::vector<std::size_t>>();
  const auto times = m.at("times").get<std::vector<double>>();
  for (const auto& f : m.at("trajectories")) {
    pde::Trajectory t;
    t.grid = ds.grid;
    t.snapshots = read_trajectory_file(dir / f.get<std::string>());
    if (t.snapshots.size() != times.size()) throw InputError("trajectory length disagrees with manifest");
    for (std::size_t k = 0; k < times.size(); ++k) t.snapshots[k].time = times[k];
    t.meta.dt = ds.spec.fine_dt();
    t.meta.record_every = ds.spec.substeps();
    t.meta.constants = ds.spec.constants;
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

}  // namespace reachbound::data
