#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  json last;  // final stdout line parsed as JSON, when it is JSON
};

Run run(const std::string& args, const fs::path& root = {}) {
  std::string cmd;
  if (!root.empty()) cmd = "REACHBOUND_OUTPUT_ROOT='" + root.string() + "' ";
  cmd += std::string("'") + REACHBOUND_CLI_PATH + "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf;
  while (fgets(buf.data(), int(buf.size()), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto end = r.out.find_last_not_of('\n');
  if (end != std::string::npos) {
    const auto start = r.out.rfind('\n', end);
    const auto line = r.out.substr(start == std::string::npos ? 0 : start + 1, end + 1 - (start == std::string::npos ? 0 : start + 1));
    r.last = json::parse(line, nullptr, false);
  }
  return r;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("reachbound_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path tiny_config(const fs::path& dir, const std::string& problem = "wave") {
  json j = {{"problem", problem},
            {"grid", {{"domain_x", 1.0}, {"domain_y", 1.0}, {"dx", 0.2}}},
            {"dataset", {{"n_sims", 10}, {"seed", 1}}},
            {"model", {{"latent_dim", 8}, {"hidden_layers", 1}, {"mpi", 2}}},
            {"training", {{"epochs", 1}, {"batch_size", 4}}},
            {"sweep", {{"mpi", {1, 2}}, {"seeds", {0}}}}};
  if (problem != "poisson") j["dataset"]["keep_snapshots"] = 4;
  const auto p = dir / (problem + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("bound subcommand") {
  auto r = run("bound --class hyperbolic --c 0.5 --dt 0.2222 --dx 0.04");
  CHECK(r.code == 0);
  CHECK(r.last["M"] == 4);
  r = run("bound --class elliptic --L 1 --dx 0.1");
  CHECK(r.code == 0);
  CHECK(r.last["M"] == 10);
  r = run("bound --class elliptic --L 1 --dx 0.1 --model-M 2");
  CHECK(r.last["reach"] == "under");
  CHECK(run("bound --class hyperbolic --dt 0.2222 --dx 0.04").code == 2);
  CHECK(run("bound --class parabolic --dx 0.1").code == 2);
  CHECK(run("bound --class nonsense --L 1 --dx 0.1").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("--version").code == 0);
}

TEST_CASE("shipped configs reproduce the reference bounds") {
  const fs::path cfg = REACHBOUND_CONFIG_DIR;
  const std::pair<const char*, int> expect[] = {{"wave_low", 4},    {"wave_high", 8},    {"fourier_1x1", 10},
                                                {"fourier_2x2", 20}, {"poisson_low", 10}, {"poisson_high", 20}};
  for (auto [name, m] : expect) {
    const auto r = run("bound --config '" + (cfg / (std::string(name) + ".json")).string() + "'");
    CHECK(r.code == 0);
    CHECK(r.last["M"] == m);
  }
}

TEST_CASE("config and input errors have their own exit codes") {
  const auto dir = temp_dir("errors");
  std::ofstream(dir / "unknown.json") << R"({"problem": "wave", "colour": "blue"})";
  std::ofstream(dir / "broken.json") << R"({"problem": )";
  std::ofstream(dir / "ndof.json") << R"({"problem": "wave", "model": {"n_dof": 3}})";
  CHECK(run("generate --config '" + (dir / "unknown.json").string() + "'", dir).code == 3);
  CHECK(run("generate --config '" + (dir / "broken.json").string() + "'", dir).code == 3);
  CHECK(run("generate --config '" + (dir / "ndof.json").string() + "'", dir).code == 3);
  CHECK(run("generate --config '" + (dir / "absent.json").string() + "'", dir).code == 4);
  std::ofstream(dir / "unstable.json") << R"({"problem": "wave", "grid": {"dx": 0.2},
    "constants": {"c": 5.0}, "dataset": {"n_sims": 10, "solver_dt": 1.0, "keep_snapshots": 3}})";
  CHECK(run("generate --config '" + (dir / "unstable.json").string() + "'", dir).code == 5);
  fs::remove_all(dir);
}

TEST_CASE("eval on an empty directory has nothing to evaluate") {
  const auto dir = temp_dir("empty");
  CHECK(run("eval --sweep '" + dir.string() + "'", dir).code == 8);
  fs::remove_all(dir);
}

TEST_CASE("generate is deterministic and records provenance") {
  const auto dir = temp_dir("gen");
  const auto cfg = tiny_config(dir);
  const auto a = run("generate --config '" + cfg.string() + "' --out a", dir);
  const auto b = run("generate --config '" + cfg.string() + "' --out b --jobs 2", dir);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.last["hash"] == b.last["hash"]);
  CHECK(fs::exists(dir / "a" / "manifest.json"));
  std::ifstream in(dir / "a" / "provenance.json");
  const auto prov = json::parse(in);
  CHECK(prov["tool"] == "reachbound");
  CHECK(prov["seed"] == 1);
  CHECK(prov["files"].contains("traj_00000.bin"));
  CHECK(prov["config"]["problem"] == "wave");
  fs::remove_all(dir);
}

TEST_CASE("sweep, eval, plot, train, extrapolate, latent-map") {
  const auto dir = temp_dir("pipeline");
  const auto cfg = tiny_config(dir);
  const auto s = run("sweep --config '" + cfg.string() + "' --M 1,2,3 --seeds 2 --out sw", dir);
  REQUIRE(s.code == 0);
  CHECK(s.last["cells"] == 6);
  for (const char* f : {"results.csv", "summary.csv", "error_vs_M.svg", "evaluation.json", "provenance.json",
                        "run_config.json", "checkpoints/sweep.json", "checkpoints/M3_s1/params.bin"})
    CHECK(fs::exists(dir / "sw" / f));
  CHECK(s.last["evaluation"]["aggregates"].size() == 3);

  const auto again = run("sweep --config '" + cfg.string() + "' --M 1,2,3 --seeds 2 --out sw", dir);
  CHECK(again.code == 0);
  CHECK(again.last["evaluation"] == s.last["evaluation"]);

  const auto e = run("eval --sweep '" + (dir / "sw").string() + "'", dir);
  CHECK(e.code == 0);
  CHECK(fs::exists(dir / "sw" / "eval" / "results.csv"));
  CHECK(e.last["evaluation"] == s.last["evaluation"]);

  const auto p = run("plot --csv '" + (dir / "sw" / "summary.csv").string() + "' --out fig.svg --bound 2", dir);
  CHECK(p.code == 0);
  CHECK(fs::exists(dir / "fig.svg"));

  const auto t1 = run("train --config '" + cfg.string() + "' --dataset '" + (dir / "sw" / "dataset").string() +
                      "' --M 1 --seed 0 --out t1", dir);
  const auto t2 = run("train --config '" + cfg.string() + "' --dataset '" + (dir / "sw" / "dataset").string() +
                      "' --M 1 --seed 0 --out t2", dir);
  REQUIRE(t1.code == 0);
  CHECK(t1.last["checkpoint_hash"] == t2.last["checkpoint_hash"]);

  const auto x = run("extrapolate --checkpoint '" + (dir / "t1").string() + "' --domain-x 3 --out ex", dir);
  CHECK(x.code == 0);
  CHECK(x.last["finite"] == true);
  CHECK(fs::exists(dir / "ex" / "extrapolation.json"));

  const auto l = run("latent-map --checkpoint '" + (dir / "t1").string() + "' --dataset '" +
                     (dir / "sw" / "dataset").string() + "' --out lm", dir);
  CHECK(l.code == 0);
  CHECK(l.last["iterations"] == 1);
  CHECK(fs::exists(dir / "lm" / "latent_map.csv"));
  CHECK(run("latent-map --checkpoint '" + (dir / "t1").string() + "' --dataset '" +
            (dir / "sw" / "dataset").string() + "' --index 99", dir).code == 4);
  fs::remove_all(dir);
}
