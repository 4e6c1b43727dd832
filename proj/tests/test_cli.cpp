#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dirsel/io.hpp"

// Black-box tests against the installed binary; the path is injected by the
// build so the suite always exercises the executable it was built with.
#ifndef DIRSEL_CLI_PATH
#error "DIRSEL_CLI_PATH must point at the dirsel executable"
#endif

namespace fs = std::filesystem;
using namespace dirsel;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

const fs::path& scratch_root() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / "dirsel-cli-tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunResult run_cli(const std::string& args, const std::string& tag) {
  const fs::path out = scratch_root() / (tag + ".out");
  const fs::path err = scratch_root() / (tag + ".err");
  const std::string cmd = std::string("\"") + DIRSEL_CLI_PATH + "\" " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(out.string());
  r.err = read_text_file(err.string());
  return r;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

void write_selection(const fs::path& path, const std::string& indices) {
  std::ofstream f(path);
  f << "{\n  \"schema_version\": 1,\n  \"indices\": [" << indices
    << "],\n  \"has_duplicates\": false\n}\n";
}

}  // namespace

TEST_CASE("selftest passes and reports every check") {
  const RunResult r = run_cli("selftest", "selftest");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("checks passed") != std::string::npos);
  CHECK(r.out.find("gradcheck") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("gen is deterministic and writes the sidecar") {
  const fs::path a = fresh_dir("gen_a");
  const fs::path b = fresh_dir("gen_b");
  const RunResult ra = run_cli("gen blobs 40 1 --out " + a.string(), "gen_a");
  const RunResult rb = run_cli("gen blobs 40 1 --out " + b.string(), "gen_b");
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  CHECK(slurp(a / "dataset.csv") == slurp(b / "dataset.csv"));
  CHECK(slurp(a / "dataset.json") == slurp(b / "dataset.json"));
  const std::string sidecar = slurp(a / "dataset.json");
  CHECK(sidecar.find("\"informative_indices\"") != std::string::npos);
  const std::string csv = slurp(a / "dataset.csv");
  CHECK(csv.find("f19,label") != std::string::npos);  // 20 features + labels
}

TEST_CASE("gen rejects an odd sample count for two-class shapes") {
  const fs::path dir = fresh_dir("gen_odd");
  const RunResult r = run_cli("gen moons 41 0 --out " + dir.string(), "gen_odd");
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("even") != std::string::npos);
}

TEST_CASE("train writes its artifact set and the echoed config replays bit-for-bit") {
  const fs::path a = fresh_dir("train_a");
  const fs::path b = fresh_dir("train_b");
  const std::string common =
      "train --dataset blobs --n 40 --epochs 6 --zeta 25 --k 3 --log-every 0 ";
  const RunResult ra = run_cli(common + "--out " + a.string(), "train_a");
  REQUIRE(ra.exit_code == 0);
  for (const char* name :
       {"resolved_config.json", "report.json", "selection.json", "loss.csv", "graph.csv",
        "graph.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(a / name));
  }
  // The echo itself is the config: feeding it back must reproduce every byte.
  const RunResult rb = run_cli(
      "train --config " + (a / "resolved_config.json").string() + " --out " + b.string(),
      "train_b");
  REQUIRE(rb.exit_code == 0);
  for (const char* name : {"report.json", "selection.json", "loss.csv", "graph.csv"}) {
    CAPTURE(name);
    CHECK(slurp(a / name) == slurp(b / name));
  }
}

TEST_CASE("train validation failures name the field and exit nonzero") {
  const fs::path dir = fresh_dir("train_bad");
  const RunResult r =
      run_cli("train --dataset blobs --n 40 --epochs 0 --out " + dir.string(), "train_bad");
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("epochs") != std::string::npos);
}

TEST_CASE("explicit flags override the config file") {
  const fs::path dir = fresh_dir("precedence");
  RunConfig file_cfg;
  file_cfg.train.epochs = 5;
  file_cfg.train.zeta = 25;
  file_cfg.train.k = 3;
  file_cfg.train.log_every = 0;
  file_cfg.dataset_n = 40;
  const fs::path cfg_path = dir / "base.json";
  write_text_file(cfg_path.string(), run_config_to_json(file_cfg));
  const RunResult r = run_cli("train --config " + cfg_path.string() +
                                  " --epochs 7 --out " + (dir / "run").string(),
                              "precedence");
  REQUIRE(r.exit_code == 0);
  const RunConfig resolved =
      run_config_from_json(slurp(dir / "run" / "resolved_config.json"));
  CHECK(resolved.train.epochs == 7);   // flag wins
  CHECK(resolved.train.zeta == 25);    // file survives where no flag was passed
  CHECK(resolved.dataset_n == 40);
}

TEST_CASE("eval aggregates per-seed rows and accepts a planted selection") {
  const fs::path dir = fresh_dir("eval_ok");
  const fs::path sel = dir / "selection.json";
  write_selection(sel, "0, 1");
  const RunResult r = run_cli("eval --selection " + sel.string() +
                                  " --dataset blobs --n 40 --k 3 --splits 3 --out " +
                                  (dir / "out").string(),
                              "eval_ok");
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "out" / "eval_seeds.csv");
  CHECK(csv.find("seed,clustering_acc,classification_acc,reconstruction_rmse,knn_k") !=
        std::string::npos);
  // schema comment + header + one row per split seed
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  const std::string report = slurp(dir / "out" / "eval.json");
  CHECK(report.find("\"clustering_acc\": 1.0") != std::string::npos);
  CHECK(r.out.find("clustering accuracy") != std::string::npos);
}

TEST_CASE("eval rejects missing files and out-of-range selections") {
  const fs::path dir = fresh_dir("eval_bad");
  const RunResult missing = run_cli("eval --selection " + (dir / "nope.json").string() +
                                        " --dataset blobs --n 40 --out " +
                                        (dir / "o1").string(),
                                    "eval_missing");
  CHECK(missing.exit_code != 0);
  CHECK(missing.err.find("nope.json") != std::string::npos);

  const fs::path sel = dir / "oob.json";
  write_selection(sel, "0, 99");
  const RunResult oob = run_cli("eval --selection " + sel.string() +
                                    " --dataset blobs --n 40 --out " + (dir / "o2").string(),
                                "eval_oob");
  CHECK(oob.exit_code != 0);
  CHECK(oob.err.find("99") != std::string::npos);
  CHECK(oob.err.find("out of range") != std::string::npos);
}

TEST_CASE("export-graph writes the edge list for a stored selection") {
  const fs::path dir = fresh_dir("export");
  const fs::path sel = dir / "selection.json";
  write_selection(sel, "0, 1");
  const RunResult r = run_cli("export-graph --selection " + sel.string() +
                                  " --dataset blobs --n 40 --k 3 --out " +
                                  (dir / "out").string(),
                              "export");
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "out" / "graph.csv");
  CHECK(csv.rfind("# schema_version=1\ni,j,weight\n", 0) == 0);
  const std::string header = slurp(dir / "out" / "graph.json");
  CHECK(header.find("\"n\": 40") != std::string::npos);
  CHECK(header.find("\"k\": 3") != std::string::npos);
}

TEST_CASE("seed fan-out fills per-seed directories") {
  const fs::path dir = fresh_dir("fanout");
  const RunResult r = run_cli(
      "train --dataset blobs --n 40 --epochs 5 --zeta 25 --k 3 --seeds 4..5 --out " +
          dir.string(),
      "fanout");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("2/2 seeds completed") != std::string::npos);
  for (const char* seed_dir : {"seed-4", "seed-5"}) {
    CAPTURE(seed_dir);
    CHECK(fs::exists(dir / seed_dir / "report.json"));
    const RunConfig cfg =
        run_config_from_json(slurp(dir / seed_dir / "resolved_config.json"));
    CHECK(cfg.out_dir == (dir / seed_dir).string());
  }
  CHECK(run_config_from_json(slurp(dir / "seed-4" / "resolved_config.json")).train.seed == 4);
  CHECK(run_config_from_json(slurp(dir / "seed-5" / "resolved_config.json")).train.seed == 5);
}
