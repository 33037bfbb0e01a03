// Drives the gp2f binary end to end through std::system. The binary path
// arrives via the GP2F_BIN environment variable (set by ctest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gp2f/kernels.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* b = std::getenv("GP2F_BIN");
  REQUIRE_MESSAGE(b != nullptr, "GP2F_BIN must point at the gp2f binary");
  return b;
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "gp2f_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = bin() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE_MESSAGE(in.good(), ("missing file: " + p.string()).c_str());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSpecJson = R"({
  "source": {"blocks": 3, "nodes_per_block": 40, "p_in": 0.25, "p_out": 0.02,
             "feature_dim": 8, "center_scale": 1.0, "noise_scale": 1.0},
  "target": {"blocks": 3, "nodes_per_block": 40, "p_in": 0.2, "p_out": 0.03,
             "feature_dim": 8, "center_scale": 1.0, "noise_scale": 1.3,
             "feature_shift": [0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4]}
})";

const char* kPretrainJson =
    R"({"epochs": 40, "lr": 0.005, "tau_pre": 0.5, "hidden_dim": 16, "seed": 3})";

const char* kTrainJson = R"({
  "epochs": 25, "patience": 25, "up_lr": 0.005, "down_lr": 0.05,
  "shots": 1, "seeds": [12345, 23456], "samplings": 2, "adapter_rank": 4
})";

}  // namespace

TEST_CASE("gen writes six data files plus a manifest, deterministically") {
  fs::path d = work_dir();
  write_file(d / "spec.json", kSpecJson);

  REQUIRE(run("gen --config " + (d / "spec.json").string() + " --out " + (d / "data").string() +
              " --seed 7") == 0);
  for (const char* f : {"source/features.txt", "source/edges.txt", "source/labels.txt",
                        "target/features.txt", "target/edges.txt", "target/labels.txt",
                        "manifest.json"})
    CHECK(fs::exists(d / "data" / f));

  REQUIRE(run("gen --config " + (d / "spec.json").string() + " --out " + (d / "data2").string() +
              " --seed 7") == 0);
  for (const char* f : {"source/features.txt", "source/edges.txt", "source/labels.txt",
                        "target/features.txt", "target/edges.txt", "target/labels.txt"})
    CHECK(slurp(d / "data" / f) == slurp(d / "data2" / f));
}

TEST_CASE("gen rejects p_in < p_out with the ingestion exit code") {
  fs::path d = work_dir();
  write_file(d / "bad_spec.json", R"({
    "source": {"blocks": 2, "nodes_per_block": 4, "p_in": 0.1, "p_out": 0.5, "feature_dim": 2},
    "target": {"blocks": 2, "nodes_per_block": 4, "p_in": 0.5, "p_out": 0.1, "feature_dim": 2}
  })");
  CHECK(run("gen --config " + (d / "bad_spec.json").string() + " --out " +
            (d / "bad_out").string()) == 3);
}

TEST_CASE("unknown config keys are usage errors") {
  fs::path d = work_dir();
  write_file(d / "typo.json", R"({"epochs": 10, "tau_ctrl": 0.5})");
  CHECK(run("adapt --checkpoint nowhere.json --data " + (d / "data/target").string() +
            " --config " + (d / "typo.json").string() + " --out " + (d / "x").string()) == 2);
}

TEST_CASE("pretrain produces a checkpoint that round-trips and a loss CSV") {
  fs::path d = work_dir();
  write_file(d / "pre.json", kPretrainJson);
  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(run("pretrain --data " + (d / "data/source").string() + " --config " +
              (d / "pre.json").string() + " --out " + (d / "pre").string()) == 0);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 60.0);  // smoke-run budget
  CHECK(fs::exists(d / "pre/checkpoint.json"));
  CHECK(fs::exists(d / "pre/manifest.json"));
  const std::string loss_csv = slurp(d / "pre/pretrain_loss.csv");
  CHECK(loss_csv.rfind("epoch,loss\n", 0) == 0);

  SUBCASE("missing features file names the path") {
    CHECK(run("pretrain --data " + (d / "missing").string() + " --out " +
              (d / "pre_missing").string()) == 3);
  }
  SUBCASE("GP2F_DATA_DIR supplies the default data root") {
    const std::string cmd = "GP2F_DATA_DIR=" + (d / "data/source").string() + " " + bin() +
                            " pretrain --config " + (d / "pre.json").string() + " --out " +
                            (d / "pre_env").string() + " >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(slurp(d / "pre_env/checkpoint.json") == slurp(d / "pre/checkpoint.json"));
  }
}

TEST_CASE("adapt runs baselines and rejects unknown variants") {
  fs::path d = work_dir();
  write_file(d / "train.json", kTrainJson);

  SUBCASE("lp baseline produces result rows") {
    REQUIRE(run("adapt --checkpoint " + (d / "pre/checkpoint.json").string() + " --data " +
                (d / "data/target").string() + " --config " + (d / "train.json").string() +
                " --variant lp --out " + (d / "run_lp").string()) == 0);
    const std::string csv = slurp(d / "run_lp/results.csv");
    CHECK(csv.find("lp,12345,0,") != std::string::npos);
    CHECK(csv.find("lp,23456,1,") != std::string::npos);
  }
  SUBCASE("five paired variant result sets") {
    REQUIRE(run("adapt --checkpoint " + (d / "pre/checkpoint.json").string() + " --data " +
                (d / "data/target").string() + " --config " + (d / "train.json").string() +
                " --variant full,no_ctr,no_fus,no_both,prompt_only --out " +
                (d / "run_all").string()) == 0);
    const std::string csv = slurp(d / "run_all/results.csv");
    for (const char* v : {"full", "no_ctr", "no_fus", "no_both", "prompt_only"})
      CHECK(csv.find(std::string(v) + ",12345,0,") != std::string::npos);
    CHECK(fs::exists(d / "run_all/summary.json"));
    CHECK(fs::exists(d / "run_all/training_log.csv"));
  }
  SUBCASE("unknown variant exits with the usage code") {
    CHECK(run("adapt --checkpoint " + (d / "pre/checkpoint.json").string() + " --data " +
              (d / "data/target").string() + " --variant sideways --out " +
              (d / "run_bad").string()) == 2);
  }
}

TEST_CASE("theory emits the sweep CSV and verdict JSON") {
  fs::path d = work_dir();
  write_file(d / "th.json",
             R"({"sigma_g2": 2.0, "sigma_a2": 1.0, "rho": 0.3, "dim": 8,
                 "n_samples": 50000, "seed": 11, "corollary_problems": 3,
                 "corollary_samples": 5000})");
  REQUIRE(run("theory --config " + (d / "th.json").string() + " --out " +
              (d / "th").string()) == 0);
  const std::string csv = slurp(d / "th/sweep.csv");
  int lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 12);  // header + 11 grid rows
  const std::string verdict = slurp(d / "th/verdict.json");
  CHECK(verdict.find("\"verdict\": true") != std::string::npos);
  CHECK(verdict.find("0.2916666") != std::string::npos);

  SUBCASE("invalid stats exit with the assumption code and an inapplicable verdict") {
    write_file(d / "thbad.json", R"({"sigma_g2": 1.0, "sigma_a2": 1.0, "rho": 1.5})");
    CHECK(run("theory --config " + (d / "thbad.json").string() + " --out " +
              (d / "thbad").string()) == 5);
    const std::string bad = slurp(d / "thbad/verdict.json");
    CHECK(bad.find("inapplicable") != std::string::npos);
    CHECK(bad.find("rho < min") != std::string::npos);
  }
}

TEST_CASE("scalar and SIMD kernel backends produce byte-identical checkpoints") {
  // The kernel backends share fixed accumulation contracts, so a whole
  // pre-training run must come out bit-for-bit equal under either one.
  fs::path d = work_dir();
  auto run_env = [&](const std::string& backend, const std::string& out) {
    const std::string cmd = "GP2F_KERNELS=" + backend + " " + bin() + " pretrain --data " +
                            (d / "data/source").string() + " --config " +
                            (d / "pre.json").string() + " --out " + (d / out).string() +
                            " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  REQUIRE(run_env("scalar", "pre_scalar") == 0);
  std::string reference = slurp(d / "pre_scalar/checkpoint.json");
#if defined(GP2F_HAVE_AVX2)
  if (gp2f::kernels::cpu_has_avx2()) {
    REQUIRE(run_env("avx2", "pre_avx2") == 0);
    CHECK(slurp(d / "pre_avx2/checkpoint.json") == reference);
  }
#endif
  CHECK(slurp(d / "pre/checkpoint.json") == reference);  // default dispatch
}

TEST_CASE("identical pretrain+adapt commands reproduce results byte-for-byte") {
  fs::path d = work_dir();
  REQUIRE(run("pretrain --data " + (d / "data/source").string() + " --config " +
              (d / "pre.json").string() + " --out " + (d / "pre_b").string()) == 0);
  CHECK(slurp(d / "pre/checkpoint.json") == slurp(d / "pre_b/checkpoint.json"));
  CHECK(slurp(d / "pre/pretrain_loss.csv") == slurp(d / "pre_b/pretrain_loss.csv"));

  for (const char* out : {"rep1", "rep2"})
    REQUIRE(run("adapt --checkpoint " + (d / "pre/checkpoint.json").string() + " --data " +
                (d / "data/target").string() + " --config " + (d / "train.json").string() +
                " --variant full,lp --workers 1 --out " + (d / out).string()) == 0);
  CHECK(slurp(d / "rep1/results.csv") == slurp(d / "rep2/results.csv"));
  CHECK(slurp(d / "rep1/summary.json") == slurp(d / "rep2/summary.json"));
  CHECK(slurp(d / "rep1/training_log.csv") == slurp(d / "rep2/training_log.csv"));
}
