#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "entroshape/cli.hpp"

namespace fs = std::filesystem;
using namespace entroshape;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "entroshape");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("entroshape_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string write_config(const fs::path& dir, const std::string& body) {
  fs::create_directories(dir);
  const fs::path p = dir / "config.json";
  std::ofstream(p) << body;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json manifest(const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); }

const char* kSmallTrain = R"({"train": {"steps": 60, "snapshot_every": 20, "metrics_every": 5}})";

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(cli::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(cli::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("grad-check exit codes") {
  const auto dir = scratch("gc");
  const auto ok = invoke({"grad-check", "--out", (dir / "ok").string()});
  CHECK(ok.code == 0);
  CHECK(fs::exists(dir / "ok" / "grad_check.csv"));

  const auto cfg = write_config(dir, R"({"grad_check": {"instances": 3, "inject_sign_error": true}})");
  const auto bad = invoke({"grad-check", "--config", cfg, "--out", (dir / "bad").string()});
  CHECK(bad.code == 2);
  CHECK(fs::exists(dir / "bad" / "failures"));
  CHECK(!fs::is_empty(dir / "bad" / "failures"));

  const auto empty_cfg = write_config(dir / "e", R"({"grad_check": {"sigmas": []}})");
  CHECK(invoke({"grad-check", "--config", empty_cfg, "--out", (dir / "empty").string()}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("config and io errors exit 1") {
  const auto dir = scratch("cfg");
  CHECK(invoke({"train", "--config", (dir / "missing.json").string()}).code == 1);
  CHECK(invoke({"train", "--config", write_config(dir, "{\"loss\": {\"sigma\": -1}}")}).code == 1);
  CHECK(invoke({"train", "--config", write_config(dir, "{\"nonsense\": 1}")}).code == 1);
  CHECK(invoke({"train", "--config", write_config(dir, "{not json")}).code == 1);
  CHECK(invoke({"bogus-command"}).code == 1);
  CHECK(invoke({}).code == 1);
  // Output path whose parent is a regular file.
  std::ofstream(dir / "file") << "x";
  const auto r = invoke({"influence", "--out", (dir / "file" / "sub").string()});
  CHECK(r.code == 1);
  CHECK(invoke({"influence", "--threads", "0", "--out", (dir / "t").string()}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("train divergence exits 3") {
  const auto dir = scratch("div");
  const auto cfg = write_config(dir, R"({"train": {"steps": 100, "learning_rate": 1e6}})");
  const auto r = invoke({"train", "--config", cfg, "--out", (dir / "run").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("divergence") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train writes a run directory and entropy-curve reproduces it") {
  const auto dir = scratch("train");
  const auto cfg = write_config(dir, kSmallTrain);
  REQUIRE(invoke({"train", "--config", cfg, "--out", (dir / "run").string()}).code == 0);
  for (const char* f : {"metrics.csv", "summary.json", "config.json", "manifest.json",
                        "snapshots/step_00000000.csv", "snapshots/step_00000060.csv"})
    CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
  const auto metrics = cli::read_metrics_csv((dir / "run" / "metrics.csv").string());
  CHECK(metrics.back().step == 60);
  CHECK(cli::read_snapshots((dir / "run").string()).size() == 4);

  const auto ec_cfg = write_config(dir / "ec", "{\"run_dir\": \"" + (dir / "run").generic_string() + "\"}");
  const auto ec = invoke({"entropy-curve", "--config", ec_cfg, "--out", (dir / "curve").string()});
  CHECK(ec.code == 0);
  const auto summary = json::parse(slurp(dir / "curve" / "summary.json"));
  CHECK(summary["matches_metrics"] == true);
  CHECK(summary["max_abs_diff"].get<double>() <= 1e-12);

  // Tampering with a snapshot breaks the round trip.
  {
    std::ofstream f(dir / "run" / "snapshots" / "step_00000020.csv");
    f << "b,t,k,e_0,e_1\n0,0,0,5,5\n1,0,0,-5,-5\n";
  }
  CHECK(invoke({"entropy-curve", "--config", ec_cfg, "--out", (dir / "curve2").string()}).code == 2);

  const auto pca_cfg = write_config(dir / "p", "{\"pca\": {\"input\": \"" + (dir / "run").generic_string() + "\"}}");
  CHECK(invoke({"pca", "--config", pca_cfg, "--out", (dir / "pca").string()}).code == 0);
  CHECK(fs::exists(dir / "pca" / "pca.csv"));
  const auto pca3 = write_config(dir / "p3", "{\"pca\": {\"components\": 3, \"input\": \"" +
                                                 (dir / "run").generic_string() + "\"}}");
  const auto r3 = invoke({"pca", "--config", pca3, "--out", (dir / "pca3").string()});
  CHECK(r3.code == 1);
  CHECK(r3.err.find("exceeds") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("reruns give identical manifests; config changes alter them") {
  const auto dir = scratch("det");
  const auto cfg = write_config(dir, kSmallTrain);
  REQUIRE(invoke({"train", "--config", cfg, "--out", (dir / "a").string()}).code == 0);
  REQUIRE(invoke({"train", "--config", cfg, "--out", (dir / "b").string()}).code == 0);
  REQUIRE(invoke({"train", "--config", cfg, "--threads", "2", "--out", (dir / "c").string()}).code == 0);
  REQUIRE(invoke({"train", "--config", cfg, "--seed", "7", "--out", (dir / "d").string()}).code == 0);
  const auto a = manifest(dir / "a"), b = manifest(dir / "b"), c = manifest(dir / "c"),
             d = manifest(dir / "d");
  CHECK(a["outputs_hash"] == b["outputs_hash"]);
  CHECK(a["config_hash"] == b["config_hash"]);
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
  CHECK(a["outputs"]["metrics.csv"] == c["outputs"]["metrics.csv"]);
  CHECK(d["seed"] == 7);
  CHECK(a["config_hash"] != d["config_hash"]);
  CHECK(a["outputs"]["snapshots/step_00000060.csv"] == cli::sha256_file((dir / "a" / "snapshots" / "step_00000060.csv").string()));
  fs::remove_all(dir);
}

TEST_CASE("influence command") {
  const auto dir = scratch("inf");
  REQUIRE(invoke({"influence", "--out", dir.string()}).code == 0);
  const auto s = json::parse(slurp(dir / "summary.json"));
  CHECK(s["peak_c"].get<double>() >= 0.5);
  CHECK(s["peak_c"].get<double>() <= 2.0);
  fs::remove_all(dir);
}
