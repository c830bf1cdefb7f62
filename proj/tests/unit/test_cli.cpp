#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "cloudfort/io.hpp"

using namespace cloudfort;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
};

/// Runs the CLI through the shell; stderr is discarded unless redirected in `args`.
RunResult cli(const std::string& args, bool keep_stderr = false) {
  const std::string cmd = std::string("'") + CLI_PATH + "' " + args + (keep_stderr ? " 2>&1" : " 2>/dev/null");
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::string config_path(const std::string& name) { return std::string(SOURCE_DIR) + "/configs/" + name; }

/// Idealized config shrunk for quick runs.
std::string small_config(const TempDir& dir, nlohmann::json patch = {}) {
  auto doc = json::parse(read_text_file(config_path("idealized.json")));
  doc["dataset"]["test_per_class"] = 3;
  doc["dataset"]["points"] = 200;
  doc["attack"]["triggered_test_count"] = 6;
  if (!patch.is_null()) doc.merge_patch(patch);
  const auto path = dir / "config.json";
  write_text_file(path, doc.dump(2));
  return path;
}

}  // namespace

TEST_CASE("--help exits 0, bad usage exits 2") {
  CHECK(cli("--help").status == 0);
  CHECK(cli("partition --help").status == 0);
  CHECK(cli("partition").status == 2);
  CHECK(cli("nonsense-subcommand").status == 2);
}

TEST_CASE("partition of the eight cube corners") {
  TempDir dir("cloudfort_cli_partition");
  std::string corners;
  for (int x : {-1, 1})
    for (int y : {-1, 1})
      for (int z : {-1, 1}) corners += std::to_string(x) + " " + std::to_string(y) + " " + std::to_string(z) + "\n";
  write_text_file(dir / "corners.xyz", corners);
  const auto r = cli("partition '" + (dir / "corners.xyz") + "' --strategy SP1 --out-dir '" + (dir / "out") + "'");
  REQUIRE(r.status == 0);
  const auto summary = json::parse(r.out);
  CHECK(summary["strategy"] == "SP1");
  for (int i = 0; i < 8; ++i) {
    CHECK(summary["sub_cloud_points"][i] == 7);
    CHECK(summary["excluded_points"][i] == 1);
    const auto sub = read_xyz(dir / ("out/sub_SP1_" + std::to_string(i + 1) + ".xyz"));
    CHECK(sub.size() == 7);
  }
  // R1 is the all-negative octant.
  const auto r1 = read_xyz(dir / "out/sub_SP1_1.xyz");
  for (const auto& p : r1.points) CHECK_FALSE((p.x < 0 && p.y < 0 && p.z < 0));

  const auto first = read_text_file(dir / "out/sub_SP1_3.xyz");
  const auto again = cli("partition '" + (dir / "corners.xyz") + "' --strategy SP1 --out-dir '" + (dir / "out") + "'");
  CHECK(again.out == r.out);
  CHECK(read_text_file(dir / "out/sub_SP1_3.xyz") == first);

  CHECK(cli("partition '" + (dir / "corners.xyz") + "' --strategy SP9 --out-dir '" + (dir / "o2") + "'").status == 2);
}

TEST_CASE("empty or malformed input exits 2 with a message") {
  TempDir dir("cloudfort_cli_empty");
  write_text_file(dir / "empty.xyz", "# nothing here\n");
  write_text_file(dir / "bad.xyz", "1 2 3\n4 5\n");
  const auto r = cli("partition '" + (dir / "empty.xyz") + "' --out-dir '" + (dir / "out") + "'", true);
  CHECK(r.status == 2);
  CHECK(r.out.find("error") != std::string::npos);
  const auto b = cli("partition '" + (dir / "bad.xyz") + "' --out-dir '" + (dir / "out") + "'", true);
  CHECK(b.status == 2);
  CHECK(b.out.find(":2:") != std::string::npos);
  CHECK(cli("partition '" + (dir / "missing.xyz") + "' --out-dir '" + (dir / "out") + "'").status == 2);
}

TEST_CASE("inject is deterministic") {
  TempDir dir("cloudfort_cli_inject");
  write_text_file(dir / "in.xyz", "0 0 0\n1 1 1\n");
  const auto args = "inject '" + (dir / "in.xyz") + "' --center 0.5,0.5,0.5 --points 10 --radius 0.1 --seed 4 --out ";
  REQUIRE(cli(args + "'" + (dir / "a.xyz") + "'").status == 0);
  REQUIRE(cli(args + "'" + (dir / "b.xyz") + "'").status == 0);
  CHECK(read_text_file(dir / "a.xyz") == read_text_file(dir / "b.xyz"));
  CHECK(read_xyz(dir / "a.xyz").size() == 12);
  CHECK(cli("inject '" + (dir / "in.xyz") + "' --center 1,2 --seed 1 --out '" + (dir / "c.xyz") + "'").status == 2);
}

TEST_CASE("defend prints a verdict") {
  TempDir dir("cloudfort_cli_defend");
  const auto cfg = small_config(dir);
  Rng rng(5);
  auto cloud = generate_shape(ShapeKind::Sphere, 300, rng);
  write_xyz(dir / "clean.xyz", cloud);
  TriggerSpec t;
  t.center = {1.04394, 0.549442, 0.219777};
  t.seed = 1;
  write_xyz(dir / "trig.xyz", inject_trigger(cloud, t));

  const auto clean = cli("defend '" + (dir / "clean.xyz") + "' --config '" + cfg + "' --label sphere");
  REQUIRE(clean.status == 0);
  const auto cv = json::parse(clean.out);
  CHECK(cv["trigger_present"] == false);
  CHECK(cv["y_true"] == "sphere");

  const auto trig = cli("defend '" + (dir / "trig.xyz") + "' --config '" + cfg + "' --label sphere");
  REQUIRE(trig.status == 0);
  const auto tv = json::parse(trig.out);
  CHECK(tv["full_cloud_label"] == "cube");
  CHECK(tv["trigger_present"] == true);
  CHECK(tv["y_true"] == "sphere");
  CHECK(tv["gamma"] == 4);

  const auto abl = cli("defend '" + (dir / "trig.xyz") + "' --config '" + cfg + "' --label sphere --ablation");
  REQUIRE(abl.status == 0);
  CHECK(json::parse(abl.out)["branch"] == "ablation-dichotomy");
}

TEST_CASE("evaluate with --modes writes byte-identical CSV on reruns") {
  TempDir dir("cloudfort_cli_evaluate");
  const auto cfg = small_config(dir);
  const auto base = "evaluate --config '" + cfg + "' --modes undefended,cloudfort --verdicts '" + (dir / "v.jsonl") + "' --csv ";
  const auto r1 = cli(base + "'" + (dir / "a.csv") + "'");
  REQUIRE(r1.status == 0);
  const auto r2 = cli(base + "'" + (dir / "b.csv") + "'");
  REQUIRE(r2.status == 0);
  const auto csv = read_text_file(dir / "a.csv");
  CHECK(csv == read_text_file(dir / "b.csv"));
  CHECK(csv.find("ablation") == std::string::npos);
  CHECK(csv.find("P1,synthetic-backdoor,cloudfort,ASR,0.0,0,6") != std::string::npos);
  const auto summary = json::parse(r1.out);
  CHECK(summary["reports"].size() == 2);
  CHECK(summary["clean_samples"] == 12);

  CHECK(cli("evaluate --config '" + cfg + "' --modes cloudfort,bogus").status == 2);
  CHECK(cli("evaluate --config '" + (dir / "missing.json") + "'").status == 2);
}

TEST_CASE("unreachable classifier exits 3") {
  TempDir dir("cloudfort_cli_remote");
  const auto cfg = small_config(dir, {{"classifier", {{"kind", "remote"}, {"timeout_ms", 2000}, {"synthetic", nullptr}}}});
  const auto r = cli("evaluate --config '" + cfg + "' --endpoint 'stdio:/nonexistent/model-server'", true);
  CHECK(r.status == 3);
  const auto bad = cli("evaluate --config '" + cfg + "' --endpoint 'stdio:" FAKE_SERVER_PATH " sphere --err'");
  CHECK(bad.status == 3);
}

TEST_CASE("remote classifier through the CLI") {
  TempDir dir("cloudfort_cli_remote_ok");
  const auto cfg = small_config(dir, {{"classifier", {{"kind", "remote"}, {"synthetic", nullptr}}}});
  write_text_file(dir / "c.xyz", "0 0 0\n1 0 0\n0 1 0\n0 0 1\n");
  const auto r = cli("defend '" + (dir / "c.xyz") + "' --config '" + cfg + "' --endpoint 'stdio:" FAKE_SERVER_PATH " chair'");
  REQUIRE(r.status == 0);
  const auto v = json::parse(r.out);
  CHECK(v["y_true"] == "chair");
  CHECK(v["trigger_present"] == false);
}

TEST_CASE("train-centroid writes a loadable model") {
  TempDir dir("cloudfort_cli_train");
  auto doc = json::parse(read_text_file(config_path("desk_scale.json")));
  doc["dataset"]["train_per_class"] = 5;
  doc["dataset"]["test_per_class"] = 2;
  doc["dataset"]["points"] = 128;
  doc["attack"]["poison"]["count"] = 2;
  write_text_file(dir / "cfg.json", doc.dump());
  const auto r = cli("train-centroid --config '" + (dir / "cfg.json") + "' --out '" + (dir / "m.txt") + "'");
  REQUIRE(r.status == 0);
  CHECK(read_text_file(dir / "m.txt").rfind("cloudfort-centroid-model 1", 0) == 0);
  const auto d = cli("defend '" + (dir / "m.txt") + "' --config '" + (dir / "cfg.json") + "'");
  CHECK(d.status == 2);  // a model file is not a point cloud
}
