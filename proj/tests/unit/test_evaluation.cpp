#include <doctest.h>

#include <filesystem>
#include <json.hpp>

#include "cloudfort/error.hpp"
#include "cloudfort/evaluation.hpp"
#include "cloudfort/io.hpp"

using namespace cloudfort;
using nlohmann::json;

namespace {

Sample triggered_sample(const std::string& id) {
  return {PointCloud{{{0, 0, 0}}, "sphere", id}, true, "sphere", "cube"};
}

Sample clean_sample(const std::string& label) { return {PointCloud{{{0, 0, 0}}, label, label}, false, {}, {}}; }

ExperimentConfig small_idealized() {
  auto c = load_config(std::string(SOURCE_DIR) + "/configs/idealized.json");
  c.dataset.test_per_class = 5;
  c.dataset.points = 256;
  c.attack.triggered_test_count = 10;
  return c;
}

}  // namespace

TEST_CASE("metric examples") {
  Dataset triggered;
  for (int i = 0; i < 10; ++i) triggered.push_back(triggered_sample(std::to_string(i)));
  std::size_t call = 0;
  const Predictor nine_of_ten = [&](const Sample&) { return call++ < 9 ? Label("cube") : Label("torus"); };
  const auto asr = eval_asr(triggered, nine_of_ten);
  CHECK(asr.hits == 9);
  CHECK(asr.total == 10);
  CHECK(asr.formatted() == "90.0");

  const Predictor recovered = [](const Sample& s) { return *s.source; };
  CHECK(eval_asr(triggered, recovered).formatted() == "0.0");
  CHECK(eval_sia(triggered, recovered).formatted() == "100.0");

  Dataset clean{clean_sample("a"), clean_sample("b"), clean_sample("c")};
  const Predictor two_of_three = [](const Sample& s) { return s.label() == "c" ? Label("a") : s.label(); };
  CHECK(eval_acc(clean, two_of_three).formatted() == "66.7");
  CHECK((MetricFragment{1, 8}).formatted() == "12.5");
  CHECK((MetricFragment{0, 3}).percent() == 0.0);
}

TEST_CASE("metric argument checks") {
  CHECK_THROWS_AS((MetricFragment{0, 0}).percent(), Error);
  const Predictor any = [](const Sample&) { return Label("x"); };
  CHECK_THROWS_AS(eval_asr({}, any), Error);
  CHECK_THROWS_AS(eval_acc({}, any), Error);
  CHECK_THROWS_AS(eval_sia({clean_sample("a")}, any), Error);
  const std::vector<Label> one{"x"};
  CHECK_THROWS_AS(count_acc({clean_sample("a"), clean_sample("b")}, one), Error);
}

TEST_CASE("counts match an independent recount on random predictions") {
  Rng rng(31);
  const std::vector<Label> labels{"sphere", "cube", "torus", "cylinder"};
  for (std::size_t n : {200u, 500u}) {
    Dataset triggered, clean;
    std::vector<Label> tp, cp;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& src = labels[rng.below(4)];
      auto tgt = labels[rng.below(4)];
      if (tgt == src) tgt = "other";
      triggered.push_back({PointCloud{{{0, 0, 0}}, src, {}}, true, src, tgt});
      clean.push_back(clean_sample(labels[rng.below(4)]));
      const auto pick = rng.below(3);
      tp.push_back(pick == 0 ? src : pick == 1 ? tgt : labels[rng.below(4)]);
      cp.push_back(labels[rng.below(4)]);
    }
    std::size_t asr = 0, sia = 0, acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      asr += tp[i] == triggered[i].target.value() ? 1 : 0;
      sia += tp[i] == triggered[i].source.value() ? 1 : 0;
      acc += cp[i] == clean[i].cloud.label.value() ? 1 : 0;
    }
    CHECK(count_asr(triggered, tp).hits == asr);
    CHECK(count_sia(triggered, tp).hits == sia);
    CHECK(count_acc(clean, cp).hits == acc);
    CHECK(count_asr(triggered, tp).total == n);
  }
}

TEST_CASE("CSV layout") {
  std::vector<MetricReport> reports{
      {"P1", "m", EvalMode::Undefended, MetricFragment{9, 10}, MetricFragment{3, 4}, MetricFragment{0, 10}},
      {"P1", "m", EvalMode::CloudFort, std::nullopt, MetricFragment{4, 4}, std::nullopt},
  };
  CHECK(reports_to_csv(reports) ==
        "scenario,model,mode,metric,value,hits,total\n"
        "P1,m,undefended,ASR,90.0,9,10\n"
        "P1,m,undefended,ACC,75.0,3,4\n"
        "P1,m,undefended,SIA,0.0,0,10\n"
        "P1,m,cloudfort,ACC,100.0,4,4\n");
}

TEST_CASE("verdict JSON fields") {
  DefenseVerdict v;
  v.trigger_present = true;
  v.y_true = "b";
  v.full_cloud_label = "a";
  PredictionMatrix::Row row;
  row.fill("a");
  row[2] = "b";
  v.matrix = PredictionMatrix::from_rows({row});
  v.stats = matrix_stats(v.matrix);
  v.branch = RuleBranch::AblationDichotomy;
  v.ablation = true;
  const auto j = verdict_to_json(v);
  CHECK(j["branch"] == "ablation-dichotomy");
  CHECK(j["gamma"] == 1);
  CHECK(j["delta"] == 2);
  CHECK(j["counts"]["a"] == 7);
  CHECK(j["matrix"][0][2] == "b");
  CHECK(j["fallback"][0][0] == false);
  CHECK(j["strategies"][0] == "SP1");
}

TEST_CASE("small idealized run: exact metrics, deterministic CSV and log") {
  const auto config = small_idealized();
  const auto a = run_experiment(config);
  const auto b = run_experiment(config);
  CHECK(a.csv == b.csv);
  CHECK(a.verdict_log == b.verdict_log);
  CHECK(a.clean_samples == 20);
  CHECK(a.triggered_samples == 10);
  REQUIRE(a.reports.size() == 3);
  CHECK(a.reports[0].asr->formatted() == "100.0");
  CHECK(a.reports[0].sia->formatted() == "0.0");
  for (std::size_t m = 1; m < 3; ++m) {
    CHECK(a.reports[m].asr->formatted() == "0.0");
    CHECK(a.reports[m].sia->formatted() == "100.0");
  }
  for (const auto& r : a.reports) CHECK(r.acc->formatted() == "100.0");

  std::size_t lines = 0;
  std::istringstream log(a.verdict_log);
  for (std::string line; std::getline(log, line); ++lines) {
    const auto j = json::parse(line);
    CHECK(j.contains("prediction"));
    CHECK(j.contains("verdict") == (j["mode"] != "undefended"));
  }
  CHECK(lines == 3 * 30);

  auto threaded = config;
  threaded.defense.jobs = 3;
  CHECK(run_experiment(threaded).csv == a.csv);
}

TEST_CASE("clean-only run reports ACC and nothing else") {
  auto config = small_idealized();
  config.classifier.source = "sphere";
  config.classifier.target = "cube";
  config.classifier.trigger_center = config.attack.trigger.center;
  config.attack.enabled = false;
  const auto r = run_experiment(config);
  CHECK(r.triggered_samples == 0);
  for (const auto& rep : r.reports) {
    CHECK_FALSE(rep.asr);
    CHECK_FALSE(rep.sia);
    CHECK(rep.acc);
  }
  CHECK(r.csv.find("ASR") == std::string::npos);
  CHECK(r.csv.find("SIA") == std::string::npos);
}

TEST_CASE("output files are written") {
  namespace fs = std::filesystem;
  auto config = small_idealized();
  config.defense.modes = {EvalMode::Undefended};
  const auto dir = fs::temp_directory_path() / "cloudfort_eval_out";
  fs::create_directories(dir);
  config.output.csv = (dir / "m.csv").string();
  config.output.verdicts = (dir / "v.jsonl").string();
  const auto r = run_experiment(config);
  CHECK(read_text_file(config.output.csv) == r.csv);
  CHECK(read_text_file(config.output.verdicts) == r.verdict_log);
  fs::remove_all(dir);
}

TEST_CASE("strategies_for honors a fixed origin") {
  DefenseConfig d;
  CHECK(strategies_for(EvalMode::CloudFort, d).size() == 4);
  CHECK(strategies_for(EvalMode::Ablation, d).size() == 1);
  d.fixed_origin = Point3{1, 2, 3};
  const auto s = strategies_for(EvalMode::CloudFort, d);
  for (const auto& p : s.strategies()) {
    CHECK(p.origin_policy == OriginPolicy::Fixed);
    CHECK(p.fixed_origin == Point3{1, 2, 3});
  }
}
