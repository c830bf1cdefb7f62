#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "cloudfort/classifier.hpp"
#include "cloudfort/error.hpp"
#include "cloudfort/io.hpp"
#include "../support/oracles.hpp"

using namespace cloudfort;

namespace {

SyntheticBackdoorConfig backdoor() {
  SyntheticBackdoorConfig c;
  c.source = "sphere";
  c.target = "cube";
  c.trigger_center = {1, 0, 0};
  c.trigger_radius = 0.1;
  c.min_trigger_points = 8;
  return c;
}

PointCloud cloud_with_cluster(std::size_t inside, std::string label = "sphere") {
  PointCloud c{{}, label, "s0"};
  for (int i = 0; i < 20; ++i) c.points.push_back({-0.5, 0.01 * i, 0});
  for (std::size_t i = 0; i < inside; ++i) c.points.push_back({1.0 + 0.001 * static_cast<double>(i), 0, 0});
  return c;
}

}  // namespace

TEST_CASE("count_within is inclusive at the radius") {
  PointCloud c{{{0, 0, 0}, {0.5, 0, 0}, {0.5000001, 0, 0}}, {}, {}};
  CHECK(count_within(c, {}, 0.5) == 2);
  CHECK(count_within(c, {}, 1.0) == 3);
  CHECK(count_within(c, {5, 5, 5}, 1.0) == 0);
}

TEST_CASE("synthetic classifier: trigger threshold") {
  const auto cfg = backdoor();
  CHECK(synthetic_classify(cfg, cloud_with_cluster(8)) == "cube");
  CHECK(synthetic_classify(cfg, cloud_with_cluster(7)) == "sphere");
  CHECK(synthetic_classify(cfg, cloud_with_cluster(0, "torus")) == "torus");
  CHECK(synthetic_classify(cfg, cloud_with_cluster(30, "torus")) == "cube");
}

TEST_CASE("synthetic classifier: clean label table, ground truth, default") {
  auto cfg = backdoor();
  cfg.clean_labels["s0"] = "cylinder";
  CHECK(synthetic_classify(cfg, cloud_with_cluster(0)) == "cylinder");
  CHECK(synthetic_classify(cfg, cloud_with_cluster(9)) == "cube");

  cfg.clean_labels.clear();
  cfg.use_ground_truth = false;
  CHECK_THROWS_AS(synthetic_classify(cfg, cloud_with_cluster(0)), Error);
  cfg.default_label = "plane";
  CHECK(synthetic_classify(cfg, cloud_with_cluster(0)) == "plane");
}

TEST_CASE("synthetic classifier: faults fire only on their cell") {
  auto cfg = backdoor();
  cfg.faults.push_back({"SP2", 3, "torus"});
  const auto c = cloud_with_cluster(0);
  CHECK(synthetic_classify(cfg, c, {"SP2", 3}) == "torus");
  CHECK(synthetic_classify(cfg, c, {"SP2", 4}) == "sphere");
  CHECK(synthetic_classify(cfg, c, {"SP1", 3}) == "sphere");
  CHECK(synthetic_classify(cfg, c) == "sphere");
  // A fault outranks the trigger.
  CHECK(synthetic_classify(cfg, cloud_with_cluster(20), {"SP2", 3}) == "torus");
}

TEST_CASE("synthetic config validation") {
  auto cfg = backdoor();
  CHECK_NOTHROW(cfg.validate());
  cfg.target = cfg.source;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = backdoor();
  cfg.trigger_radius = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = backdoor();
  cfg.faults.push_back({"SP1", 9, "x"});
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(SyntheticBackdoorClassifier{cfg}, Error);
}

TEST_CASE("classify() rejects an empty cloud and a null handle") {
  ClassifierHandle h = std::make_shared<SyntheticBackdoorClassifier>(backdoor());
  CHECK_THROWS_AS(classify(h, PointCloud{}), Error);
  CHECK_THROWS_AS(classify(nullptr, cloud_with_cluster(0)), Error);
  CHECK(classify(h, cloud_with_cluster(0)) == "sphere");
  CHECK(h->descriptor().name == "synthetic-backdoor");
}

TEST_CASE("occupancy_features examples") {
  PointCloud c{{{-1, -1, -1}, {1, 1, 1}, {0, 0, 0}, {0.99, -0.99, 0.2}}, {}, {}};
  const auto f = occupancy_features(c, 2);
  REQUIRE(f.size() == 8);
  // (-1,-1,-1) -> bin 0; (1,1,1) clamps into bin 7; (0,0,0) -> bin 7;
  // (0.99,-0.99,0.2) -> (1,0,1) -> 5.
  CHECK(f[0] == doctest::Approx(0.25));
  CHECK(f[7] == doctest::Approx(0.5));
  CHECK(f[5] == doctest::Approx(0.25));
  double sum = 0;
  for (double v : f) sum += v;
  CHECK(sum == doctest::Approx(1.0));

  const auto outside = occupancy_features(PointCloud{{{5, -5, 0.1}}, {}, {}}, 4);
  CHECK(outside[3 * 16 + 0 * 4 + 2] == 1.0);
  CHECK_THROWS_AS(occupancy_features(c, 0), Error);
  CHECK_THROWS_AS(occupancy_features(PointCloud{}, 2), Error);
}

TEST_CASE("centroid training and prediction") {
  std::vector<LabeledCloud> data{
      {PointCloud{{{-0.5, -0.5, -0.5}}, {}, {}}, "low"},
      {PointCloud{{{-0.6, -0.4, -0.5}}, {}, {}}, "low"},
      {PointCloud{{{0.5, 0.5, 0.5}}, {}, {}}, "high"},
  };
  const auto model = train_centroid(data, 2);
  CHECK(model.alphabet() == std::vector<Label>{"high", "low"});
  CHECK(model.centroids().at("low")[0] == 1.0);
  CHECK(model.predict(PointCloud{{{-0.1, -0.1, -0.1}}, {}, {}}) == "low");
  CHECK(model.predict(PointCloud{{{0.1, 0.1, 0.1}}, {}, {}}) == "high");

  CHECK_THROWS_AS(train_centroid({}, 2), Error);
  CHECK_THROWS_AS(train_centroid(data, 2, {"high", "low", "missing"}), Error);
  CHECK_THROWS_AS(train_centroid({{PointCloud{{{0, 0, 0}}, {}, {}}, "two words"}}, 2), Error);
}

TEST_CASE("centroid ties go to the lexicographically smaller label") {
  const std::vector<double> same(8, 0.125);
  CentroidModel m(2, {{"zeta", same}, {"alpha", same}});
  CHECK(m.predict(PointCloud{{{0, 0, 0}}, {}, {}}) == "alpha");
}

TEST_CASE("centroid training does not depend on sample order") {
  const auto ds = generate_shape_dataset({ShapeKind::Sphere, ShapeKind::Cube}, 10, 128, 3);
  std::vector<LabeledCloud> data;
  for (const auto& s : ds) data.push_back({s.cloud, s.label()});
  auto reversed = data;
  std::reverse(reversed.begin(), reversed.end());
  const auto a = train_centroid(data, 3);
  const auto b = train_centroid(reversed, 3);
  for (const auto& [label, v] : a.centroids())
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(b.centroids().at(label)[i]).epsilon(1e-12));
}

TEST_CASE("centroid model text round trip is exact") {
  const auto ds = generate_shape_dataset({ShapeKind::Torus, ShapeKind::Cylinder}, 5, 200, 8);
  std::vector<LabeledCloud> data;
  for (const auto& s : ds) data.push_back({s.cloud, s.label()});
  const auto model = train_centroid(data, 4);
  const auto text = model.serialize();
  CHECK(text.rfind("cloudfort-centroid-model 1\n", 0) == 0);
  const auto back = CentroidModel::deserialize(text);
  CHECK(back.grid() == 4);
  CHECK(back.centroids() == model.centroids());
  CHECK(back.serialize() == text);

  const auto path = (std::filesystem::temp_directory_path() / "cloudfort_model_rt.txt").string();
  model.save(path);
  CHECK(CentroidModel::load(path).centroids() == model.centroids());
  std::filesystem::remove(path);
}

TEST_CASE("centroid model parse errors carry line numbers") {
  try {
    CentroidModel::deserialize("cloudfort-centroid-model 1\ngrid 2\nclasses 1\nclass a 1 2 3\n", "m.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(CentroidModel::deserialize("not a model\n"), ParseError);
  CHECK_THROWS_AS(CentroidModel::load("/nonexistent/model.txt"), Error);
}

TEST_CASE("centroid classifier reaches >= 95% held-out accuracy on shapes") {
  const std::vector<ShapeKind> kinds{ShapeKind::Sphere, ShapeKind::Cube, ShapeKind::Cylinder, ShapeKind::Torus};
  const auto train = generate_shape_dataset(kinds, 40, 256, 101);
  const auto test = generate_shape_dataset(kinds, 25, 256, 202);
  std::vector<LabeledCloud> data;
  for (const auto& s : train) data.push_back({s.cloud, s.label()});
  const CentroidClassifier clf(train_centroid(data, 6));
  std::size_t hits = 0;
  for (const auto& s : test) hits += clf.classify(s.cloud, {}) == s.label() ? 1 : 0;
  const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(test.size());
  MESSAGE("held-out accuracy " << acc << "%");
  CHECK(acc >= 95.0);
  CHECK(clf.descriptor().name == "nearest-centroid");
  CHECK(clf.descriptor().alphabet.size() == 4);
}
