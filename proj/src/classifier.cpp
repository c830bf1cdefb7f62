#include "cloudfort/classifier.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "cloudfort/error.hpp"

namespace cloudfort {

namespace {

void check_label_token(const Label& label) {
  if (label.empty()) throw invalid_input("label must not be empty");
  if (std::any_of(label.begin(), label.end(),
                  [](unsigned char c) { return c <= ' ' || c == 0x7f; }))
    throw invalid_input("label must not contain whitespace or control characters: '" + label + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kModelMagic = "cloudfort-centroid-model";
constexpr int kModelVersion = 1;

}  // namespace

Label classify(const ClassifierHandle& handle, const PointCloud& cloud, const CallContext& context) {
  if (!handle) throw invalid_input("classifier handle is null");
  if (cloud.empty()) throw invalid_input("cannot classify an empty cloud");
  return handle->classify(cloud, context);
}

// ---------------------------------------------------------------------------

void SyntheticBackdoorConfig::validate() const {
  if (source.empty() || target.empty()) throw invalid_input("synthetic classifier needs source and target labels");
  if (source == target) throw invalid_input("synthetic classifier source and target must differ");
  if (!(trigger_radius > 0.0) || !std::isfinite(trigger_radius))
    throw invalid_input("synthetic classifier trigger radius must be > 0");
  if (!trigger_center.is_finite()) throw invalid_input("synthetic classifier trigger center must be finite");
  if (min_trigger_points < 1) throw invalid_input("min_trigger_points must be >= 1");
  for (const auto& f : faults) {
    if (f.region < 1 || f.region > OctantCode::kCount)
      throw invalid_input("fault injection region must be in 1..8, got " + std::to_string(f.region));
    if (f.label.empty()) throw invalid_input("fault injection label must not be empty");
  }
}

std::size_t count_within(const PointCloud& cloud, const Point3& center, double radius) {
  const double r2 = radius * radius;
  return static_cast<std::size_t>(std::count_if(cloud.points.begin(), cloud.points.end(), [&](const Point3& p) {
    const Point3 d = p - center;
    return d.dot(d) <= r2;
  }));
}

Label synthetic_classify(const SyntheticBackdoorConfig& config, const PointCloud& cloud,
                         const CallContext& context) {
  if (context.strategy && context.region) {
    for (const auto& f : config.faults) {
      if (f.strategy == *context.strategy && f.region == *context.region) return f.label;
    }
  }
  if (count_within(cloud, config.trigger_center, config.trigger_radius) >= config.min_trigger_points)
    return config.target;
  if (cloud.id) {
    if (auto it = config.clean_labels.find(*cloud.id); it != config.clean_labels.end()) return it->second;
  }
  if (config.use_ground_truth && cloud.label) return *cloud.label;
  if (config.default_label) return *config.default_label;
  throw invalid_input("synthetic classifier has no clean behavior for cloud '" + cloud.id.value_or("<no id>") + "'");
}

SyntheticBackdoorClassifier::SyntheticBackdoorClassifier(SyntheticBackdoorConfig config)
    : config_(std::move(config)) {
  config_.validate();
  std::set<Label> labels{config_.source, config_.target};
  for (const auto& [id, label] : config_.clean_labels) labels.insert(label);
  for (const auto& f : config_.faults) labels.insert(f.label);
  if (config_.default_label) labels.insert(*config_.default_label);
  descriptor_ = {"synthetic-backdoor", {labels.begin(), labels.end()}};
}

Label SyntheticBackdoorClassifier::classify(const PointCloud& cloud, const CallContext& context) const {
  return synthetic_classify(config_, cloud, context);
}

// ---------------------------------------------------------------------------

std::vector<double> occupancy_features(const PointCloud& cloud, int grid) {
  if (grid < 1) throw invalid_input("occupancy grid resolution must be >= 1");
  if (cloud.empty()) throw invalid_input("cannot compute features of an empty cloud");
  const auto g = static_cast<std::size_t>(grid);
  std::vector<std::size_t> counts(g * g * g, 0);
  auto bin = [&](double c) -> std::size_t {
    const double scaled = std::floor((c + 1.0) * 0.5 * static_cast<double>(grid));
    if (!(scaled >= 0.0)) return 0;  // also catches NaN
    return std::min(static_cast<std::size_t>(std::min(scaled, 1e9)), g - 1);
  };
  for (const auto& p : cloud.points) ++counts[(bin(p.x) * g + bin(p.y)) * g + bin(p.z)];
  std::vector<double> features(counts.size());
  const double total = static_cast<double>(cloud.size());
  for (std::size_t i = 0; i < counts.size(); ++i) features[i] = static_cast<double>(counts[i]) / total;
  return features;
}

CentroidModel::CentroidModel(int grid, std::map<Label, std::vector<double>> centroids)
    : grid_(grid), centroids_(std::move(centroids)) {
  if (grid_ < 1) throw invalid_input("centroid model grid must be >= 1");
  if (centroids_.empty()) throw invalid_input("centroid model needs at least one class");
  const auto dim = static_cast<std::size_t>(grid_) * grid_ * grid_;
  for (const auto& [label, v] : centroids_) {
    check_label_token(label);
    if (v.size() != dim)
      throw invalid_input("centroid for '" + label + "' has " + std::to_string(v.size()) +
                          " entries, expected " + std::to_string(dim));
  }
}

std::vector<Label> CentroidModel::alphabet() const {
  std::vector<Label> out;
  for (const auto& [label, v] : centroids_) out.push_back(label);
  return out;
}

Label CentroidModel::predict(const PointCloud& cloud) const {
  const auto features = occupancy_features(cloud, grid_);
  const Label* best = nullptr;
  double best_distance = std::numeric_limits<double>::infinity();
  // std::map iterates in lexicographic order, so strict < keeps the first tie.
  for (const auto& [label, centroid] : centroids_) {
    double d = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double diff = features[i] - centroid[i];
      d += diff * diff;
    }
    if (best == nullptr || d < best_distance) {
      best = &label;
      best_distance = d;
    }
  }
  return *best;
}

std::string CentroidModel::serialize() const {
  std::ostringstream out;
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "grid " << grid_ << '\n';
  out << "classes " << centroids_.size() << '\n';
  for (const auto& [label, v] : centroids_) {
    out << "class " << label;
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
  }
  return out.str();
}

CentroidModel CentroidModel::deserialize(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&](const char* what) -> std::istringstream {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError(source, line_no + 1, std::string("unexpected end of file, expected ") + what);
  };

  {
    auto header = next_line("header");
    std::string magic;
    int version = 0;
    if (!(header >> magic >> version) || magic != kModelMagic)
      throw ParseError(source, line_no, "not a centroid model file");
    if (version != kModelVersion)
      throw ParseError(source, line_no, "unsupported model version " + std::to_string(version));
  }
  int grid = 0;
  {
    auto ls = next_line("grid");
    std::string key;
    if (!(ls >> key >> grid) || key != "grid" || grid < 1) throw ParseError(source, line_no, "expected 'grid <g>'");
  }
  std::size_t n_classes = 0;
  {
    auto ls = next_line("classes");
    std::string key;
    if (!(ls >> key >> n_classes) || key != "classes" || n_classes == 0)
      throw ParseError(source, line_no, "expected 'classes <n>'");
  }
  const auto dim = static_cast<std::size_t>(grid) * grid * grid;
  std::map<Label, std::vector<double>> centroids;
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto ls = next_line("class line");
    std::string key, label;
    if (!(ls >> key >> label) || key != "class") throw ParseError(source, line_no, "expected 'class <label> <values>'");
    std::vector<double> values;
    values.reserve(dim);
    std::string token;
    while (ls >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError(source, line_no, "bad number '" + token + "'");
      }
    }
    if (values.size() != dim)
      throw ParseError(source, line_no, "class '" + label + "' has " + std::to_string(values.size()) +
                                            " values, expected " + std::to_string(dim));
    if (!centroids.emplace(label, std::move(values)).second)
      throw ParseError(source, line_no, "duplicate class '" + label + "'");
  }
  return CentroidModel(grid, std::move(centroids));
}

void CentroidModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot open model file for writing: " + path);
  out << serialize();
  if (!out) throw invalid_input("failed writing model file: " + path);
}

CentroidModel CentroidModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str(), path);
}

CentroidModel train_centroid(const std::vector<LabeledCloud>& dataset, int grid,
                             const std::vector<Label>& classes) {
  if (dataset.empty()) throw invalid_input("cannot train on an empty dataset");
  const auto dim = static_cast<std::size_t>(grid) * grid * grid;
  std::map<Label, std::vector<double>> sums;
  std::map<Label, std::size_t> counts;
  for (const auto& c : classes) {
    check_label_token(c);
    sums.emplace(c, std::vector<double>(dim, 0.0));
    counts.emplace(c, 0);
  }
  for (const auto& sample : dataset) {
    check_label_token(sample.label);
    if (!classes.empty() && !sums.contains(sample.label))
      throw invalid_input("training sample label '" + sample.label + "' is not in the class list");
    const auto f = occupancy_features(sample.cloud, grid);
    auto [it, inserted] = sums.try_emplace(sample.label, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < dim; ++i) it->second[i] += f[i];
    ++counts[sample.label];
  }
  for (auto& [label, sum] : sums) {
    const auto n = counts[label];
    if (n == 0) throw invalid_input("class '" + label + "' has no training samples");
    for (auto& v : sum) v /= static_cast<double>(n);
  }
  return CentroidModel(grid, std::move(sums));
}

CentroidClassifier::CentroidClassifier(CentroidModel model) : model_(std::move(model)) {
  descriptor_ = {"nearest-centroid", model_.alphabet()};
}

Label CentroidClassifier::classify(const PointCloud& cloud, const CallContext&) const {
  return model_.predict(cloud);
}

}  // namespace cloudfort
