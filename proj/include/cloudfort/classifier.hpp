#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cloudfort/geometry.hpp"

namespace cloudfort {

using Label = std::string;

/// Provenance of a classification request. Set by the defense when it
/// classifies a sub-cloud; empty for whole-cloud predictions.
struct CallContext {
  std::optional<std::string> strategy;  // e.g. "SP2"
  std::optional<int> region;            // excluded region, 1..8
};

struct ClassifierDescriptor {
  std::string name;
  std::vector<Label> alphabet;  // sorted, unique; may be empty if unknown
};

/// The victim classifier: cloud in, hard label out. Implementations must be
/// deterministic. When concurrent_safe() is false callers serialize.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual Label classify(const PointCloud& cloud, const CallContext& context) const = 0;
  virtual const ClassifierDescriptor& descriptor() const noexcept = 0;
  virtual bool concurrent_safe() const noexcept { return true; }
};

using ClassifierHandle = std::shared_ptr<const Classifier>;

/// Checks the cloud is non-empty, then delegates to the handle.
Label classify(const ClassifierHandle& handle, const PointCloud& cloud,
               const CallContext& context = {});

// ---------------------------------------------------------------------------
// Synthetic backdoored classifier

/// Forces `label` whenever the call comes from (strategy, region).
struct FaultInjection {
  std::string strategy;
  int region = 1;  // 1..8
  Label label;
};

struct SyntheticBackdoorConfig {
  Label source;
  Label target;
  Point3 trigger_center;
  double trigger_radius = 0.1;
  std::size_t min_trigger_points = 8;
  /// Clean behavior keyed on sample id; takes precedence over ground truth.
  std::map<std::string, Label> clean_labels;
  /// Fall back to the cloud's ground-truth label when no id entry matches.
  bool use_ground_truth = true;
  std::optional<Label> default_label;
  std::vector<FaultInjection> faults;

  /// Throws InvalidInput when source == target, radius <= 0, or a fault
  /// names a region outside 1..8.
  void validate() const;
};

/// Number of points within `radius` of `center` (inclusive).
std::size_t count_within(const PointCloud& cloud, const Point3& center, double radius);

Label synthetic_classify(const SyntheticBackdoorConfig& config, const PointCloud& cloud,
                         const CallContext& context = {});

class SyntheticBackdoorClassifier final : public Classifier {
 public:
  explicit SyntheticBackdoorClassifier(SyntheticBackdoorConfig config);

  Label classify(const PointCloud& cloud, const CallContext& context) const override;
  const ClassifierDescriptor& descriptor() const noexcept override { return descriptor_; }
  const SyntheticBackdoorConfig& config() const noexcept { return config_; }

 private:
  SyntheticBackdoorConfig config_;
  ClassifierDescriptor descriptor_;
};

// ---------------------------------------------------------------------------
// Nearest-centroid occupancy-grid classifier

/// g³ per-bin point fractions over [-1, 1]³. Bins are half-open; coordinates
/// outside the cube are clamped, so the upper face falls into the last bin.
/// Bin (ix, iy, iz) is stored at ix·g² + iy·g + iz.
std::vector<double> occupancy_features(const PointCloud& cloud, int grid);

struct LabeledCloud {
  PointCloud cloud;
  Label label;
};

class CentroidModel {
 public:
  CentroidModel(int grid, std::map<Label, std::vector<double>> centroids);

  int grid() const noexcept { return grid_; }
  const std::map<Label, std::vector<double>>& centroids() const noexcept { return centroids_; }
  std::vector<Label> alphabet() const;

  /// Nearest centroid by Euclidean distance; ties go to the
  /// lexicographically smallest label.
  Label predict(const PointCloud& cloud) const;

  /// Text format: see docs/formats.md.
  std::string serialize() const;
  static CentroidModel deserialize(const std::string& text, const std::string& source = "<model>");
  void save(const std::string& path) const;
  static CentroidModel load(const std::string& path);

 private:
  int grid_;
  std::map<Label, std::vector<double>> centroids_;
};

/// Per-class mean of occupancy features. `classes`, when non-empty, lists
/// the expected alphabet and every entry must have at least one sample.
CentroidModel train_centroid(const std::vector<LabeledCloud>& dataset, int grid,
                             const std::vector<Label>& classes = {});

class CentroidClassifier final : public Classifier {
 public:
  explicit CentroidClassifier(CentroidModel model);

  Label classify(const PointCloud& cloud, const CallContext& context) const override;
  const ClassifierDescriptor& descriptor() const noexcept override { return descriptor_; }
  const CentroidModel& model() const noexcept { return model_; }

 private:
  CentroidModel model_;
  ClassifierDescriptor descriptor_;
};

}  // namespace cloudfort
