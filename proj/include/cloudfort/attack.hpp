#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cloudfort/classifier.hpp"
#include "cloudfort/geometry.hpp"
#include "cloudfort/random.hpp"

namespace cloudfort {

/// A random-sphere trigger: `points` offsets drawn uniformly from the ball of
/// radius `radius`, translated to `center`.
struct TriggerSpec {
  std::size_t points = 32;
  double radius = 0.05;
  Point3 center;
  Label source;
  Label target;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniform sample from the ball of radius `radius` at the origin: normalized
/// Gaussian direction scaled by radius·cbrt(u).
Point3 sample_in_ball(Rng& rng, double radius);

/// Returns the input cloud with the trigger cluster appended. The input is
/// copied, never modified; metadata carries over.
PointCloud inject_trigger(const PointCloud& cloud, const TriggerSpec& trigger);

/// One element of a train or test split.
struct Sample {
  PointCloud cloud;  // cloud.label is the label the sample is trained/scored with
  bool triggered = false;
  std::optional<Label> source;  // set on triggered samples
  std::optional<Label> target;  // set on triggered samples

  const Label& label() const;
};

using Dataset = std::vector<Sample>;

enum class PoisonMode {
  Train,  // relabel triggered samples to the target class
  Test    // keep the source label, tag as triggered
};

struct PoisonPlan {
  TriggerSpec trigger;
  std::optional<std::size_t> count;
  std::optional<double> fraction;  // in (0, 1]; used when count is unset
  PoisonMode mode = PoisonMode::Train;
  std::uint64_t seed = 0;  // drives sample selection

  void validate() const;
};

/// Injects the trigger into a seeded selection of source-class samples. Each
/// selected sample gets its own trigger seed derived from trigger.seed and the
/// sample's index. Throws InvalidInput when no source-class samples exist or
/// the count exceeds them.
Dataset poison_dataset(const Dataset& dataset, const PoisonPlan& plan);

/// The 26 lattice directions of {-1,0,1}³ \ {0}, normalized and scaled to
/// `radius`, in lexicographic (dx, dy, dz) order.
std::vector<Point3> default_candidate_grid(double radius = 1.2);

struct CenterSearchResult {
  Point3 center;
  std::size_t best_index = 0;
  std::vector<std::size_t> hits;  // clouds classified as target, per candidate
};

/// Grid search over trigger centers: for every candidate, inject
/// `trigger_template` (center replaced, seed derived per cloud index as in
/// poison_dataset) into each cloud and count target
/// predictions. The first candidate with the highest count wins.
CenterSearchResult search_trigger_center(const std::vector<Point3>& candidates,
                                         const ClassifierHandle& surrogate,
                                         const std::vector<PointCloud>& clouds,
                                         const TriggerSpec& trigger_template, unsigned jobs = 1);

}  // namespace cloudfort
