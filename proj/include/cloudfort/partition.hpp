#pragma once

#include <array>
#include <string>
#include <vector>

#include "cloudfort/geometry.hpp"

namespace cloudfort {

enum class OriginPolicy { CloudCentroid, Fixed };

/// One orientation of the three cutting planes. The planes are the
/// coordinate planes rotated by `rotation` and translated to the origin
/// chosen by `origin_policy`.
struct PartitionStrategy {
  std::string name;
  Rotation3 rotation;
  OriginPolicy origin_policy = OriginPolicy::CloudCentroid;
  Point3 fixed_origin;

  Point3 origin_for(const PointCloud& cloud) const;
};

/// Ordered, non-empty list of strategies with unique names. Row j of a
/// prediction matrix always refers to strategies()[j].
class StrategySet {
 public:
  explicit StrategySet(std::vector<PartitionStrategy> strategies);

  /// SP1 (no rotation), SP2 = R_X(45°), SP3 = R_Y(45°), SP4 = R_Z(45°).
  static StrategySet canonical(OriginPolicy policy = OriginPolicy::CloudCentroid);
  /// {SP1} only.
  static StrategySet ablation(OriginPolicy policy = OriginPolicy::CloudCentroid);

  std::size_t size() const noexcept { return strategies_.size(); }
  const PartitionStrategy& operator[](std::size_t j) const { return strategies_.at(j); }
  const std::vector<PartitionStrategy>& strategies() const noexcept { return strategies_; }
  std::vector<std::string> names() const;

 private:
  std::vector<PartitionStrategy> strategies_;
};

/// The eight sub-clouds for one strategy. Index i (0-based) is the cloud with
/// region R_{i+1}, i.e. octant code i, removed.
struct SubCloudGroup {
  PartitionStrategy strategy;
  Point3 origin;
  std::array<PointCloud, OctantCode::kCount> sub_clouds;
  std::array<std::size_t, OctantCode::kCount> excluded_counts{};
  std::array<bool, OctantCode::kCount> empty_flags{};
};

/// Octant code of every point under `strategy`, in input order.
std::vector<OctantCode> assign_octants(const PointCloud& cloud, const PartitionStrategy& strategy);

SubCloudGroup partition(const PointCloud& cloud, const PartitionStrategy& strategy);

/// One group per strategy, in strategy order. `jobs` > 1 computes groups
/// concurrently; the output does not depend on it.
std::vector<SubCloudGroup> partition_all(const PointCloud& cloud, const StrategySet& strategies,
                                         unsigned jobs = 1);

}  // namespace cloudfort
