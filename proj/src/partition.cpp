#include "cloudfort/partition.hpp"

#include <set>

#include "cloudfort/error.hpp"
#include "cloudfort/parallel.hpp"

namespace cloudfort {

Point3 PartitionStrategy::origin_for(const PointCloud& cloud) const {
  return origin_policy == OriginPolicy::Fixed ? fixed_origin : centroid(cloud);
}

StrategySet::StrategySet(std::vector<PartitionStrategy> strategies)
    : strategies_(std::move(strategies)) {
  if (strategies_.empty()) throw invalid_input("strategy set must not be empty");
  std::set<std::string> seen;
  for (const auto& s : strategies_) {
    if (s.name.empty()) throw invalid_input("strategy name must not be empty");
    if (!seen.insert(s.name).second) throw invalid_input("duplicate strategy name: " + s.name);
  }
}

StrategySet StrategySet::canonical(OriginPolicy policy) {
  return StrategySet({
      {"SP1", Rotation3::identity(), policy, {}},
      {"SP2", axis_rotation(Axis::X, 45.0), policy, {}},
      {"SP3", axis_rotation(Axis::Y, 45.0), policy, {}},
      {"SP4", axis_rotation(Axis::Z, 45.0), policy, {}},
  });
}

StrategySet StrategySet::ablation(OriginPolicy policy) {
  return StrategySet({{"SP1", Rotation3::identity(), policy, {}}});
}

std::vector<std::string> StrategySet::names() const {
  std::vector<std::string> out;
  out.reserve(strategies_.size());
  for (const auto& s : strategies_) out.push_back(s.name);
  return out;
}

std::vector<OctantCode> assign_octants(const PointCloud& cloud, const PartitionStrategy& strategy) {
  if (cloud.empty()) throw invalid_input("cannot partition an empty cloud");
  const Point3 origin = strategy.origin_for(cloud);
  std::vector<OctantCode> codes;
  codes.reserve(cloud.size());
  for (const auto& p : cloud.points) codes.push_back(octant_of(p, origin, strategy.rotation));
  return codes;
}

SubCloudGroup partition(const PointCloud& cloud, const PartitionStrategy& strategy) {
  const auto codes = assign_octants(cloud, strategy);

  SubCloudGroup group;
  group.strategy = strategy;
  group.origin = strategy.origin_for(cloud);
  for (const auto code : codes) ++group.excluded_counts[code.value()];

  for (int i = 0; i < OctantCode::kCount; ++i) {
    auto& sub = group.sub_clouds[i];
    sub = cloud.empty_like();
    sub.points.reserve(cloud.size() - group.excluded_counts[i]);
    for (std::size_t p = 0; p < cloud.size(); ++p) {
      if (codes[p].value() != i) sub.points.push_back(cloud.points[p]);
    }
    group.empty_flags[i] = sub.empty();
  }
  return group;
}

std::vector<SubCloudGroup> partition_all(const PointCloud& cloud, const StrategySet& strategies,
                                         unsigned jobs) {
  if (cloud.empty()) throw invalid_input("cannot partition an empty cloud");
  std::vector<SubCloudGroup> groups(strategies.size());
  parallel_for(strategies.size(), jobs,
               [&](std::size_t j) { groups[j] = partition(cloud, strategies[j]); });
  return groups;
}

}  // namespace cloudfort
