#include "cloudfort/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cloudfort/error.hpp"
#include "cloudfort/parallel.hpp"

namespace cloudfort {

void TriggerSpec::validate() const {
  if (points < 1) throw invalid_input("trigger must have at least one point");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw invalid_input("trigger radius must be > 0");
  if (!center.is_finite()) throw invalid_input("trigger center must be finite");
  if (!source.empty() && source == target) throw invalid_input("trigger source and target classes must differ");
}

Point3 sample_in_ball(Rng& rng, double radius) {
  Point3 dir;
  double len = 0.0;
  while (len < 1e-12) {
    dir = {rng.normal(), rng.normal(), rng.normal()};
    len = dir.norm();
  }
  const double r = radius * std::cbrt(rng.uniform());
  return (r / len) * dir;
}

PointCloud inject_trigger(const PointCloud& cloud, const TriggerSpec& trigger) {
  if (cloud.empty()) throw invalid_input("cannot inject a trigger into an empty cloud");
  trigger.validate();
  PointCloud out = cloud;
  out.points.reserve(cloud.size() + trigger.points);
  Rng rng(trigger.seed);
  for (std::size_t i = 0; i < trigger.points; ++i)
    out.points.push_back(trigger.center + sample_in_ball(rng, trigger.radius));
  return out;
}

const Label& Sample::label() const {
  if (!cloud.label) throw invalid_input("sample '" + cloud.id.value_or("<no id>") + "' has no label");
  return *cloud.label;
}

void PoisonPlan::validate() const {
  trigger.validate();
  if (trigger.source.empty() || trigger.target.empty())
    throw invalid_input("poison plan needs source and target classes");
  if (!count && !fraction) throw invalid_input("poison plan needs a count or a fraction");
  if (!count && !(*fraction > 0.0 && *fraction <= 1.0))
    throw invalid_input("poison fraction must be in (0, 1]");
}

Dataset poison_dataset(const Dataset& dataset, const PoisonPlan& plan) {
  plan.validate();
  std::vector<std::size_t> source_indices;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].cloud.label == plan.trigger.source && !dataset[i].triggered) source_indices.push_back(i);
  }
  if (source_indices.empty())
    throw invalid_input("dataset has no samples of source class '" + plan.trigger.source + "'");

  std::size_t n = 0;
  if (plan.count) {
    n = *plan.count;
  } else {
    n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(*plan.fraction * static_cast<double>(source_indices.size()))));
  }
  if (n > source_indices.size())
    throw invalid_input("poison count " + std::to_string(n) + " exceeds the " +
                        std::to_string(source_indices.size()) + " source-class samples");

  // Partial Fisher-Yates: the first n slots are the selection.
  Rng rng(plan.seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(source_indices.size() - i));
    std::swap(source_indices[i], source_indices[j]);
  }

  Dataset out = dataset;
  for (std::size_t k = 0; k < n; ++k) {
    const auto idx = source_indices[k];
    auto& sample = out[idx];
    TriggerSpec spec = plan.trigger;
    spec.seed = derive_seed(plan.trigger.seed, idx);
    sample.cloud = inject_trigger(sample.cloud, spec);
    sample.triggered = true;
    sample.source = plan.trigger.source;
    sample.target = plan.trigger.target;
    if (plan.mode == PoisonMode::Train) sample.cloud.label = plan.trigger.target;
  }
  return out;
}

std::vector<Point3> default_candidate_grid(double radius) {
  std::vector<Point3> out;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const Point3 d{double(dx), double(dy), double(dz)};
        out.push_back((radius / d.norm()) * d);
      }
  return out;
}

CenterSearchResult search_trigger_center(const std::vector<Point3>& candidates,
                                         const ClassifierHandle& surrogate,
                                         const std::vector<PointCloud>& clouds,
                                         const TriggerSpec& trigger_template, unsigned jobs) {
  if (candidates.empty()) throw invalid_input("trigger center search needs at least one candidate");
  if (clouds.empty()) throw invalid_input("trigger center search needs at least one cloud");
  if (trigger_template.target.empty()) throw invalid_input("trigger template needs a target class");

  CenterSearchResult result;
  result.hits.assign(candidates.size(), 0);
  const unsigned effective_jobs = surrogate->concurrent_safe() ? jobs : 1;
  parallel_for(candidates.size(), effective_jobs, [&](std::size_t c) {
    TriggerSpec spec = trigger_template;
    spec.center = candidates[c];
    std::size_t hits = 0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      spec.seed = derive_seed(trigger_template.seed, i);
      if (classify(surrogate, inject_trigger(clouds[i], spec)) == trigger_template.target) ++hits;
    }
    result.hits[c] = hits;
  });
  // Reduce by candidate index so ties resolve to the first occurrence.
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (result.hits[c] > result.hits[result.best_index]) result.best_index = c;
  }
  result.center = candidates[result.best_index];
  return result;
}

}  // namespace cloudfort
