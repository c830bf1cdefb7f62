#include "cloudfort/defense.hpp"

#include <algorithm>
#include <cstdlib>

#include "cloudfort/error.hpp"
#include "cloudfort/parallel.hpp"

namespace cloudfort {

const char* to_string(RuleBranch branch) noexcept {
  switch (branch) {
    case RuleBranch::Consistent: return "consistent";
    case RuleBranch::PartialDiverse: return "partial-diverse";
    case RuleBranch::FullDiverse: return "full-diverse";
    case RuleBranch::PartialTrigger: return "partial-trigger";
    case RuleBranch::FullTrigger: return "full-trigger";
    case RuleBranch::AblationUniform: return "ablation-uniform";
    case RuleBranch::AblationDichotomy: return "ablation-dichotomy";
    case RuleBranch::AblationRuleGap: return "ablation-rule-gap";
  }
  return "unknown";
}

PredictionMatrix PredictionMatrix::from_rows(std::vector<Row> rows, std::vector<std::string> strategies) {
  if (rows.empty()) throw invalid_input("prediction matrix needs at least one row");
  if (strategies.empty()) {
    for (std::size_t j = 0; j < rows.size(); ++j) strategies.push_back("SP" + std::to_string(j + 1));
  }
  if (strategies.size() != rows.size()) throw invalid_input("strategy names do not match matrix rows");
  PredictionMatrix m;
  m.strategies = std::move(strategies);
  m.fallback.assign(rows.size(), FlagRow{});
  m.labels = std::move(rows);
  return m;
}

PredictionMatrix build_matrix(const std::vector<SubCloudGroup>& groups, const ClassifierHandle& handle,
                              const PointCloud& full_cloud, unsigned jobs) {
  if (groups.empty()) throw invalid_input("build_matrix needs at least one group");
  if (!handle) throw invalid_input("classifier handle is null");

  PredictionMatrix m;
  m.labels.resize(groups.size());
  m.fallback.resize(groups.size());
  for (const auto& g : groups) m.strategies.push_back(g.strategy.name);

  const bool any_empty = std::any_of(groups.begin(), groups.end(), [](const SubCloudGroup& g) {
    return std::any_of(g.empty_flags.begin(), g.empty_flags.end(), [](bool f) { return f; });
  });
  Label full_label;
  if (any_empty) full_label = classify(handle, full_cloud);

  constexpr auto kCols = static_cast<std::size_t>(OctantCode::kCount);
  const std::size_t cells = groups.size() * kCols;
  const unsigned effective_jobs = handle->concurrent_safe() ? jobs : 1;
  parallel_for(cells, effective_jobs, [&](std::size_t cell) {
    const std::size_t j = cell / kCols;
    const std::size_t i = cell % kCols;
    const auto& group = groups[j];
    if (group.empty_flags[i]) {
      m.labels[j][i] = full_label;
      m.fallback[j][i] = true;
      return;
    }
    const CallContext context{group.strategy.name, static_cast<int>(i) + 1};
    try {
      m.labels[j][i] = classify(handle, group.sub_clouds[i], context);
    } catch (const Error& e) {
      throw Error(e.kind(), "classifying sub-cloud (" + group.strategy.name + ", R" + std::to_string(i + 1) +
                                "): " + e.what());
    }
  });
  return m;
}

MatrixStats matrix_stats(const PredictionMatrix& matrix) {
  MatrixStats s;
  std::set<Label> all;
  for (const auto& row : matrix.labels) {
    std::set<Label> unique(row.begin(), row.end());
    if (unique.size() >= 2) ++s.gamma;
    all.insert(unique.begin(), unique.end());
    s.row_labels.push_back(std::move(unique));
    for (const auto& label : row) ++s.counts[label];
  }
  s.delta = static_cast<int>(all.size());
  return s;
}

RuleOutcome evaluate_rule(const MatrixStats& stats, std::size_t k, const TriggerRule& rule) {
  if (k == 1) {
    if (stats.counts.size() == 1) return {false, RuleBranch::AblationUniform};
    if (stats.counts.size() == 2) {
      const auto a = stats.counts.begin()->second;
      const auto b = std::next(stats.counts.begin())->second;
      if (std::min(a, b) == 1 && std::max(a, b) == 7) return {true, RuleBranch::AblationDichotomy};
    }
    return {false, RuleBranch::AblationRuleGap};
  }
  if (k != 4)
    throw invalid_input("the trigger-presence rule is defined for 4 strategies (or 1 in ablation), got " +
                        std::to_string(k));
  if (stats.gamma >= rule.gamma_full) {
    return stats.delta < rule.delta_limit_full ? RuleOutcome{true, RuleBranch::FullTrigger}
                                               : RuleOutcome{false, RuleBranch::FullDiverse};
  }
  if (stats.gamma >= rule.gamma_partial) {
    return stats.delta < rule.delta_limit_partial ? RuleOutcome{true, RuleBranch::PartialTrigger}
                                                  : RuleOutcome{false, RuleBranch::PartialDiverse};
  }
  return {false, RuleBranch::Consistent};
}

bool trigger_presence(const MatrixStats& stats, std::size_t k, const TriggerRule& rule) {
  return evaluate_rule(stats, k, rule).trigger_present;
}

Label decide(const PredictionMatrix& matrix, const MatrixStats& stats, bool trigger_present,
             const Label& full_cloud_label) {
  if (!trigger_present) return full_cloud_label;
  if (stats.counts.empty() || matrix.rows() == 0) throw invalid_input("decide needs a non-empty matrix");
  // counts is ordered by label, so strict comparison keeps the lexicographic tie-break.
  const Label* best = nullptr;
  int best_distance = 0;
  int best_count = 0;
  for (const auto& [label, count] : stats.counts) {
    const int distance = std::abs(count - 4);
    if (best == nullptr || distance < best_distance || (distance == best_distance && count < best_count)) {
      best = &label;
      best_distance = distance;
      best_count = count;
    }
  }
  return *best;
}

Label majority_label(const MatrixStats& stats) {
  if (stats.counts.empty()) throw invalid_input("majority of an empty matrix");
  auto best = stats.counts.begin();
  for (auto it = stats.counts.begin(); it != stats.counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

DefenseVerdict defend(const PointCloud& cloud, const ClassifierHandle& handle, const StrategySet& strategies,
                      const DefenseOptions& options) {
  if (cloud.empty()) throw invalid_input("cannot defend an empty cloud");
  const std::size_t k = strategies.size();
  if (k != 1 && k != 4)
    throw invalid_input("defense supports 4 strategies (or 1 in ablation mode), got " + std::to_string(k));

  DefenseVerdict v;
  v.ablation = k == 1;
  try {
    v.full_cloud_label = classify(handle, cloud);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("classifying full cloud: ") + e.what());
  }
  const auto groups = partition_all(cloud, strategies, options.jobs);
  v.matrix = build_matrix(groups, handle, cloud, options.jobs);
  v.stats = matrix_stats(v.matrix);
  const auto outcome = evaluate_rule(v.stats, k, options.rule);
  v.trigger_present = outcome.trigger_present;
  v.branch = outcome.branch;
  if (v.ablation && !v.trigger_present) {
    v.y_true = majority_label(v.stats);
  } else {
    // With a 7:1 row both labels sit at distance 3 from 4 and the
    // smaller-count tie-break picks the singleton.
    v.y_true = decide(v.matrix, v.stats, v.trigger_present, v.full_cloud_label);
  }
  return v;
}

DefenseVerdict defend_ablation(const PointCloud& cloud, const ClassifierHandle& handle,
                               const DefenseOptions& options) {
  return defend(cloud, handle, StrategySet::ablation(), options);
}

}  // namespace cloudfort
