#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cloudfort/classifier.hpp"
#include "cloudfort/partition.hpp"

namespace cloudfort {

/// Labels of the k × 8 sub-cloud predictions. Row j follows the strategy
/// order; column i is the sub-cloud with region R_{i+1} excluded.
struct PredictionMatrix {
  using Row = std::array<Label, OctantCode::kCount>;
  using FlagRow = std::array<bool, OctantCode::kCount>;

  std::vector<std::string> strategies;
  std::vector<Row> labels;
  std::vector<FlagRow> fallback;  // cell was an empty sub-cloud, full-cloud label used

  std::size_t rows() const noexcept { return labels.size(); }
  const Label& at(std::size_t row, std::size_t col) const { return labels.at(row).at(col); }

  /// Matrix with no fallback cells. Throws if `rows` is empty.
  static PredictionMatrix from_rows(std::vector<Row> rows, std::vector<std::string> strategies = {});
};

struct MatrixStats {
  std::vector<std::set<Label>> row_labels;  // C_SP per row
  int gamma = 0;                            // rows with >= 2 distinct labels
  int delta = 0;                            // distinct labels across all rows
  std::map<Label, int> counts;              // CNT
};

/// Thresholds of the relaxed trigger-presence rule. Defaults are the
/// published values:
///   γ <= 2             -> absent
///   γ = 3, δ >= 4      -> absent       γ = 3, δ < 4 -> present
///   γ = 4, δ >= 5      -> absent       γ = 4, δ < 5 -> present
struct TriggerRule {
  int gamma_partial = 3;
  int gamma_full = 4;
  int delta_limit_partial = 4;
  int delta_limit_full = 5;
};

/// Which branch of the presence rule produced the verdict.
enum class RuleBranch {
  Consistent,         // γ below the partial threshold
  PartialDiverse,     // γ = 3, δ >= 4: absorbed as partitioning artifacts
  FullDiverse,        // γ = 4, δ >= 5: absorbed as partitioning artifacts
  PartialTrigger,     // γ = 3, δ < 4
  FullTrigger,        // γ = 4, δ < 5
  AblationUniform,    // single strategy, 8:0 row
  AblationDichotomy,  // single strategy, 7:1 row
  AblationRuleGap     // single strategy, any other split; majority fallback
};

const char* to_string(RuleBranch branch) noexcept;

struct RuleOutcome {
  bool trigger_present = false;
  RuleBranch branch = RuleBranch::Consistent;
};

/// Fills every cell by classifying the sub-clouds; cells whose sub-cloud is
/// empty take the full-cloud label and are flagged. Classifier failures are
/// rethrown with the (strategy, region) of the failing cell.
PredictionMatrix build_matrix(const std::vector<SubCloudGroup>& groups, const ClassifierHandle& handle,
                              const PointCloud& full_cloud, unsigned jobs = 1);

MatrixStats matrix_stats(const PredictionMatrix& matrix);

/// k = 4: the relaxed γ/δ rule. k = 1: the single-strategy dichotomy rule
/// (present iff the row splits exactly 7:1). Other k are rejected.
RuleOutcome evaluate_rule(const MatrixStats& stats, std::size_t k, const TriggerRule& rule = {});

bool trigger_presence(const MatrixStats& stats, std::size_t k, const TriggerRule& rule = {});

/// Decision function. No trigger: the full-cloud label. Trigger: the label
/// minimizing |CNT(y) − 4|, ties to the smaller count, then lexicographic.
Label decide(const PredictionMatrix& matrix, const MatrixStats& stats, bool trigger_present,
             const Label& full_cloud_label);

/// Most frequent label of a single-row matrix, ties lexicographic.
Label majority_label(const MatrixStats& stats);

struct DefenseOptions {
  TriggerRule rule;
  unsigned jobs = 1;
};

struct DefenseVerdict {
  bool trigger_present = false;
  Label y_true;
  Label full_cloud_label;
  PredictionMatrix matrix;
  MatrixStats stats;
  RuleBranch branch = RuleBranch::Consistent;
  bool ablation = false;
};

/// Full pipeline: partition under every strategy, classify, test for a
/// trigger, decide. A one-strategy set runs the ablation rules; sets of any
/// size other than 1 or 4 are rejected.
DefenseVerdict defend(const PointCloud& cloud, const ClassifierHandle& handle, const StrategySet& strategies,
                      const DefenseOptions& options = {});

/// defend() with {SP1} only. Trigger present iff the row splits 7:1, then
/// the singleton label; otherwise the majority label.
DefenseVerdict defend_ablation(const PointCloud& cloud, const ClassifierHandle& handle,
                               const DefenseOptions& options = {});

}  // namespace cloudfort
