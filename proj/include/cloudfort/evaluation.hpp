#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudfort/attack.hpp"
#include "cloudfort/config.hpp"
#include "cloudfort/defense.hpp"

namespace cloudfort {

struct MetricFragment {
  std::size_t hits = 0;
  std::size_t total = 0;

  /// 100 · hits / total. Throws if total is 0.
  double percent() const;
  /// percent() rounded to one decimal, e.g. "81.3".
  std::string formatted() const;
};

struct MetricReport {
  std::string scenario;
  std::string model;
  EvalMode mode = EvalMode::Undefended;
  std::optional<MetricFragment> asr;
  std::optional<MetricFragment> acc;
  std::optional<MetricFragment> sia;
};

using Predictor = std::function<Label(const Sample&)>;

/// Share of triggered samples predicted as their target class.
MetricFragment eval_asr(const Dataset& triggered, const Predictor& predict);
/// Share of clean samples predicted as their ground-truth label.
MetricFragment eval_acc(const Dataset& clean, const Predictor& predict);
/// Share of triggered samples predicted as their source class.
MetricFragment eval_sia(const Dataset& triggered, const Predictor& predict);

/// The same metrics over predictions already computed, one per sample.
MetricFragment count_asr(const Dataset& triggered, std::span<const Label> predictions);
MetricFragment count_acc(const Dataset& clean, std::span<const Label> predictions);
MetricFragment count_sia(const Dataset& triggered, std::span<const Label> predictions);

/// JSON record of a verdict: matrix, fallback flags, γ, δ, counts, branch.
nlohmann::json verdict_to_json(const DefenseVerdict& verdict);

/// CSV with header "scenario,model,mode,metric,value,hits,total"; one row per
/// reported metric, in mode order then ASR, ACC, SIA.
std::string reports_to_csv(const std::vector<MetricReport>& reports);

struct ExperimentResult {
  std::vector<MetricReport> reports;
  std::string csv;
  std::string verdict_log;  // JSON lines
  std::size_t clean_samples = 0;
  std::size_t triggered_samples = 0;
};

/// Evaluation splits. `train` is already poisoned when the attack is enabled.
struct ExperimentSplits {
  Dataset train;
  Dataset clean_test;
  Dataset triggered_test;  // empty when the attack is disabled
};

ExperimentSplits prepare_splits(const ExperimentConfig& config);

/// Classifier named by the config. A centroid classifier without model_path
/// is trained on `train`, which must then be non-null and non-empty.
ClassifierHandle build_classifier(const ExperimentConfig& config, const Dataset* train);

/// Strategy set for a defended mode, honoring defense.fixed_origin.
StrategySet strategies_for(EvalMode mode, const DefenseConfig& defense);

/// Splits, classifier, and modes as configured. Every metric is re-counted by
/// an independent loop before it is reported; a mismatch is an internal error.
/// Writes output.csv / output.verdicts when set.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace cloudfort
