#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cloudfort/attack.hpp"
#include "cloudfort/classifier.hpp"
#include "cloudfort/defense.hpp"

namespace cloudfort {

enum class EvalMode { Undefended, CloudFort, Ablation };

const char* to_string(EvalMode mode) noexcept;
EvalMode parse_eval_mode(const std::string& name);

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" | "manifest"
  std::vector<std::string> classes;  // shape names, or a manifest class subset
  std::string manifest;
  std::size_t train_per_class = 0;
  std::size_t test_per_class = 0;
  std::size_t points = 1024;
  std::uint64_t seed = 0;
  bool normalize = true;
  bool augment_rotate = false;
  bool augment_jitter = false;
};

struct ClassifierConfig {
  std::string kind;  // "synthetic" | "centroid" | "remote"
  // centroid
  int grid = 4;
  std::optional<std::string> model_path;  // load instead of training
  std::optional<std::string> save_model;  // write the trained model here
  // remote
  std::optional<std::string> endpoint;
  int timeout_ms = 10000;
  // synthetic
  std::optional<Label> source;            // defaults to attack.source
  std::optional<Label> target;            // defaults to attack.target
  std::optional<Point3> trigger_center;   // defaults to the attack trigger center
  std::optional<double> trigger_radius;   // defaults to the attack trigger radius
  std::size_t min_trigger_points = 8;
  std::map<std::string, Label> clean_labels;
  std::optional<Label> default_label;
  std::vector<FaultInjection> faults;
};

struct AttackConfig {
  bool enabled = false;
  TriggerSpec trigger;
  std::optional<std::size_t> poison_count;
  std::optional<double> poison_fraction;
  std::uint64_t poison_seed = 0;
  std::size_t triggered_test_count = 100;
};

struct DefenseConfig {
  std::vector<EvalMode> modes{EvalMode::Undefended, EvalMode::CloudFort};
  TriggerRule rule;
  bool normalize_input = false;
  std::optional<Point3> fixed_origin;  // planes through the cloud centroid when unset
  unsigned jobs = 1;
};

struct OutputConfig {
  std::string scenario = "P1";
  std::string csv;
  std::string verdicts;
};

struct ExperimentConfig {
  std::string name;
  DatasetConfig dataset;
  ClassifierConfig classifier;
  AttackConfig attack;
  DefenseConfig defense;
  OutputConfig output;
};

/// Parses a JSON config document. Unknown keys, missing required keys, and
/// wrong types raise InvalidInput naming the offending key path.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Cross-field checks (seeds present, classes consistent, attack complete).
void validate_config(const ExperimentConfig& config);

}  // namespace cloudfort
