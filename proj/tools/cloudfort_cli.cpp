// cloudfort: partition, inject, train-centroid, defend, evaluate.
//
// Machine-readable output goes to stdout as JSON; diagnostics go to stderr.
// Exit codes: 0 success, 1 internal error, 2 invalid input, 3 classifier failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cloudfort/attack.hpp"
#include "cloudfort/config.hpp"
#include "cloudfort/defense.hpp"
#include "cloudfort/error.hpp"
#include "cloudfort/evaluation.hpp"
#include "cloudfort/io.hpp"
#include "cloudfort/remote.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cloudfort;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return 2;
    case ErrorKind::ClassifierFailure: return 3;
    case ErrorKind::Internal: break;
  }
  return 1;
}

Point3 parse_point(const std::string& text, const char* flag) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw invalid_input(std::string(flag) + " expects x,y,z, got '" + text + "'");
    }
  }
  if (v.size() != 3) throw invalid_input(std::string(flag) + " expects x,y,z, got '" + text + "'");
  return {v[0], v[1], v[2]};
}

PointCloud read_input_cloud(const std::string& path) {
  auto cloud = read_xyz(path);
  if (cloud.empty()) throw invalid_input("input cloud has no points: " + path);
  return cloud;
}

void note(const std::string& message) { std::cerr << "cloudfort: " << message << "\n"; }

// ---------------------------------------------------------------------------

struct PartitionArgs {
  std::string input;
  std::string strategy = "SP1";
  std::string out_dir;
  std::string origin = "centroid";
};

int run_partition(const PartitionArgs& a) {
  const auto cloud = read_input_cloud(a.input);
  const auto canonical = StrategySet::canonical();
  const PartitionStrategy* chosen = nullptr;
  for (const auto& s : canonical.strategies())
    if (s.name == a.strategy) chosen = &s;
  if (chosen == nullptr) throw invalid_input("unknown strategy '" + a.strategy + "' (expected SP1..SP4)");
  PartitionStrategy strategy = *chosen;
  if (a.origin != "centroid") {
    strategy.origin_policy = OriginPolicy::Fixed;
    strategy.fixed_origin = parse_point(a.origin, "--origin");
  }

  const auto group = partition(cloud, strategy);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw invalid_input("cannot create output directory " + a.out_dir + ": " + ec.message());

  json files = json::array();
  for (int i = 0; i < OctantCode::kCount; ++i) {
    const auto path = (fs::path(a.out_dir) / ("sub_" + strategy.name + "_" + std::to_string(i + 1) + ".xyz")).string();
    write_xyz(path, group.sub_clouds[i]);
    files.push_back(path);
  }
  json summary{{"strategy", strategy.name},
               {"input_points", cloud.size()},
               {"origin", {group.origin.x, group.origin.y, group.origin.z}},
               {"files", files},
               {"sub_cloud_points", json::array()},
               {"excluded_points", json::array()},
               {"empty", json::array()}};
  for (int i = 0; i < OctantCode::kCount; ++i) {
    summary["sub_cloud_points"].push_back(group.sub_clouds[i].size());
    summary["excluded_points"].push_back(group.excluded_counts[i]);
    summary["empty"].push_back(group.empty_flags[i]);
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct InjectArgs {
  std::string input;
  std::string output;
  std::string center;
  std::size_t points = 32;
  double radius = 0.05;
  std::uint64_t seed = 0;
};

int run_inject(const InjectArgs& a) {
  const auto cloud = read_input_cloud(a.input);
  TriggerSpec trigger;
  trigger.points = a.points;
  trigger.radius = a.radius;
  trigger.center = parse_point(a.center, "--center");
  trigger.seed = a.seed;
  const auto out = inject_trigger(cloud, trigger);
  write_xyz(a.output, out);
  std::cout << json{{"input_points", cloud.size()}, {"output_points", out.size()}, {"output", a.output}}.dump(2)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::string output;
  int grid = 4;
  std::size_t points = 1024;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
  std::vector<LabeledCloud> data;
  int grid = a.grid;
  if (!a.config.empty()) {
    auto config = load_config(a.config);
    if (config.classifier.kind != "centroid") throw invalid_input("config classifier.kind must be 'centroid'");
    config.classifier.model_path.reset();
    grid = config.classifier.grid;
    for (const auto& s : prepare_splits(config).train) data.push_back({s.cloud, s.label()});
  } else {
    const auto manifest = read_manifest(a.manifest);
    for (const auto& s : load_split(manifest, "train", a.points, a.seed, true)) data.push_back({s.cloud, s.label()});
  }
  const auto model = train_centroid(data, grid);
  model.save(a.output);
  std::cout << json{{"model", a.output}, {"grid", model.grid()}, {"classes", model.alphabet()},
                    {"samples", data.size()}}.dump(2)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ClassifierOverrides {
  std::string endpoint;
  std::string model;
  unsigned jobs = 0;
};

void apply_overrides(ExperimentConfig& config, const ClassifierOverrides& o) {
  if (!o.endpoint.empty()) {
    note("override: classifier.kind=remote, classifier.endpoint=" + o.endpoint);
    config.classifier.kind = "remote";
    config.classifier.endpoint = o.endpoint;
  }
  if (!o.model.empty()) {
    note("override: classifier.kind=centroid, classifier.model_path=" + o.model);
    config.classifier.kind = "centroid";
    config.classifier.model_path = o.model;
  }
  if (o.jobs > 0) {
    note("override: defense.jobs=" + std::to_string(o.jobs));
    config.defense.jobs = o.jobs;
  }
}

struct DefendArgs {
  std::string input;
  std::string config;
  bool ablation = false;
  std::string label;
  std::string id;
  ClassifierOverrides overrides;
};

int run_defend(const DefendArgs& a) {
  auto config = load_config(a.config);
  apply_overrides(config, a.overrides);
  validate_config(config);

  auto cloud = read_input_cloud(a.input);
  if (!a.label.empty()) cloud.label = a.label;
  cloud.id = a.id.empty() ? fs::path(a.input).stem().string() : a.id;
  if (config.defense.normalize_input) cloud = normalize_cloud(cloud);

  ClassifierHandle handle;
  if (config.classifier.kind == "centroid" && !config.classifier.model_path) {
    const auto splits = prepare_splits(config);
    handle = build_classifier(config, &splits.train);
  } else {
    handle = build_classifier(config, nullptr);
  }

  const auto mode = a.ablation ? EvalMode::Ablation : EvalMode::CloudFort;
  const auto verdict =
      defend(cloud, handle, strategies_for(mode, config.defense), DefenseOptions{config.defense.rule, config.defense.jobs});
  auto record = verdict_to_json(verdict);
  record["input"] = a.input;
  record["mode"] = to_string(mode);
  std::cout << record.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string config;
  std::string modes;
  std::string csv;
  std::string verdicts;
  std::optional<std::uint64_t> seed;
  ClassifierOverrides overrides;
};

int run_evaluate(const EvaluateArgs& a) {
  auto config = load_config(a.config);
  apply_overrides(config, a.overrides);
  if (!a.modes.empty()) {
    config.defense.modes.clear();
    std::stringstream ss(a.modes);
    std::string m;
    while (std::getline(ss, m, ',')) config.defense.modes.push_back(parse_eval_mode(m));
    note("override: defense.modes=" + a.modes);
  }
  if (!a.csv.empty()) {
    config.output.csv = a.csv;
    note("override: output.csv=" + a.csv);
  }
  if (!a.verdicts.empty()) {
    config.output.verdicts = a.verdicts;
    note("override: output.verdicts=" + a.verdicts);
  }
  if (a.seed) {
    config.dataset.seed = *a.seed;
    note("override: dataset.seed=" + std::to_string(*a.seed));
  }
  validate_config(config);

  const auto result = run_experiment(config);
  std::cerr << result.csv;
  json out{{"csv", config.output.csv.empty() ? json(nullptr) : json(config.output.csv)},
           {"verdicts", config.output.verdicts.empty() ? json(nullptr) : json(config.output.verdicts)},
           {"clean_samples", result.clean_samples},
           {"triggered_samples", result.triggered_samples},
           {"reports", json::array()}};
  for (const auto& r : result.reports) {
    json rep{{"scenario", r.scenario}, {"model", r.model}, {"mode", to_string(r.mode)}};
    if (r.asr) rep["ASR"] = r.asr->percent();
    if (r.acc) rep["ACC"] = r.acc->percent();
    if (r.sia) rep["SIA"] = r.sia->percent();
    out["reports"].push_back(rep);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

void add_classifier_overrides(CLI::App* cmd, ClassifierOverrides& o) {
  cmd->add_option("--endpoint", o.endpoint,
                  "Use an external classifier (stdio:<cmd> or tcp:<host>:<port>); defaults to $" +
                      std::string(kEndpointEnvVar) + " when the config names a remote classifier");
  cmd->add_option("--model", o.model, "Use a saved nearest-centroid model file");
  cmd->add_option("--jobs", o.jobs, "Worker threads (output is identical for any value)")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CloudFort: spatial-partitioning ensemble defense against point-cloud backdoors"};
  app.require_subcommand(1);

  PartitionArgs partition_args;
  auto* partition_cmd = app.add_subcommand("partition", "Write the eight sub-clouds of one partitioning strategy");
  partition_cmd->add_option("input", partition_args.input, "Input cloud (.xyz)")->required();
  partition_cmd->add_option("--strategy", partition_args.strategy, "SP1, SP2, SP3, or SP4")->capture_default_str();
  partition_cmd->add_option("--out-dir", partition_args.out_dir, "Directory for sub_<strategy>_<i>.xyz")->required();
  partition_cmd->add_option("--origin", partition_args.origin, "'centroid' or x,y,z")->capture_default_str();

  InjectArgs inject_args;
  auto* inject_cmd = app.add_subcommand("inject", "Append a random-sphere trigger cluster to a cloud");
  inject_cmd->add_option("input", inject_args.input, "Input cloud (.xyz)")->required();
  inject_cmd->add_option("--out", inject_args.output, "Output cloud (.xyz)")->required();
  inject_cmd->add_option("--center", inject_args.center, "Trigger center x,y,z")->required();
  inject_cmd->add_option("--points", inject_args.points, "Trigger point count")->capture_default_str()->check(CLI::PositiveNumber);
  inject_cmd->add_option("--radius", inject_args.radius, "Trigger sphere radius")->capture_default_str()->check(CLI::PositiveNumber);
  inject_cmd->add_option("--seed", inject_args.seed, "Sampler seed")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train-centroid", "Train and save a nearest-centroid occupancy model");
  auto* train_config = train_cmd->add_option("--config", train_args.config, "Experiment config (uses its training split)");
  auto* train_manifest = train_cmd->add_option("--manifest", train_args.manifest, "Dataset manifest (train split)");
  train_config->excludes(train_manifest);
  train_cmd->add_option("--out", train_args.output, "Model file to write")->required();
  train_cmd->add_option("--grid", train_args.grid, "Grid resolution (with --manifest)")->capture_default_str()->check(CLI::Range(1, 64));
  train_cmd->add_option("--points", train_args.points, "Points sampled per mesh (with --manifest)")->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed, "Mesh sampling seed (with --manifest)")->capture_default_str();

  DefendArgs defend_args;
  auto* defend_cmd = app.add_subcommand("defend", "Run the defense on one cloud and print the verdict as JSON");
  defend_cmd->add_option("input", defend_args.input, "Input cloud (.xyz)")->required();
  defend_cmd->add_option("--config", defend_args.config, "Experiment config (classifier, rule, origin)")->required();
  defend_cmd->add_flag("--ablation", defend_args.ablation, "Single strategy with the simplified 8:0 / 7:1 rules");
  defend_cmd->add_option("--label", defend_args.label, "Ground-truth label metadata for the cloud");
  defend_cmd->add_option("--id", defend_args.id, "Sample id metadata (default: file stem)");
  add_classifier_overrides(defend_cmd, defend_args.overrides);

  EvaluateArgs evaluate_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Run an experiment and write CSV metrics and a JSONL verdict log");
  evaluate_cmd->add_option("--config", evaluate_args.config, "Experiment config")->required();
  evaluate_cmd->add_option("--modes", evaluate_args.modes, "Comma-separated subset of undefended,cloudfort,ablation");
  evaluate_cmd->add_option("--csv", evaluate_args.csv, "Metrics CSV path");
  evaluate_cmd->add_option("--verdicts", evaluate_args.verdicts, "JSON-lines verdict log path");
  evaluate_cmd->add_option("--seed", evaluate_args.seed, "Override dataset.seed");
  add_classifier_overrides(evaluate_cmd, evaluate_args.overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*partition_cmd) return run_partition(partition_args);
    if (*inject_cmd) return run_inject(inject_args);
    if (*train_cmd) {
      if (train_args.config.empty() && train_args.manifest.empty())
        throw invalid_input("train-centroid needs --config or --manifest");
      return run_train(train_args);
    }
    if (*defend_cmd) return run_defend(defend_args);
    if (*evaluate_cmd) return run_evaluate(evaluate_args);
  } catch (const Error& e) {
    note(std::string("error: ") + e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    note(std::string("internal error: ") + e.what());
    return 1;
  }
  return 1;
}
