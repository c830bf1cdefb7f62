#include "cloudfort/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>

#include "cloudfort/error.hpp"
#include "cloudfort/io.hpp"
#include "cloudfort/parallel.hpp"
#include "cloudfort/remote.hpp"

namespace cloudfort {

using nlohmann::json;

double MetricFragment::percent() const {
  if (total == 0) throw invalid_input("metric over an empty set");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

std::string MetricFragment::formatted() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", percent());
  return buf;
}

namespace {

void require_triggered(const Dataset& set, const char* metric) {
  if (set.empty()) throw invalid_input(std::string(metric) + " needs a non-empty triggered set");
  for (const auto& s : set) {
    if (!s.triggered || !s.source || !s.target)
      throw invalid_input(std::string(metric) + ": sample '" + s.cloud.id.value_or("<no id>") +
                          "' lacks trigger metadata");
  }
}

void require_predictions(const Dataset& set, std::span<const Label> predictions) {
  if (set.size() != predictions.size()) throw invalid_input("prediction count does not match the sample count");
}

std::vector<Label> predict_all(const Dataset& set, const Predictor& predict) {
  std::vector<Label> out;
  out.reserve(set.size());
  for (const auto& s : set) out.push_back(predict(s));
  return out;
}

}  // namespace

MetricFragment count_asr(const Dataset& triggered, std::span<const Label> predictions) {
  require_triggered(triggered, "ASR");
  require_predictions(triggered, predictions);
  MetricFragment f{0, triggered.size()};
  for (std::size_t i = 0; i < triggered.size(); ++i) f.hits += predictions[i] == *triggered[i].target;
  return f;
}

MetricFragment count_acc(const Dataset& clean, std::span<const Label> predictions) {
  if (clean.empty()) throw invalid_input("ACC needs a non-empty clean set");
  require_predictions(clean, predictions);
  MetricFragment f{0, clean.size()};
  for (std::size_t i = 0; i < clean.size(); ++i) f.hits += predictions[i] == clean[i].label();
  return f;
}

MetricFragment count_sia(const Dataset& triggered, std::span<const Label> predictions) {
  require_triggered(triggered, "SIA");
  require_predictions(triggered, predictions);
  MetricFragment f{0, triggered.size()};
  for (std::size_t i = 0; i < triggered.size(); ++i) f.hits += predictions[i] == *triggered[i].source;
  return f;
}

MetricFragment eval_asr(const Dataset& triggered, const Predictor& predict) {
  require_triggered(triggered, "ASR");
  return count_asr(triggered, predict_all(triggered, predict));
}

MetricFragment eval_acc(const Dataset& clean, const Predictor& predict) {
  if (clean.empty()) throw invalid_input("ACC needs a non-empty clean set");
  return count_acc(clean, predict_all(clean, predict));
}

MetricFragment eval_sia(const Dataset& triggered, const Predictor& predict) {
  require_triggered(triggered, "SIA");
  return count_sia(triggered, predict_all(triggered, predict));
}

json verdict_to_json(const DefenseVerdict& v) {
  json matrix = json::array();
  json fallback = json::array();
  for (std::size_t j = 0; j < v.matrix.rows(); ++j) {
    matrix.push_back(json(std::vector<std::string>(v.matrix.labels[j].begin(), v.matrix.labels[j].end())));
    fallback.push_back(json(std::vector<bool>(v.matrix.fallback[j].begin(), v.matrix.fallback[j].end())));
  }
  json counts = json::object();
  for (const auto& [label, n] : v.stats.counts) counts[label] = n;
  return json{
      {"trigger_present", v.trigger_present},
      {"y_true", v.y_true},
      {"full_cloud_label", v.full_cloud_label},
      {"ablation", v.ablation},
      {"branch", to_string(v.branch)},
      {"gamma", v.stats.gamma},
      {"delta", v.stats.delta},
      {"counts", counts},
      {"strategies", v.matrix.strategies},
      {"matrix", matrix},
      {"fallback", fallback},
  };
}

std::string reports_to_csv(const std::vector<MetricReport>& reports) {
  std::string out = "scenario,model,mode,metric,value,hits,total\n";
  auto row = [&](const MetricReport& r, const char* metric, const std::optional<MetricFragment>& f) {
    if (!f) return;
    out += r.scenario + "," + r.model + "," + to_string(r.mode) + "," + metric + "," + f->formatted() + "," +
           std::to_string(f->hits) + "," + std::to_string(f->total) + "\n";
  };
  for (const auto& r : reports) {
    row(r, "ASR", r.asr);
    row(r, "ACC", r.acc);
    row(r, "SIA", r.sia);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Dataset filter_classes(Dataset set, const std::vector<std::string>& classes) {
  if (classes.empty()) return set;
  std::erase_if(set, [&](const Sample& s) {
    return std::find(classes.begin(), classes.end(), s.label()) == classes.end();
  });
  return set;
}

std::vector<ShapeKind> shape_kinds(const std::vector<std::string>& names) {
  std::vector<ShapeKind> out;
  for (const auto& n : names) out.push_back(parse_shape_kind(n));
  return out;
}

}  // namespace

ExperimentSplits prepare_splits(const ExperimentConfig& config) {
  const auto& d = config.dataset;
  ExperimentSplits splits;
  Dataset source_pool;
  if (d.source == "synthetic") {
    const auto kinds = shape_kinds(d.classes);
    if (d.train_per_class > 0)
      splits.train = generate_shape_dataset(kinds, d.train_per_class, d.points, derive_seed(d.seed, 1));
    splits.clean_test = generate_shape_dataset(kinds, d.test_per_class, d.points, derive_seed(d.seed, 2));
    if (config.attack.enabled) {
      source_pool = generate_shape_dataset({parse_shape_kind(config.attack.trigger.source)},
                                           config.attack.triggered_test_count, d.points, derive_seed(d.seed, 3));
    }
  } else {
    const auto manifest = read_manifest(d.manifest);
    splits.train = filter_classes(load_split(manifest, "train", d.points, derive_seed(d.seed, 1), d.normalize), d.classes);
    splits.clean_test = filter_classes(load_split(manifest, "test", d.points, derive_seed(d.seed, 2), d.normalize), d.classes);
    if (config.attack.enabled) {
      for (const auto& s : splits.clean_test) {
        if (s.label() == config.attack.trigger.source && source_pool.size() < config.attack.triggered_test_count)
          source_pool.push_back(s);
      }
    }
  }
  if (splits.clean_test.empty()) throw invalid_input("the clean test split is empty");

  if (d.augment_rotate || d.augment_jitter) {
    for (std::size_t i = 0; i < splits.train.size(); ++i) {
      Rng rng(derive_seed(derive_seed(d.seed, 4), i));
      auto& cloud = splits.train[i].cloud;
      if (d.augment_rotate) cloud = augment_rotate(cloud, rng);
      if (d.augment_jitter) cloud = augment_jitter(cloud, rng);
    }
  }

  if (config.attack.enabled) {
    const auto& a = config.attack;
    const bool trains = config.classifier.kind == "centroid" && !config.classifier.model_path;
    if (trains) {
      PoisonPlan plan{a.trigger, a.poison_count, a.poison_fraction, PoisonMode::Train, a.poison_seed};
      splits.train = poison_dataset(splits.train, plan);
    }
    if (source_pool.empty())
      throw invalid_input("no source-class test samples of '" + a.trigger.source + "' to trigger");
    PoisonPlan test_plan{a.trigger, source_pool.size(), std::nullopt, PoisonMode::Test, a.poison_seed};
    TriggerSpec test_trigger = a.trigger;
    test_trigger.seed = derive_seed(a.trigger.seed, 0x7e57);
    test_plan.trigger = test_trigger;
    splits.triggered_test = poison_dataset(source_pool, test_plan);
  }
  return splits;
}

ClassifierHandle build_classifier(const ExperimentConfig& config, const Dataset* train) {
  const auto& k = config.classifier;
  if (k.kind == "synthetic") {
    SyntheticBackdoorConfig s;
    s.source = k.source.value_or(config.attack.trigger.source);
    s.target = k.target.value_or(config.attack.trigger.target);
    s.trigger_center = k.trigger_center.value_or(config.attack.trigger.center);
    s.trigger_radius = k.trigger_radius.value_or(config.attack.trigger.radius);
    s.min_trigger_points = k.min_trigger_points;
    s.clean_labels = k.clean_labels;
    s.default_label = k.default_label;
    s.faults = k.faults;
    return std::make_shared<SyntheticBackdoorClassifier>(std::move(s));
  }
  if (k.kind == "centroid") {
    if (k.model_path) return std::make_shared<CentroidClassifier>(CentroidModel::load(*k.model_path));
    if (train == nullptr || train->empty())
      throw invalid_input("centroid classifier needs classifier.model_path or a training split");
    std::vector<LabeledCloud> data;
    data.reserve(train->size());
    for (const auto& s : *train) data.push_back({s.cloud, s.label()});
    auto model = train_centroid(data, k.grid);
    if (k.save_model) model.save(*k.save_model);
    return std::make_shared<CentroidClassifier>(std::move(model));
  }
  std::string endpoint;
  if (k.endpoint) {
    endpoint = *k.endpoint;
  } else if (const char* env = std::getenv(kEndpointEnvVar); env != nullptr && *env != '\0') {
    endpoint = env;
  } else {
    throw invalid_input(std::string("remote classifier needs classifier.endpoint or $") + kEndpointEnvVar);
  }
  return std::make_shared<RemoteClassifier>(Endpoint::parse(endpoint), std::chrono::milliseconds(k.timeout_ms));
}

StrategySet strategies_for(EvalMode mode, const DefenseConfig& defense) {
  const auto policy = defense.fixed_origin ? OriginPolicy::Fixed : OriginPolicy::CloudCentroid;
  std::vector<PartitionStrategy> strategies =
      mode == EvalMode::Ablation ? StrategySet::ablation(policy).strategies() : StrategySet::canonical(policy).strategies();
  if (defense.fixed_origin) {
    for (auto& s : strategies) s.fixed_origin = *defense.fixed_origin;
  }
  return StrategySet(std::move(strategies));
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const auto splits = prepare_splits(config);
  const auto handle = build_classifier(config, &splits.train);
  const unsigned jobs = handle->concurrent_safe() ? config.defense.jobs : 1;
  const bool attack = config.attack.enabled;

  auto input_cloud = [&](const Sample& s) {
    return config.defense.normalize_input ? normalize_cloud(s.cloud) : s.cloud;
  };

  ExperimentResult result;
  result.clean_samples = splits.clean_test.size();
  result.triggered_samples = splits.triggered_test.size();

  auto flush_partial = [&] {
    if (!config.output.csv.empty()) write_text_file(config.output.csv, reports_to_csv(result.reports));
    if (!config.output.verdicts.empty()) write_text_file(config.output.verdicts, result.verdict_log);
  };

  for (const auto mode : config.defense.modes) try {
    struct Outcome {
      Label prediction;
      std::optional<DefenseVerdict> verdict;
    };
    auto run_set = [&](const Dataset& set) {
      std::vector<Outcome> outcomes(set.size());
      const std::optional<StrategySet> strategies =
          mode == EvalMode::Undefended ? std::nullopt : std::optional(strategies_for(mode, config.defense));
      DefenseOptions options{config.defense.rule, 1};
      parallel_for(set.size(), jobs, [&](std::size_t i) {
        const auto cloud = input_cloud(set[i]);
        if (!strategies) {
          outcomes[i].prediction = classify(handle, cloud);
        } else {
          auto v = defend(cloud, handle, *strategies, options);
          outcomes[i].prediction = v.y_true;
          outcomes[i].verdict = std::move(v);
        }
      });
      return outcomes;
    };
    auto log_set = [&](const char* set_name, const Dataset& set, const std::vector<Outcome>& outcomes) {
      for (std::size_t i = 0; i < set.size(); ++i) {
        json line{{"scenario", config.output.scenario},
                  {"mode", to_string(mode)},
                  {"set", set_name},
                  {"index", i},
                  {"id", set[i].cloud.id.value_or("")},
                  {"label", set[i].label()},
                  {"triggered", set[i].triggered},
                  {"prediction", outcomes[i].prediction}};
        if (outcomes[i].verdict) line["verdict"] = verdict_to_json(*outcomes[i].verdict);
        result.verdict_log += line.dump() + "\n";
      }
    };
    auto predictions_of = [](const std::vector<Outcome>& outcomes) {
      std::vector<Label> p;
      p.reserve(outcomes.size());
      for (const auto& o : outcomes) p.push_back(o.prediction);
      return p;
    };

    MetricReport report{config.output.scenario, handle->descriptor().name, mode, {}, {}, {}};

    const auto clean_outcomes = run_set(splits.clean_test);
    const auto clean_predictions = predictions_of(clean_outcomes);
    report.acc = count_acc(splits.clean_test, clean_predictions);
    log_set("clean", splits.clean_test, clean_outcomes);

    std::vector<Label> triggered_predictions;
    if (attack) {
      const auto triggered_outcomes = run_set(splits.triggered_test);
      triggered_predictions = predictions_of(triggered_outcomes);
      report.asr = count_asr(splits.triggered_test, triggered_predictions);
      report.sia = count_sia(splits.triggered_test, triggered_predictions);
      log_set("triggered", splits.triggered_test, triggered_outcomes);
    }

    // Self-check: recount from the raw predictions without the metric helpers.
    std::size_t acc_hits = 0, asr_hits = 0, sia_hits = 0;
    for (std::size_t i = 0; i < clean_predictions.size(); ++i)
      if (clean_predictions[i] == *splits.clean_test[i].cloud.label) ++acc_hits;
    for (std::size_t i = 0; i < triggered_predictions.size(); ++i) {
      if (triggered_predictions[i] == *splits.triggered_test[i].target) ++asr_hits;
      if (triggered_predictions[i] == *splits.triggered_test[i].source) ++sia_hits;
    }
    if (acc_hits != report.acc->hits || (attack && (asr_hits != report.asr->hits || sia_hits != report.sia->hits)))
      throw Error(ErrorKind::Internal, std::string("metric self-check failed in mode ") + to_string(mode));

    result.reports.push_back(std::move(report));
  } catch (const Error& e) {
    flush_partial();
    throw Error(e.kind(), std::string("mode ") + to_string(mode) + ": " + e.what());
  }

  result.csv = reports_to_csv(result.reports);
  if (!config.output.csv.empty()) write_text_file(config.output.csv, result.csv);
  if (!config.output.verdicts.empty()) write_text_file(config.output.verdicts, result.verdict_log);
  return result;
}

}  // namespace cloudfort
