#include "cloudfort/config.hpp"

#include <algorithm>
#include <initializer_list>
#include <set>

#include <json.hpp>

#include "cloudfort/error.hpp"
#include "cloudfort/io.hpp"

namespace cloudfort {

using nlohmann::json;

const char* to_string(EvalMode mode) noexcept {
  switch (mode) {
    case EvalMode::Undefended: return "undefended";
    case EvalMode::CloudFort: return "cloudfort";
    case EvalMode::Ablation: return "ablation";
  }
  return "unknown";
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "undefended") return EvalMode::Undefended;
  if (name == "cloudfort") return EvalMode::CloudFort;
  if (name == "ablation") return EvalMode::Ablation;
  throw invalid_input("unknown mode '" + name + "' (expected undefended, cloudfort, ablation)");
}

namespace {

/// Strict view of one JSON object: every key read is recorded, and finish()
/// rejects anything left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw invalid_input(where() + " must be an object");
  }

  ~Section() = default;

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  T required(const char* key) {
    if (!has(key)) throw invalid_input("missing required config key: " + key_path(key));
    return as<T>(key);
  }

  template <typename T>
  std::optional<T> optional(const char* key) {
    if (!has(key)) return std::nullopt;
    return as<T>(key);
  }

  template <typename T>
  void read(const char* key, T& into) {
    if (auto v = optional<T>(key)) into = std::move(*v);
  }

  Point3 point(const char* key) {
    if (!has(key)) throw invalid_input("missing required config key: " + key_path(key));
    return as_point(key);
  }

  std::optional<Point3> optional_point(const char* key) {
    if (!has(key)) return std::nullopt;
    return as_point(key);
  }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), key_path(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw invalid_input("unknown config key: " + (path_.empty() ? k : path_ + "." + k));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config root" : "config key " + path_; }

  template <typename T>
  T as(const char* key) {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw invalid_input("config key " + key_path(key) + " has the wrong type");
    }
  }

  Point3 as_point(const char* key) {
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); }))
      throw invalid_input("config key " + key_path(key) + " must be an array of 3 numbers");
    Point3 p{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    if (!p.is_finite()) throw invalid_input("config key " + key_path(key) + " must be finite");
    return p;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

DatasetConfig parse_dataset(Section s) {
  DatasetConfig d;
  s.read("source", d.source);
  if (d.source != "synthetic" && d.source != "manifest")
    throw invalid_input("config key dataset.source must be 'synthetic' or 'manifest'");
  s.read("classes", d.classes);
  s.read("manifest", d.manifest);
  s.read("train_per_class", d.train_per_class);
  s.read("test_per_class", d.test_per_class);
  s.read("points", d.points);
  d.seed = s.required<std::uint64_t>("seed");
  s.read("normalize", d.normalize);
  if (s.has("augment")) {
    auto a = s.child("augment");
    a.read("rotate", d.augment_rotate);
    a.read("jitter", d.augment_jitter);
    a.finish();
  }
  s.finish();
  return d;
}

ClassifierConfig parse_classifier(Section s) {
  ClassifierConfig c;
  c.kind = s.required<std::string>("kind");
  if (c.kind != "synthetic" && c.kind != "centroid" && c.kind != "remote")
    throw invalid_input("config key classifier.kind must be 'synthetic', 'centroid', or 'remote'");
  s.read("grid", c.grid);
  c.model_path = s.optional<std::string>("model_path");
  c.save_model = s.optional<std::string>("save_model");
  c.endpoint = s.optional<std::string>("endpoint");
  s.read("timeout_ms", c.timeout_ms);
  if (s.has("synthetic")) {
    auto y = s.child("synthetic");
    c.source = y.optional<std::string>("source");
    c.target = y.optional<std::string>("target");
    c.trigger_center = y.optional_point("trigger_center");
    c.trigger_radius = y.optional<double>("trigger_radius");
    y.read("min_trigger_points", c.min_trigger_points);
    y.read("clean_labels", c.clean_labels);
    c.default_label = y.optional<std::string>("default_label");
    if (y.has("faults")) {
      const auto& faults = y.raw("faults");
      if (!faults.is_array()) throw invalid_input("config key classifier.synthetic.faults must be an array");
      for (std::size_t i = 0; i < faults.size(); ++i) {
        Section f(faults[i], "classifier.synthetic.faults[" + std::to_string(i) + "]");
        c.faults.push_back({f.required<std::string>("strategy"), f.required<int>("region"),
                            f.required<std::string>("label")});
        f.finish();
      }
    }
    y.finish();
  }
  s.finish();
  return c;
}

AttackConfig parse_attack(Section s) {
  AttackConfig a;
  s.read("enabled", a.enabled);
  if (!a.enabled) {
    // Allow a disabled block to keep its settings for later; they are not validated.
    for (const char* k : {"source", "target", "trigger", "poison", "triggered_test_count"}) s.has(k);
    s.finish();
    return a;
  }
  a.trigger.source = s.required<std::string>("source");
  a.trigger.target = s.required<std::string>("target");
  s.read("triggered_test_count", a.triggered_test_count);
  if (!s.has("trigger")) throw invalid_input("missing required config key: attack.trigger");
  {
    auto t = s.child("trigger");
    t.read("points", a.trigger.points);
    t.read("radius", a.trigger.radius);
    a.trigger.center = t.point("center");
    a.trigger.seed = t.required<std::uint64_t>("seed");
    t.finish();
  }
  if (s.has("poison")) {
    auto p = s.child("poison");
    a.poison_count = p.optional<std::size_t>("count");
    a.poison_fraction = p.optional<double>("fraction");
    a.poison_seed = p.required<std::uint64_t>("seed");
    p.finish();
  }
  s.finish();
  a.trigger.validate();
  return a;
}

DefenseConfig parse_defense(Section s) {
  DefenseConfig d;
  if (s.has("modes")) {
    d.modes.clear();
    for (const auto& m : s.required<std::vector<std::string>>("modes")) d.modes.push_back(parse_eval_mode(m));
  }
  if (s.has("rule")) {
    auto r = s.child("rule");
    r.read("gamma_partial", d.rule.gamma_partial);
    r.read("gamma_full", d.rule.gamma_full);
    r.read("delta_limit_partial", d.rule.delta_limit_partial);
    r.read("delta_limit_full", d.rule.delta_limit_full);
    r.finish();
  }
  s.read("normalize_input", d.normalize_input);
  if (s.has("origin")) {
    const auto& o = s.raw("origin");
    if (o.is_string() && o.get<std::string>() == "centroid") {
      d.fixed_origin.reset();
    } else {
      d.fixed_origin = s.point("origin");
    }
  }
  s.read("jobs", d.jobs);
  s.finish();
  return d;
}

OutputConfig parse_output(Section s) {
  OutputConfig o;
  s.read("scenario", o.scenario);
  s.read("csv", o.csv);
  s.read("verdicts", o.verdicts);
  s.finish();
  return o;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw invalid_input(source + ": invalid JSON: " + e.what());
  }
  ExperimentConfig c;
  Section root(doc, "");
  root.read("name", c.name);
  if (!root.has("dataset")) throw invalid_input("missing required config key: dataset");
  c.dataset = parse_dataset(root.child("dataset"));
  if (!root.has("classifier")) throw invalid_input("missing required config key: classifier");
  c.classifier = parse_classifier(root.child("classifier"));
  if (root.has("attack")) c.attack = parse_attack(root.child("attack"));
  if (root.has("defense")) c.defense = parse_defense(root.child("defense"));
  if (root.has("output")) c.output = parse_output(root.child("output"));
  root.finish();
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path), path); }

void validate_config(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  if (d.source == "synthetic") {
    if (d.classes.empty()) throw invalid_input("config key dataset.classes must list at least one shape");
    for (const auto& name : d.classes) parse_shape_kind(name);
    if (d.test_per_class < 1) throw invalid_input("config key dataset.test_per_class must be >= 1");
  } else if (d.manifest.empty()) {
    throw invalid_input("missing required config key: dataset.manifest");
  }
  if (d.points < 1) throw invalid_input("config key dataset.points must be >= 1");

  const auto& k = c.classifier;
  if (k.kind == "centroid" && !k.model_path && d.source == "synthetic" && d.train_per_class < 1)
    throw invalid_input("config key dataset.train_per_class must be >= 1 to train a centroid classifier");
  if (k.kind == "centroid" && (k.grid < 1 || k.grid > 64)) throw invalid_input("config key classifier.grid must be in 1..64");
  if (k.kind == "remote" && k.timeout_ms < 1) throw invalid_input("config key classifier.timeout_ms must be >= 1");
  if (k.kind == "synthetic" && !c.attack.enabled) {
    if (!k.source) throw invalid_input("missing required config key: classifier.synthetic.source (no attack to inherit it from)");
    if (!k.target) throw invalid_input("missing required config key: classifier.synthetic.target (no attack to inherit it from)");
    if (!k.trigger_center)
      throw invalid_input("missing required config key: classifier.synthetic.trigger_center (no attack to inherit it from)");
  }

  if (c.attack.enabled) {
    const auto& a = c.attack;
    if (d.source == "synthetic" &&
        std::find(d.classes.begin(), d.classes.end(), a.trigger.source) == d.classes.end())
      throw invalid_input("attack.source '" + a.trigger.source + "' is not one of dataset.classes");
    if (a.poison_fraction && !(*a.poison_fraction > 0.0 && *a.poison_fraction <= 1.0))
      throw invalid_input("config key attack.poison.fraction must be in (0, 1]");
    if (a.triggered_test_count < 1) throw invalid_input("config key attack.triggered_test_count must be >= 1");
    if (k.kind == "centroid" && !k.model_path && !a.poison_count && !a.poison_fraction)
      throw invalid_input("missing required config key: attack.poison.count (or attack.poison.fraction)");
  }

  if (c.defense.modes.empty()) throw invalid_input("config key defense.modes must not be empty");
  std::set<EvalMode> seen;
  for (auto m : c.defense.modes)
    if (!seen.insert(m).second) throw invalid_input(std::string("duplicate mode in defense.modes: ") + to_string(m));
  if (c.defense.jobs < 1) throw invalid_input("config key defense.jobs must be >= 1");
}

}  // namespace cloudfort
