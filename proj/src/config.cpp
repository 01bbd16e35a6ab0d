#include "anda/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "anda/error.hpp"
#include "anda/rng.hpp"

namespace anda {

namespace {

// Fixed keys and their defaults. An empty default means "derived" (see resolve).
const std::map<std::string, std::string>& schema() {
  static const std::map<std::string, std::string> keys = {
      {"seed", "0"},
      {"out", "anda_run"},
      {"dataset.kind", "gauss_blobs"},
      {"dataset.seed", ""},
      {"dataset.train_count", "2000"},
      {"dataset.test_count", "500"},
      {"dataset.side", "16"},
      {"dataset.classes", "8"},
      {"dataset.contrast", "0.6"},
      {"dataset.noise", "0.1"},
      {"dataset.jitter", "2"},
      {"dataset.blob_width", "3"},
      {"dataset.train_images", ""},
      {"dataset.train_labels", ""},
      {"dataset.test_images", ""},
      {"dataset.test_labels", ""},
      {"models", "linear,mlp,cnn"},
      {"train.epochs", "10"},
      {"train.lr", "0.05"},
      {"train.batch_size", "32"},
      {"train.momentum", "0.9"},
      {"attack.kind", "anda"},
      {"attack.sources", ""},
      {"attack.inputs", "200"},
      {"attack.epsilon", "16"},
      {"attack.steps", "10"},
      {"attack.step_size", ""},
      {"attack.aug_count", "25"},
      {"attack.augmax", "0.3"},
      {"attack.include_identity", "false"},
      {"attack.ensemble_k", "5"},
      {"attack.init_radius", "0.5"},
      {"attack.samples", "20"},
      {"attack.strategy", "s1"},
      {"attack.accumulate", "true"},
      {"eval.targets", ""},
      {"eval.correct_only", "false"},
      {"ablate.axis", "augmentation"},
      {"ablate.values", ""},
  };
  return keys;
}

const std::map<std::string, std::string>& default_models() {
  static const std::map<std::string, std::string> keys = {
      {"model.linear.arch", "softmax_linear"}, {"model.mlp.arch", "mlp"},    {"model.mlp.layers", "64"},
      {"model.cnn.arch", "small_cnn"},         {"model.cnn.layers", "8,16"},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

// model.<name>.{arch,layers,seed}
bool is_model_key(const std::string& key) {
  if (key.rfind("model.", 0) != 0) return false;
  const auto dot = key.rfind('.');
  if (dot <= 6) return false;
  const std::string field = key.substr(dot + 1);
  return valid_name(key.substr(6, dot - 6)) && (field == "arch" || field == "layers" || field == "seed");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.front() == '-') throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 0);
  if (errno != 0 || *end != '\0') throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

std::size_t to_positive(const std::string& key, const std::string& v) {
  const std::size_t x = to_size(key, v);
  if (x == 0) throw ConfigError(key + ": must be positive");
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || errno != 0 || *end != '\0' || !std::isfinite(x)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

}  // namespace

bool is_known_key(const std::string& key) { return schema().count(key) > 0 || is_model_key(key); }

RunConfig::RunConfig() {
  values_ = schema();
  values_.insert(default_models().begin(), default_models().end());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!is_known_key(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig RunConfig::parse(const std::string& text, const std::string& context) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(context + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!is_known_key(key)) {
      throw ConfigError(context + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
    }
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config key '" + key + "' is not set");
  return it->second;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::Augmentation: return "augmentation";
    case AblationAxis::Accumulation: return "accumulation";
    case AblationAxis::AugCount: return "n";
    case AblationAxis::Augmax: return "augmax";
    case AblationAxis::EnsembleK: return "k";
  }
  return "unknown";
}

AblationAxis parse_ablation_axis(const std::string& name) {
  if (name == "augmentation") return AblationAxis::Augmentation;
  if (name == "accumulation") return AblationAxis::Accumulation;
  if (name == "n" || name == "aug_count") return AblationAxis::AugCount;
  if (name == "augmax") return AblationAxis::Augmax;
  if (name == "k" || name == "K" || name == "ensemble_k") return AblationAxis::EnsembleK;
  throw ConfigError("unknown ablation axis '" + name + "' (expected augmentation, accumulation, n, augmax or k)");
}

const ModelSettings& Experiment::model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  throw ConfigError("model '" + name + "' is not declared in 'models'");
}

Experiment resolve(const RunConfig& config) {
  const auto get = [&](const std::string& k) -> const std::string& { return config.get(k); };
  Experiment e;
  e.seed = to_u64("seed", get("seed"));
  e.out = get("out");
  if (e.out.empty()) throw ConfigError("out: output directory must not be empty");

  // dataset
  DatasetSettings& d = e.dataset;
  const std::string kind = get("dataset.kind");
  if (kind == "idx") {
    d.source = DataSource::Idx;
    d.train_images = get("dataset.train_images");
    d.train_labels = get("dataset.train_labels");
    d.test_images = get("dataset.test_images");
    d.test_labels = get("dataset.test_labels");
    if (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() || d.test_labels.empty()) {
      throw ConfigError("dataset.kind = idx needs dataset.{train,test}_{images,labels}");
    }
  } else {
    d.source = DataSource::Synthetic;
    SyntheticSpec s;
    s.kind = parse_synthetic_kind(kind);
    s.side = to_size("dataset.side", get("dataset.side"));
    s.classes = to_size("dataset.classes", get("dataset.classes"));
    s.contrast = to_double("dataset.contrast", get("dataset.contrast"));
    s.noise = to_double("dataset.noise", get("dataset.noise"));
    s.jitter = to_size("dataset.jitter", get("dataset.jitter"));
    s.blob_width = to_double("dataset.blob_width", get("dataset.blob_width"));
    if (s.side < 4) throw ConfigError("dataset.side must be at least 4");
    if (s.classes < 2) throw ConfigError("dataset.classes must be at least 2");
    if (!(s.contrast > 0.0 && s.contrast <= 1.0)) throw ConfigError("dataset.contrast must lie in (0, 1]");
    if (s.noise < 0.0) throw ConfigError("dataset.noise must be >= 0");
    if (s.blob_width <= 0.0) throw ConfigError("dataset.blob_width must be positive");
    const std::uint64_t dseed = get("dataset.seed").empty() ? e.seed : to_u64("dataset.seed", get("dataset.seed"));
    d.train = s;
    d.train.count = to_positive("dataset.train_count", get("dataset.train_count"));
    d.train.seed = derive_seed(dseed, {0});
    d.test = s;
    d.test.count = to_positive("dataset.test_count", get("dataset.test_count"));
    d.test.seed = derive_seed(dseed, {1});
  }

  // models
  const auto names = split_list(get("models"));
  if (names.empty()) throw ConfigError("models: at least one model is required");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string& name = names[i];
    if (!valid_name(name)) throw ConfigError("models: invalid model name '" + name + "'");
    if (!seen.insert(name).second) throw ConfigError("models: duplicate model '" + name + "'");
    const std::string prefix = "model." + name + ".";
    if (!config.has(prefix + "arch")) throw ConfigError("model '" + name + "' needs " + prefix + "arch");
    ModelSettings m;
    m.name = name;
    m.arch = parse_arch_kind(get(prefix + "arch"));
    if (config.has(prefix + "layers")) {
      for (const auto& l : split_list(get(prefix + "layers"))) m.layers.push_back(to_positive(prefix + "layers", l));
    }
    if (m.arch == ArchKind::Mlp && m.layers.empty()) m.layers = {64};
    if (m.arch == ArchKind::SmallCnn && m.layers.empty()) m.layers = {8, 16};
    m.seed = config.has(prefix + "seed") && !get(prefix + "seed").empty()
                 ? to_u64(prefix + "seed", get(prefix + "seed"))
                 : derive_seed(e.seed, {2, i});
    e.models.push_back(std::move(m));
  }
  for (const auto& [k, v] : config.values()) {
    if (!is_model_key(k)) continue;
    const std::string name = k.substr(6, k.rfind('.') - 6);
    if (!seen.count(name) && !default_models().count(k)) {
      throw ConfigError("config key '" + k + "' refers to undeclared model '" + name + "'");
    }
  }

  // training
  e.train.epochs = to_positive("train.epochs", get("train.epochs"));
  e.train.learning_rate = to_double("train.lr", get("train.lr"));
  if (e.train.learning_rate <= 0.0) throw ConfigError("train.lr must be positive");
  e.train.batch_size = to_positive("train.batch_size", get("train.batch_size"));
  e.train.momentum = to_double("train.momentum", get("train.momentum"));
  if (e.train.momentum < 0.0 || e.train.momentum >= 1.0) throw ConfigError("train.momentum must lie in [0, 1)");

  // attack
  e.attack_kind = parse_attack_kind(get("attack.kind"));
  AttackConfig& a = e.attack;
  a.epsilon = to_double("attack.epsilon", get("attack.epsilon"));
  a.steps = to_positive("attack.steps", get("attack.steps"));
  if (!get("attack.step_size").empty()) a.step_size = to_double("attack.step_size", get("attack.step_size"));
  a.aug_count = to_positive("attack.aug_count", get("attack.aug_count"));
  a.augmax = to_double("attack.augmax", get("attack.augmax"));
  a.include_identity = to_bool("attack.include_identity", get("attack.include_identity"));
  a.ensemble_k = to_positive("attack.ensemble_k", get("attack.ensemble_k"));
  a.init_radius = to_double("attack.init_radius", get("attack.init_radius"));
  a.sample_count = to_size("attack.samples", get("attack.samples"));
  a.strategy = parse_strategy(get("attack.strategy"));
  a.accumulate = to_bool("attack.accumulate", get("attack.accumulate"));
  a.seed = derive_seed(e.seed, {3});
  a.validate();
  if (a.strategy == Strategy::S2 && e.attack_kind == AttackKind::Bim) {
    throw ConfigError("attack.strategy = s2 needs attack.kind anda or multianda");
  }
  e.inputs = to_positive("attack.inputs", get("attack.inputs"));

  e.sources = split_list(get("attack.sources"));
  if (e.sources.empty()) e.sources = names;
  for (const auto& s : e.sources) e.model(s);
  e.targets = split_list(get("eval.targets"));
  if (e.targets.empty()) e.targets = names;
  for (const auto& t : e.targets) e.model(t);
  e.correct_only = to_bool("eval.correct_only", get("eval.correct_only"));

  // ablation
  e.ablate_axis = parse_ablation_axis(get("ablate.axis"));
  e.ablate_values = split_list(get("ablate.values"));
  if (e.ablate_values.empty()) {
    switch (e.ablate_axis) {
      case AblationAxis::Augmentation:
      case AblationAxis::Accumulation: e.ablate_values = {"on", "off"}; break;
      case AblationAxis::AugCount: e.ablate_values = {"1", "4", "9", "16", "25", "36", "49"}; break;
      case AblationAxis::Augmax: e.ablate_values = {"0.1", "0.3", "0.5", "0.7"}; break;
      case AblationAxis::EnsembleK: e.ablate_values = {"1", "2", "4"}; break;
    }
  }
  for (const auto& v : e.ablate_values) {
    AttackConfig probe = a;
    switch (e.ablate_axis) {
      case AblationAxis::Augmentation:
      case AblationAxis::Accumulation: to_bool("ablate.values", v); break;
      case AblationAxis::AugCount: probe.aug_count = to_positive("ablate.values", v); break;
      case AblationAxis::Augmax: probe.augmax = to_double("ablate.values", v); break;
      case AblationAxis::EnsembleK: probe.ensemble_k = to_positive("ablate.values", v); break;
    }
    probe.validate();
  }
  return e;
}

}  // namespace anda
