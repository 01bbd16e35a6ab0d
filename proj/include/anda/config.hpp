#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anda/attack.hpp"
#include "anda/io.hpp"
#include "anda/zoo.hpp"

namespace anda {

// Flat key=value run configuration. Lines are `key = value`; `#` starts a
// comment; list values are comma separated. Keys are checked against a fixed
// schema (plus the per-model pattern model.<name>.{arch,layers,seed}) as soon
// as they are set, so unknown keys never survive to a command.
class RunConfig {
 public:
  // All keys at their defaults.
  RunConfig();

  static RunConfig parse(const std::string& text, const std::string& context = "config");
  static RunConfig load(const std::string& path);

  // Throws ConfigError on an unknown key.
  void set(const std::string& key, const std::string& value);
  // "key=value" form used by --set.
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;

  // Every key in sorted order, one `key = value` line each.
  std::string resolved_text() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

bool is_known_key(const std::string& key);

enum class DataSource { Synthetic, Idx };

struct DatasetSettings {
  DataSource source = DataSource::Synthetic;
  SyntheticSpec train;
  SyntheticSpec test;
  std::string train_images, train_labels, test_images, test_labels;
};

struct ModelSettings {
  std::string name;
  ArchKind arch = ArchKind::SoftmaxLinear;
  std::vector<std::size_t> layers;
  std::uint64_t seed = 0;
};

enum class AblationAxis { Augmentation, Accumulation, AugCount, Augmax, EnsembleK };

std::string to_string(AblationAxis axis);
AblationAxis parse_ablation_axis(const std::string& name);

// Typed view of a RunConfig. Resolving performs every semantic check, so a
// command can resolve first and only then touch the filesystem.
struct Experiment {
  std::uint64_t seed = 0;
  std::string out;
  DatasetSettings dataset;
  std::vector<ModelSettings> models;
  TrainOptions train;  // seed is per model
  AttackKind attack_kind = AttackKind::Anda;
  AttackConfig attack;
  std::vector<std::string> sources;
  std::size_t inputs = 200;
  std::vector<std::string> targets;
  bool correct_only = false;
  AblationAxis ablate_axis = AblationAxis::Augmentation;
  std::vector<std::string> ablate_values;

  const ModelSettings& model(const std::string& name) const;
};

Experiment resolve(const RunConfig& config);

}  // namespace anda
