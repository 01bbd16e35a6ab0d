#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "anda/config.hpp"
#include "anda/dataset.hpp"
#include "anda/eval.hpp"
#include "anda/zoo.hpp"

namespace anda {

// Output layout under Experiment::out:
//   models/<name>.ckpt, train_log_<name>.csv   (train)
//   adv_<source>.andapert                       (attack)
//   transfer.csv, transfer.json, histogram.csv, sampled_asr.csv   (eval)
//   ablation_<axis>.csv                         (ablate)
//   <command>.config                            resolved config snapshot
std::string checkpoint_path(const Experiment& e, const std::string& model);
std::string archive_path(const Experiment& e, const std::string& source);

// (train, test) splits for the configured dataset.
std::pair<Dataset, Dataset> load_datasets(const Experiment& e);
Dataset load_test_split(const Experiment& e);

Architecture architecture_for(const ModelSettings& m, const Shape& input_shape, std::size_t classes);

// Trains every declared model in memory; nothing is written.
std::vector<TrainResult> train_models(const Experiment& e, const Dataset& train, const Dataset& test);

// Loads out/models/<name>.ckpt for each name. Throws DataError when missing.
std::vector<NamedModel> load_models(const Experiment& e, const std::vector<std::string>& names);

// Each command resolves and validates the whole config before touching the
// filesystem, then writes its outputs and a config snapshot under `out`.
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_attack(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_ablate(const RunConfig& config, std::ostream& log);

// Exit codes: 0 ok, 2 config error, 3 data or model error, 4 invariant
// violation in outputs.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInvariant = 4;

// Runs one subcommand by name, reporting any error on `err`.
int run_command(const std::string& command, const RunConfig& config, std::ostream& log, std::ostream& err);

}  // namespace anda
