#include "anda/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "anda/error.hpp"
#include "anda/io.hpp"
#include "anda/parallel.hpp"
#include "binary.hpp"

namespace anda {

namespace fs = std::filesystem;

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void prepare_out(const Experiment& e) {
  std::error_code ec;
  fs::create_directories(fs::path(e.out) / "models", ec);
  if (ec) throw DataError("cannot create output directory '" + e.out + "': " + ec.message());
}

void write_out(const Experiment& e, const std::string& name, const std::string& bytes) {
  detail::write_file((fs::path(e.out) / name).string(), bytes);
}

void write_snapshot(const Experiment& e, const std::string& command, const RunConfig& config) {
  write_out(e, command + ".config", config.resolved_text());
}

std::vector<AdversaryBatch> craft_all(const std::vector<NamedModel>& sources, const Dataset& inputs, AttackKind kind,
                                      const AttackConfig& cfg, std::size_t threads) {
  std::vector<AdversaryBatch> batches;
  for (const auto& s : sources) {
    if (s.graph.input_shape() != inputs.image_shape()) {
      throw ShapeError("model '" + s.name + "' expects " + shape_to_string(s.graph.input_shape()) +
                       " but the dataset has " + shape_to_string(inputs.image_shape()));
    }
    AdversaryBatch b = craft_batch(s.graph, inputs.images, inputs.labels, kind, cfg, threads);
    b.source = s.name;
    batches.push_back(std::move(b));
  }
  return batches;
}

std::string test_split_provenance(const Experiment& e) {
  const DatasetSettings& d = e.dataset;
  if (d.source == DataSource::Idx) return "idx:" + d.test_images + "," + d.test_labels;
  return to_string(d.test.kind) + ":count=" + std::to_string(d.test.count) + ",side=" + std::to_string(d.test.side) +
         ",classes=" + std::to_string(d.test.classes) + ",seed=" + std::to_string(d.test.seed);
}

}  // namespace

std::string checkpoint_path(const Experiment& e, const std::string& model) {
  return (fs::path(e.out) / "models" / (model + ".ckpt")).string();
}

std::string archive_path(const Experiment& e, const std::string& source) {
  return (fs::path(e.out) / ("adv_" + source + ".andapert")).string();
}

std::pair<Dataset, Dataset> load_datasets(const Experiment& e) {
  const DatasetSettings& d = e.dataset;
  if (d.source == DataSource::Synthetic) return {generate_synthetic(d.train), generate_synthetic(d.test)};
  Dataset train = load_idx_dataset(d.train_images, d.train_labels);
  Dataset test = load_idx_dataset(d.test_images, d.test_labels);
  const std::size_t classes = std::max(train.classes, test.classes);
  train.classes = test.classes = classes;
  if (train.size() == 0 || test.size() == 0) throw DataError("idx dataset splits must not be empty");
  if (train.image_shape() != test.image_shape()) throw DataError("idx train and test image shapes differ");
  return {std::move(train), std::move(test)};
}

Dataset load_test_split(const Experiment& e) {
  const DatasetSettings& d = e.dataset;
  if (d.source == DataSource::Synthetic) return generate_synthetic(d.test);
  return load_idx_dataset(d.test_images, d.test_labels);
}

Architecture architecture_for(const ModelSettings& m, const Shape& input_shape, std::size_t classes) {
  return Architecture{m.arch, input_shape, classes, m.layers};
}

std::vector<TrainResult> train_models(const Experiment& e, const Dataset& train, const Dataset& test) {
  std::vector<TrainResult> out;
  for (const auto& m : e.models) {
    TrainOptions opts = e.train;
    opts.seed = m.seed;
    out.push_back(train_classifier(train, test, architecture_for(m, train.image_shape(), train.classes), opts));
  }
  return out;
}

std::vector<NamedModel> load_models(const Experiment& e, const std::vector<std::string>& names) {
  std::vector<NamedModel> out;
  for (const auto& n : names) {
    const std::string path = checkpoint_path(e, n);
    if (!fs::exists(path)) throw DataError("missing checkpoint '" + path + "' (run train first)");
    out.push_back({n, load_checkpoint(path).graph()});
  }
  return out;
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  const Experiment e = resolve(config);
  auto [train, test] = load_datasets(e);
  log << "dataset " << train.provenance << ": " << train.size() << " train / " << test.size() << " test\n";
  const auto results = train_models(e, train, test);

  prepare_out(e);
  for (std::size_t i = 0; i < e.models.size(); ++i) {
    const auto& r = results[i];
    save_checkpoint(r.checkpoint, checkpoint_path(e, e.models[i].name));
    std::string csv = "epoch,loss,train_accuracy,test_accuracy\n";
    for (const auto& s : r.log) {
      csv += std::to_string(s.epoch) + "," + fixed6(s.loss) + "," + fixed6(s.train_accuracy) + "," +
             fixed6(s.test_accuracy) + "\n";
    }
    write_out(e, "train_log_" + e.models[i].name + ".csv", csv);
    log << e.models[i].name << " (" << to_string(e.models[i].arch) << "): train "
        << fixed6(r.checkpoint.meta.train_accuracy) << " test " << fixed6(r.checkpoint.meta.test_accuracy) << "\n";
  }
  write_snapshot(e, "train", config);
}

void cmd_attack(const RunConfig& config, std::ostream& log) {
  const Experiment e = resolve(config);
  const Dataset inputs = load_test_split(e).head(e.inputs);
  const auto sources = load_models(e, e.sources);
  const auto batches = craft_all(sources, inputs, e.attack_kind, e.attack, default_thread_count());

  prepare_out(e);
  for (const auto& b : batches) {
    write_adversary_archive(b, archive_path(e, b.source));
    log << to_string(e.attack_kind) << " from " << b.source << ": " << b.records.size() << " inputs -> "
        << archive_path(e, b.source) << "\n";
  }
  write_snapshot(e, "attack", config);
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  const Experiment e = resolve(config);
  std::vector<AdversaryBatch> batches;
  for (const auto& s : e.sources) batches.push_back(read_adversary_archive(archive_path(e, s)));
  const auto targets = load_models(e, e.targets);

  EvalOptions opts;
  opts.correct_only = e.correct_only;
  opts.threads = default_thread_count();
  const TransferReport report = transfer_report(batches, targets, opts);

  std::vector<Graph> graphs;
  for (const auto& t : targets) graphs.push_back(t.graph);
  std::vector<FoolHistogram> histograms;
  std::vector<std::vector<SampledAsr>> sampled;
  bool have_samples = true;
  for (const auto& b : batches) {
    std::vector<ImageTensor> adv;
    std::vector<std::size_t> labels;
    for (const auto& r : b.records) {
      adv.push_back(r.adversary);
      labels.push_back(r.label);
      have_samples = have_samples && !r.samples.empty();
    }
    histograms.push_back(fool_count_histogram(adv, labels, graphs));
  }
  if (have_samples) {
    for (const auto& b : batches) sampled.push_back(sampled_asr(b, targets));
  } else {
    sampled.assign(batches.size(), {});
    log << "archives carry no S2 samples; sampled_asr.csv has no rows\n";
  }

  prepare_out(e);
  write_out(e, "transfer.csv", transfer_csv(report));
  nlohmann::json provenance;
  provenance["seed"] = e.seed;
  provenance["correct_only"] = e.correct_only;
  provenance["dataset"] = test_split_provenance(e);
  provenance["attacks"] = nlohmann::json::array();
  for (const auto& b : batches) provenance["attacks"].push_back(archive_config_json(b));
  write_out(e, "transfer.json", transfer_json(report, provenance).dump(2) + "\n");
  write_out(e, "histogram.csv", histogram_csv(report.sources, histograms));
  write_out(e, "sampled_asr.csv", sampled_asr_csv(report.sources, sampled));
  write_snapshot(e, "eval", config);
  log << transfer_csv(report) << "mean black-box ASR " << fixed6(report.mean_black_box_asr()) << "\n";
}

void cmd_ablate(const RunConfig& config, std::ostream& log) {
  const Experiment e = resolve(config);
  const Dataset inputs = load_test_split(e).head(e.inputs);
  const auto sources = load_models(e, e.sources);
  const auto targets = load_models(e, e.targets);
  const std::size_t threads = default_thread_count();
  EvalOptions opts;
  opts.correct_only = e.correct_only;
  opts.threads = threads;

  AttackKind kind = e.attack_kind == AttackKind::Bim ? AttackKind::Anda : e.attack_kind;
  if (e.ablate_axis == AblationAxis::EnsembleK) kind = AttackKind::MultiAnda;

  std::string csv = "axis,value,target,asr,black_box_asr\n";
  for (const auto& value : e.ablate_values) {
    AttackConfig cfg = e.attack;
    cfg.strategy = Strategy::S1;
    switch (e.ablate_axis) {
      case AblationAxis::Augmentation:
        if (value == "off" || value == "false" || value == "0") {
          cfg.aug_count = 1;
          cfg.augmax = 0.0;
        }
        break;
      case AblationAxis::Accumulation: cfg.accumulate = !(value == "off" || value == "false" || value == "0"); break;
      case AblationAxis::AugCount: cfg.aug_count = std::stoul(value); break;
      case AblationAxis::Augmax: cfg.augmax = std::stod(value); break;
      case AblationAxis::EnsembleK: cfg.ensemble_k = std::stoul(value); break;
    }
    const auto batches = craft_all(sources, inputs, kind, cfg, threads);
    const TransferReport report = transfer_report(batches, targets, opts);
    for (std::size_t t = 0; t < report.targets.size(); ++t) {
      SuccessCount all, black;
      for (std::size_t s = 0; s < report.sources.size(); ++s) {
        const SuccessCount& c = report.cells[s][t];
        all.fooled += c.fooled;
        all.total += c.total;
        if (!report.white_box(s, t)) {
          black.fooled += c.fooled;
          black.total += c.total;
        }
      }
      csv += to_string(e.ablate_axis) + "," + value + "," + report.targets[t] + "," + fixed6(all.rate()) + "," +
             (black.total == 0 ? std::string() : fixed6(black.rate())) + "\n";
    }
    log << to_string(e.ablate_axis) << "=" << value << ": mean black-box ASR " << fixed6(report.mean_black_box_asr())
        << "\n";
  }

  prepare_out(e);
  write_out(e, "ablation_" + to_string(e.ablate_axis) + ".csv", csv);
  write_snapshot(e, "ablate", config);
}

int run_command(const std::string& command, const RunConfig& config, std::ostream& log, std::ostream& err) {
  try {
    if (command == "train") {
      cmd_train(config, log);
    } else if (command == "attack") {
      cmd_attack(config, log);
    } else if (command == "eval") {
      cmd_eval(config, log);
    } else if (command == "ablate") {
      cmd_ablate(config, log);
    } else {
      err << "error: unknown command '" << command << "'\n";
      return kExitConfig;
    }
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const InvariantError& ex) {
    err << "invariant violation: " << ex.what() << "\n";
    return kExitInvariant;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace anda
