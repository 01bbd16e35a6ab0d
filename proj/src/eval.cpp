#include "anda/eval.hpp"

#include <cstdio>
#include <numeric>

#include "anda/error.hpp"
#include "anda/parallel.hpp"
#include "anda/zoo.hpp"

namespace anda {

namespace {

std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * rate);
  return buf;
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// predictions[i] for every image, computed in parallel into fixed slots.
std::vector<std::size_t> predict_all(const Graph& model, std::span<const ImageTensor> images, std::size_t threads) {
  std::vector<std::size_t> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) { out[i] = predict(model, images[i]); });
  return out;
}

}  // namespace

double attack_success_rate(std::span<const ImageTensor> adversaries, std::span<const std::size_t> labels,
                           const Graph& target) {
  if (adversaries.size() != labels.size()) throw ShapeError("attack_success_rate: adversary and label counts differ");
  if (adversaries.empty()) return 0.0;
  std::size_t fooled = 0;
  for (std::size_t i = 0; i < adversaries.size(); ++i) fooled += predict(target, adversaries[i]) != labels[i];
  return static_cast<double>(fooled) / static_cast<double>(adversaries.size());
}

double TransferReport::mean_black_box_asr() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (white_box(s, t)) continue;
      sum += asr(s, t);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double TransferReport::mean_black_box_asr(std::size_t source) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (white_box(source, t)) continue;
    sum += asr(source, t);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double TransferReport::mean_white_box_asr() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (!white_box(s, t)) continue;
      sum += asr(s, t);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

TransferReport transfer_report(std::span<const AdversaryBatch> batches, std::span<const NamedModel> targets,
                               const EvalOptions& options) {
  TransferReport report;
  for (const auto& t : targets) report.targets.push_back(t.name);
  for (const auto& b : batches) {
    report.sources.push_back(b.source);
    const std::size_t n = b.records.size();
    std::vector<ImageTensor> adversaries, originals;
    std::vector<std::size_t> labels;
    adversaries.reserve(n);
    for (const auto& r : b.records) {
      adversaries.push_back(r.adversary);
      originals.push_back(r.original);
      labels.push_back(r.label);
    }

    std::vector<bool> counted(n, true);
    if (options.correct_only) {
      for (const auto& t : targets) {
        const auto clean = predict_all(t.graph, originals, options.threads);
        for (std::size_t i = 0; i < n; ++i) counted[i] = counted[i] && clean[i] == labels[i];
      }
    }

    std::vector<SuccessCount> row;
    for (const auto& t : targets) {
      if (n > 0 && adversaries.front().shape() != t.graph.input_shape()) {
        throw ShapeError("archive images " + shape_to_string(adversaries.front().shape()) + " do not match model '" +
                         t.name + "' input " + shape_to_string(t.graph.input_shape()));
      }
      const auto pred = predict_all(t.graph, adversaries, options.threads);
      SuccessCount cell;
      for (std::size_t i = 0; i < n; ++i) {
        if (!counted[i]) continue;
        ++cell.total;
        cell.fooled += pred[i] != labels[i];
      }
      row.push_back(cell);
    }
    report.cells.push_back(std::move(row));
  }
  return report;
}

TransferReport transfer_matrix(std::span<const NamedModel> sources, std::span<const NamedModel> targets,
                               std::span<const ImageTensor> images, std::span<const std::size_t> labels,
                               AttackKind kind, const AttackConfig& config, const EvalOptions& options) {
  if (sources.empty() || targets.empty()) throw ConfigError("transfer_matrix needs at least one source and target");
  std::vector<AdversaryBatch> batches;
  for (const auto& s : sources) {
    AdversaryBatch b = craft_batch(s.graph, images, labels, kind, config, options.threads);
    b.source = s.name;
    batches.push_back(std::move(b));
  }
  return transfer_report(batches, targets, options);
}

std::size_t FoolHistogram::total() const { return std::accumulate(buckets.begin(), buckets.end(), std::size_t{0}); }

FoolHistogram fool_count_histogram(std::span<const ImageTensor> adversaries, std::span<const std::size_t> labels,
                                   std::span<const Graph> models) {
  if (adversaries.size() != labels.size()) throw ShapeError("fool_count_histogram: adversary and label counts differ");
  FoolHistogram h;
  h.buckets.assign(models.size() + 1, 0);
  for (std::size_t i = 0; i < adversaries.size(); ++i) {
    std::size_t fooled = 0;
    for (const auto& m : models) fooled += predict(m, adversaries[i]) != labels[i];
    ++h.buckets[fooled];
  }
  return h;
}

std::vector<SampledAsr> sampled_asr(const AdversaryBatch& batch, std::span<const NamedModel> targets) {
  for (const auto& r : batch.records) {
    if (r.samples.empty()) throw ConfigError("sampled_asr needs S2 samples on every record (strategy s2, M >= 1)");
  }
  std::vector<SampledAsr> out;
  for (const auto& t : targets) {
    SampledAsr row;
    row.target = t.name;
    std::size_t s1_fooled = 0, sample_total = 0, sample_fooled = 0;
    std::size_t cond_sample_total = 0, cond_sample_fooled = 0;
    for (const auto& r : batch.records) {
      const bool s1 = predict(t.graph, r.adversary) != r.label;
      s1_fooled += s1;
      std::size_t fooled = 0;
      for (const auto& s : r.samples) fooled += predict(t.graph, s) != r.label;
      sample_total += r.samples.size();
      sample_fooled += fooled;
      if (s1) {
        ++row.conditioned_inputs;
        cond_sample_total += r.samples.size();
        cond_sample_fooled += fooled;
      }
    }
    const auto rate = [](std::size_t a, std::size_t b) {
      return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
    };
    row.s1_asr = rate(s1_fooled, batch.records.size());
    row.sampled_asr = rate(sample_fooled, sample_total);
    row.conditioned_s1_asr = row.conditioned_inputs == 0 ? 0.0 : 1.0;
    row.conditioned_sampled_asr = rate(cond_sample_fooled, cond_sample_total);
    out.push_back(row);
  }
  return out;
}

std::string transfer_csv(const TransferReport& report) {
  std::string csv = "source";
  for (const auto& t : report.targets) csv += "," + t;
  csv += "\n";
  for (std::size_t s = 0; s < report.sources.size(); ++s) {
    csv += report.sources[s];
    for (std::size_t t = 0; t < report.targets.size(); ++t) {
      csv += "," + percent(report.asr(s, t));
      if (report.white_box(s, t)) csv += "*";
    }
    csv += "\n";
  }
  return csv;
}

nlohmann::json transfer_json(const TransferReport& report, const nlohmann::json& provenance) {
  nlohmann::json j;
  if (!provenance.is_null()) j["provenance"] = provenance;
  j["sources"] = report.sources;
  j["targets"] = report.targets;
  j["cells"] = nlohmann::json::array();
  for (std::size_t s = 0; s < report.sources.size(); ++s) {
    for (std::size_t t = 0; t < report.targets.size(); ++t) {
      const auto& c = report.cells[s][t];
      j["cells"].push_back({{"source", report.sources[s]},
                            {"target", report.targets[t]},
                            {"fooled", c.fooled},
                            {"total", c.total},
                            {"asr", c.rate()},
                            {"white_box", report.white_box(s, t)}});
    }
  }
  j["mean_black_box_asr"] = report.mean_black_box_asr();
  j["mean_white_box_asr"] = report.mean_white_box_asr();
  return j;
}

std::string histogram_csv(const std::vector<std::string>& sources, const std::vector<FoolHistogram>& histograms) {
  std::string csv = "source,fooled_models,count\n";
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t k = 0; k < histograms[s].buckets.size(); ++k) {
      csv += sources[s] + "," + std::to_string(k) + "," + std::to_string(histograms[s].buckets[k]) + "\n";
    }
  }
  return csv;
}

std::string sampled_asr_csv(const std::vector<std::string>& sources, const std::vector<std::vector<SampledAsr>>& rows) {
  std::string csv = "source,target,s1_asr,sampled_asr,conditioned_inputs,conditioned_s1_asr,conditioned_sampled_asr\n";
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (const auto& r : rows[s]) {
      csv += sources[s] + "," + r.target + "," + fixed6(r.s1_asr) + "," + fixed6(r.sampled_asr) + "," +
             std::to_string(r.conditioned_inputs) + "," + fixed6(r.conditioned_s1_asr) + "," +
             fixed6(r.conditioned_sampled_asr) + "\n";
    }
  }
  return csv;
}

}  // namespace anda
