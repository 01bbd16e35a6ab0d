#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "anda/attack.hpp"
#include "anda/graph.hpp"
#include "json.hpp"

namespace anda {

struct NamedModel {
  std::string name;
  Graph graph;
};

struct EvalOptions {
  // Count only inputs whose clean image every evaluated model classifies
  // correctly. Off by default: success is misclassification over all inputs.
  bool correct_only = false;
  std::size_t threads = 1;
};

struct SuccessCount {
  std::size_t fooled = 0;
  std::size_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(fooled) / static_cast<double>(total); }
};

// Fraction of adversaries the target does not assign to their true label.
double attack_success_rate(std::span<const ImageTensor> adversaries, std::span<const std::size_t> labels,
                           const Graph& target);

struct TransferReport {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::vector<std::vector<SuccessCount>> cells;  // [source][target]

  double asr(std::size_t s, std::size_t t) const { return cells.at(s).at(t).rate(); }
  bool white_box(std::size_t s, std::size_t t) const { return sources.at(s) == targets.at(t); }

  // Mean over non-white-box cells (optionally one source row only).
  double mean_black_box_asr() const;
  double mean_black_box_asr(std::size_t source) const;
  double mean_white_box_asr() const;
};

// Evaluates pre-crafted batches (one per source, batch.source naming it)
// against every target.
TransferReport transfer_report(std::span<const AdversaryBatch> batches, std::span<const NamedModel> targets,
                               const EvalOptions& options = {});

// Crafts adversaries once per source on the given inputs, then evaluates
// them against every target.
TransferReport transfer_matrix(std::span<const NamedModel> sources, std::span<const NamedModel> targets,
                               std::span<const ImageTensor> images, std::span<const std::size_t> labels,
                               AttackKind kind, const AttackConfig& config, const EvalOptions& options = {});

struct FoolHistogram {
  std::vector<std::size_t> buckets;  // buckets[k]: adversaries fooling exactly k models
  std::size_t total() const;
};

FoolHistogram fool_count_histogram(std::span<const ImageTensor> adversaries, std::span<const std::size_t> labels,
                                   std::span<const Graph> models);

struct SampledAsr {
  std::string target;
  double s1_asr = 0.0;
  double sampled_asr = 0.0;
  // Inputs whose S1 adversary fools this target, and both rates on that subset.
  std::size_t conditioned_inputs = 0;
  double conditioned_s1_asr = 0.0;
  double conditioned_sampled_asr = 0.0;
};

// Requires every record to carry at least one S2 sample.
std::vector<SampledAsr> sampled_asr(const AdversaryBatch& batch, std::span<const NamedModel> targets);

// ---- report rendering -----------------------------------------------------

// Header row of target names, one row per source, percentages with one
// decimal, white-box cells suffixed "*".
std::string transfer_csv(const TransferReport& report);
// `provenance` (seeds, attack configs, dataset) is stored verbatim when not null.
nlohmann::json transfer_json(const TransferReport& report, const nlohmann::json& provenance = nullptr);
std::string histogram_csv(const std::vector<std::string>& sources, const std::vector<FoolHistogram>& histograms);
std::string sampled_asr_csv(const std::vector<std::string>& sources, const std::vector<std::vector<SampledAsr>>& rows);

}  // namespace anda
