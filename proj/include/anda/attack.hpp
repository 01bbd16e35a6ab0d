#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anda/graph.hpp"
#include "anda/rng.hpp"
#include "anda/tensor.hpp"

namespace anda {

enum class Strategy { S1, S2 };
enum class AttackKind { Bim, Anda, MultiAnda };

std::string to_string(Strategy s);
std::string to_string(AttackKind k);
Strategy parse_strategy(const std::string& s);
AttackKind parse_attack_kind(const std::string& s);

// Attack hyperparameters. epsilon, step_size and init_radius are in 255-scale
// pixel units; the attack itself works on [0, 1] images.
struct AttackConfig {
  double epsilon = 16.0;
  std::size_t steps = 10;
  std::optional<double> step_size;  // defaults to epsilon / steps
  std::size_t aug_count = 25;
  double augmax = 0.3;
  bool include_identity = false;
  std::size_t ensemble_k = 5;
  double init_radius = 0.5;
  std::size_t sample_count = 20;
  Strategy strategy = Strategy::S1;
  std::uint64_t seed = 0;
  // Step along the running mean of all gradients so far; when false the step
  // uses only the current augmented batch (ablation).
  bool accumulate = true;

  void validate() const;
  double unit_epsilon() const { return epsilon / 255.0; }
  double unit_step() const { return step_size.value_or(epsilon / static_cast<double>(steps)) / 255.0; }
  double unit_init_radius() const { return init_radius / 255.0; }

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

// Gaussian approximation N(mean, D D^T / (count - 1)) of the perturbation
// posterior collected along one ANDA trajectory. Deviations are stored
// column-major: column j occupies [j*dim, (j+1)*dim).
struct PerturbationPosterior {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> deviations;
  ImageTensor anchor;  // penultimate iterate x^(T-1)

  std::span<const double> column(std::size_t j) const { return {deviations.data() + j * dim, dim}; }

  friend bool operator==(const PerturbationPosterior&, const PerturbationPosterior&) = default;
};

struct MixturePosterior {
  std::vector<PerturbationPosterior> components;
  ImageTensor avg_anchor;
  std::vector<double> mean_perturbation;

  friend bool operator==(const MixturePosterior&, const MixturePosterior&) = default;
};

struct AndaResult {
  ImageTensor adversary;
  PerturbationPosterior posterior;
};

struct MultiAndaResult {
  ImageTensor adversary;
  MixturePosterior mixture;
};

// Returns d loss / d x for the image x and the true label.
using GradientFn = std::function<Tensor(const Tensor& x, std::size_t label)>;

// The returned function refers to `model`, which must outlive it.
GradientFn model_gradient(const Graph& model);

// Elementwise clamp into [origin - eps, origin + eps] intersected with [0, 1].
// eps is in [0, 1] pixel units.
ImageTensor clip_to_ball(const ImageTensor& candidate, const ImageTensor& origin, double epsilon);

ImageTensor bim_attack(const GradientFn& grad, const ImageTensor& x, std::size_t label, const AttackConfig& config);
ImageTensor bim_attack(const Graph& model, const ImageTensor& x, std::size_t label, const AttackConfig& config);

// Running mean update: (t*n*prev + sum_i g_i) / ((t+1)*n).
std::vector<double> accumulate_mean(std::span<const double> prev_mean, std::size_t t, std::size_t n,
                                    std::span<const std::vector<double>> step_grads);

// Appends one column g_i - new_mean per gradient of this step.
void append_deviations(PerturbationPosterior& posterior, std::span<const std::vector<double>> step_grads,
                       std::span<const double> new_mean);

// Runs ANDA from `start`, clipping every iterate to the eps-ball around `origin`.
AndaResult anda_run(const GradientFn& grad, const ImageTensor& origin, const ImageTensor& start, std::size_t label,
                    const AttackConfig& config);

AndaResult anda_attack(const GradientFn& grad, const ImageTensor& x, std::size_t label, const AttackConfig& config);
AndaResult anda_attack(const Graph& model, const ImageTensor& x, std::size_t label, const AttackConfig& config);

// Exact draw from the rank-deficient Gaussian: mean + D z / sqrt(C - 1).
std::vector<double> sample_perturbation(const PerturbationPosterior& posterior, Rng& rng);

// clip(anchor + alpha * sign(delta)) around the clean input `origin`.
ImageTensor craft_from_sample(const ImageTensor& anchor, std::span<const double> delta, const ImageTensor& origin,
                              const AttackConfig& config);
ImageTensor craft_from_sample(const PerturbationPosterior& posterior, std::span<const double> delta,
                              const ImageTensor& origin, const AttackConfig& config);

// S2 sample m for a single ANDA posterior, drawn from stream (seed, 0, m).
ImageTensor anda_sample(const PerturbationPosterior& posterior, const ImageTensor& origin, std::size_t m,
                        const AttackConfig& config);

MultiAndaResult multianda_attack(const GradientFn& grad, const ImageTensor& x, std::size_t label,
                                 const AttackConfig& config);
MultiAndaResult multianda_attack(const Graph& model, const ImageTensor& x, std::size_t label,
                                 const AttackConfig& config);

// One S2 adversary: per-component draws from streams (seed, k, m), averaged
// across components and stepped from the averaged anchor.
ImageTensor multianda_sample(const MixturePosterior& mixture, const ImageTensor& origin, std::size_t m,
                             const AttackConfig& config);

// Fixed-order pairwise sum of the i-th entries of `parts`, used for every
// reduction across ensemble components.
std::vector<double> pairwise_mean(const std::vector<std::span<const double>>& parts);

// ---- batches --------------------------------------------------------------

struct AdversaryRecord {
  ImageTensor original;
  std::size_t label = 0;
  ImageTensor adversary;             // S1 output (always present)
  std::vector<ImageTensor> samples;  // S2 draws (empty under S1)

  friend bool operator==(const AdversaryRecord&, const AdversaryRecord&) = default;
};

struct AdversaryBatch {
  AttackKind kind = AttackKind::Anda;
  std::string source;
  AttackConfig config;
  std::vector<AdversaryRecord> records;

  friend bool operator==(const AdversaryBatch&, const AdversaryBatch&) = default;
};

// Number of adversaries (S1 and S2) outside the eps-ball (tolerance 1e-9) or
// the [0, 1] pixel range.
std::size_t count_violations(const AdversaryBatch& batch);

// Throws InvariantError when count_violations(batch) > 0.
void validate_batch(const AdversaryBatch& batch);

// Crafts adversaries for every input. Input i uses seed derive_seed(seed, {i}).
AdversaryBatch craft_batch(const Graph& model, std::span<const ImageTensor> images, std::span<const std::size_t> labels,
                           AttackKind kind, const AttackConfig& config, std::size_t threads = 1);

}  // namespace anda
