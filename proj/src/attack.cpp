#include "anda/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "anda/augment.hpp"
#include "anda/error.hpp"
#include "anda/parallel.hpp"

namespace anda {

std::string to_string(Strategy s) { return s == Strategy::S1 ? "s1" : "s2"; }

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Bim: return "bim";
    case AttackKind::Anda: return "anda";
    case AttackKind::MultiAnda: return "multianda";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "s1" || s == "S1") return Strategy::S1;
  if (s == "s2" || s == "S2") return Strategy::S2;
  throw ConfigError("unknown strategy '" + s + "' (expected s1 or s2)");
}

AttackKind parse_attack_kind(const std::string& s) {
  if (s == "bim") return AttackKind::Bim;
  if (s == "anda") return AttackKind::Anda;
  if (s == "multianda") return AttackKind::MultiAnda;
  throw ConfigError("unknown attack '" + s + "' (expected bim, anda or multianda)");
}

void AttackConfig::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0.0 || epsilon > 255.0) {
    throw ConfigError("epsilon must lie in [0, 255], got " + std::to_string(epsilon));
  }
  if (steps == 0) throw ConfigError("steps must be positive");
  if (step_size && (!std::isfinite(*step_size) || *step_size < 0.0 || *step_size > epsilon)) {
    throw ConfigError("step_size must lie in [0, epsilon], got " + std::to_string(*step_size));
  }
  translation_offsets(aug_count, augmax, include_identity);  // throws on bad n / augmax
  if (ensemble_k == 0) throw ConfigError("ensemble_k must be positive");
  if (!std::isfinite(init_radius) || init_radius < 0.0) throw ConfigError("init_radius must be >= 0");
}

GradientFn model_gradient(const Graph& model) {
  return [&model](const Tensor& x, std::size_t label) { return input_gradient(model, x, label); };
}

ImageTensor clip_to_ball(const ImageTensor& candidate, const ImageTensor& origin, double epsilon) {
  if (candidate.shape() != origin.shape()) {
    throw ShapeError("clip_to_ball: candidate " + shape_to_string(candidate.shape()) + " vs origin " +
                     shape_to_string(origin.shape()));
  }
  ImageTensor out(candidate.shape());
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const double lo = std::max(origin[i] - epsilon, 0.0);
    const double hi = std::min(origin[i] + epsilon, 1.0);
    out[i] = std::min(std::max(candidate[i], lo), hi);
  }
  return out;
}

namespace {

ImageTensor signed_step(const ImageTensor& x, std::span<const double> direction, double alpha,
                        const ImageTensor& origin, double epsilon) {
  ImageTensor moved = x;
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += alpha * sign(direction[i]);
  return clip_to_ball(moved, origin, epsilon);
}

void check_gradient(const Tensor& g, const ImageTensor& x) {
  if (g.shape() != x.shape()) {
    throw ShapeError("gradient shape " + shape_to_string(g.shape()) + " does not match image " +
                     shape_to_string(x.shape()));
  }
}

double pairwise_sum(const std::vector<std::span<const double>>& parts, std::size_t i, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo][i];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(parts, i, lo, mid) + pairwise_sum(parts, i, mid, hi);
}

void require_samplable(const PerturbationPosterior& p) {
  if (p.count < 2) {
    throw ConfigError("posterior holds " + std::to_string(p.count) +
                      " deviation column(s); sampling needs at least 2 (aug_count * steps >= 2)");
  }
}

}  // namespace

ImageTensor bim_attack(const GradientFn& grad, const ImageTensor& x, std::size_t label, const AttackConfig& config) {
  config.validate();
  const double eps = config.unit_epsilon();
  const double alpha = config.unit_step();
  ImageTensor cur = x;
  for (std::size_t t = 0; t < config.steps; ++t) {
    const Tensor g = grad(cur, label);
    check_gradient(g, cur);
    cur = signed_step(cur, g.values(), alpha, x, eps);
  }
  return cur;
}

ImageTensor bim_attack(const Graph& model, const ImageTensor& x, std::size_t label, const AttackConfig& config) {
  return bim_attack(model_gradient(model), x, label, config);
}

std::vector<double> accumulate_mean(std::span<const double> prev_mean, std::size_t t, std::size_t n,
                                    std::span<const std::vector<double>> step_grads) {
  if (n == 0 || step_grads.size() != n) {
    throw ShapeError("accumulate_mean: expected " + std::to_string(n) + " gradients, got " +
                     std::to_string(step_grads.size()));
  }
  const std::size_t d = prev_mean.size();
  for (const auto& g : step_grads) {
    if (g.size() != d) throw ShapeError("accumulate_mean: gradient dimension mismatch");
  }
  // Same value as (t*n*prev + sum) / ((t+1)*n), written as a centred update so
  // that a constant gradient sequence reproduces its value exactly. On the
  // first step the batch is centred on its own first element.
  const std::span<const double> centre = t == 0 ? std::span<const double>(step_grads[0]) : prev_mean;
  const double total = static_cast<double>((t + 1) * n);
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    double shift = 0.0;
    for (const auto& g : step_grads) shift += g[j] - centre[j];
    out[j] = centre[j] + shift / total;
  }
  return out;
}

void append_deviations(PerturbationPosterior& posterior, std::span<const std::vector<double>> step_grads,
                       std::span<const double> new_mean) {
  const std::size_t d = posterior.dim;
  if (new_mean.size() != d) throw ShapeError("append_deviations: mean dimension mismatch");
  posterior.deviations.reserve(posterior.deviations.size() + step_grads.size() * d);
  for (const auto& g : step_grads) {
    if (g.size() != d) throw ShapeError("append_deviations: gradient dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) posterior.deviations.push_back(g[j] - new_mean[j]);
    ++posterior.count;
  }
}

AndaResult anda_run(const GradientFn& grad, const ImageTensor& origin, const ImageTensor& start, std::size_t label,
                    const AttackConfig& config) {
  config.validate();
  if (start.shape() != origin.shape()) throw ShapeError("anda: start and origin shapes differ");
  const TranslationGrid grid = translation_offsets(config.aug_count, config.augmax, config.include_identity);
  const std::size_t n = grid.count();
  const double eps = config.unit_epsilon();
  const double alpha = config.unit_step();

  AndaResult result;
  PerturbationPosterior& post = result.posterior;
  post.dim = origin.size();
  post.mean.assign(post.dim, 0.0);
  post.deviations.reserve(post.dim * n * config.steps);

  ImageTensor x = start;
  std::vector<std::vector<double>> grads(n);
  for (std::size_t t = 0; t < config.steps; ++t) {
    if (t + 1 == config.steps) post.anchor = x;
    for (std::size_t i = 0; i < n; ++i) {
      const Offset& o = grid.offsets[i];
      const Tensor g = grad(translate(x, o.tx, o.ty), label);
      check_gradient(g, x);
      grads[i] = translate_adjoint(g, o.tx, o.ty).vector();
    }
    std::vector<double> next_mean = accumulate_mean(post.mean, t, n, grads);
    append_deviations(post, grads, next_mean);
    post.mean = std::move(next_mean);
    if (config.accumulate) {
      x = signed_step(x, post.mean, alpha, origin, eps);
    } else {
      const std::vector<double> batch_mean = accumulate_mean(post.mean, 0, n, grads);
      x = signed_step(x, batch_mean, alpha, origin, eps);
    }
  }
  result.adversary = std::move(x);
  return result;
}

AndaResult anda_attack(const GradientFn& grad, const ImageTensor& x, std::size_t label, const AttackConfig& config) {
  return anda_run(grad, x, x, label, config);
}

AndaResult anda_attack(const Graph& model, const ImageTensor& x, std::size_t label, const AttackConfig& config) {
  return anda_run(model_gradient(model), x, x, label, config);
}

std::vector<double> sample_perturbation(const PerturbationPosterior& posterior, Rng& rng) {
  require_samplable(posterior);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(posterior.count);
  for (double& v : z) v = normal(rng);
  const double scale = 1.0 / std::sqrt(static_cast<double>(posterior.count - 1));
  std::vector<double> delta = posterior.mean;
  for (std::size_t j = 0; j < posterior.count; ++j) {
    const double w = z[j] * scale;
    const auto col = posterior.column(j);
    for (std::size_t i = 0; i < posterior.dim; ++i) delta[i] += col[i] * w;
  }
  return delta;
}

ImageTensor craft_from_sample(const ImageTensor& anchor, std::span<const double> delta, const ImageTensor& origin,
                              const AttackConfig& config) {
  if (delta.size() != anchor.size()) throw ShapeError("craft_from_sample: perturbation dimension mismatch");
  return signed_step(anchor, delta, config.unit_step(), origin, config.unit_epsilon());
}

ImageTensor craft_from_sample(const PerturbationPosterior& posterior, std::span<const double> delta,
                              const ImageTensor& origin, const AttackConfig& config) {
  return craft_from_sample(posterior.anchor, delta, origin, config);
}

ImageTensor anda_sample(const PerturbationPosterior& posterior, const ImageTensor& origin, std::size_t m,
                        const AttackConfig& config) {
  Rng rng = make_rng(config.seed, {0, m});
  return craft_from_sample(posterior, sample_perturbation(posterior, rng), origin, config);
}

std::vector<double> pairwise_mean(const std::vector<std::span<const double>>& parts) {
  if (parts.empty()) throw ShapeError("pairwise_mean: no parts");
  const std::size_t d = parts.front().size();
  for (const auto& p : parts) {
    if (p.size() != d) throw ShapeError("pairwise_mean: dimension mismatch");
  }
  const auto k = static_cast<double>(parts.size());
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = pairwise_sum(parts, i, 0, parts.size()) / k;
  return out;
}

MultiAndaResult multianda_attack(const GradientFn& grad, const ImageTensor& x, std::size_t label,
                                 const AttackConfig& config) {
  config.validate();
  const double gamma = config.unit_init_radius();
  MultiAndaResult result;
  auto& comps = result.mixture.components;
  comps.reserve(config.ensemble_k);
  for (std::size_t k = 0; k < config.ensemble_k; ++k) {
    ImageTensor start = x;
    if (gamma > 0.0) {
      Rng rng = make_rng(config.seed, {k});
      std::uniform_real_distribution<double> noise(-gamma, gamma);
      for (double& v : start.values()) v += noise(rng);
      start = clip_to_ball(start, x, config.unit_epsilon());
    }
    comps.push_back(anda_run(grad, x, start, label, config).posterior);
  }

  std::vector<std::span<const double>> anchors, means;
  for (const auto& c : comps) {
    anchors.emplace_back(c.anchor.values());
    means.emplace_back(c.mean);
  }
  result.mixture.avg_anchor = ImageTensor(x.shape(), pairwise_mean(anchors));
  result.mixture.mean_perturbation = pairwise_mean(means);
  result.adversary = craft_from_sample(result.mixture.avg_anchor, result.mixture.mean_perturbation, x, config);
  return result;
}

MultiAndaResult multianda_attack(const Graph& model, const ImageTensor& x, std::size_t label,
                                 const AttackConfig& config) {
  return multianda_attack(model_gradient(model), x, label, config);
}

ImageTensor multianda_sample(const MixturePosterior& mixture, const ImageTensor& origin, std::size_t m,
                             const AttackConfig& config) {
  if (mixture.components.empty()) throw ShapeError("multianda_sample: empty mixture");
  std::vector<std::vector<double>> draws;
  draws.reserve(mixture.components.size());
  for (std::size_t k = 0; k < mixture.components.size(); ++k) {
    Rng rng = make_rng(config.seed, {k, m});
    draws.push_back(sample_perturbation(mixture.components[k], rng));
  }
  std::vector<std::span<const double>> parts(draws.begin(), draws.end());
  return craft_from_sample(mixture.avg_anchor, pairwise_mean(parts), origin, config);
}

// ---- batches --------------------------------------------------------------

std::size_t count_violations(const AdversaryBatch& batch) {
  const double bound = batch.config.unit_epsilon() + 1e-9;
  std::size_t violations = 0;
  auto check = [&](const ImageTensor& adv, const ImageTensor& orig) {
    if (adv.shape() != orig.shape()) {
      ++violations;
      return;
    }
    bool bad = false;
    for (std::size_t i = 0; i < adv.size() && !bad; ++i) {
      const double v = adv[i];
      bad = !std::isfinite(v) || v < 0.0 || v > 1.0 || std::abs(v - orig[i]) > bound;
    }
    if (bad) ++violations;
  };
  for (const auto& r : batch.records) {
    check(r.adversary, r.original);
    for (const auto& s : r.samples) check(s, r.original);
  }
  return violations;
}

void validate_batch(const AdversaryBatch& batch) {
  if (const std::size_t v = count_violations(batch); v > 0) {
    throw InvariantError(std::to_string(v) + " adversar" + (v == 1 ? "y violates" : "ies violate") +
                         " the l-inf ball of epsilon " + std::to_string(batch.config.epsilon) +
                         "/255 or the [0,1] pixel range");
  }
}

AdversaryBatch craft_batch(const Graph& model, std::span<const ImageTensor> images, std::span<const std::size_t> labels,
                           AttackKind kind, const AttackConfig& config, std::size_t threads) {
  config.validate();
  if (images.size() != labels.size()) throw ShapeError("craft_batch: image and label counts differ");
  const bool sampled = config.strategy == Strategy::S2;
  if (sampled && kind == AttackKind::Bim) throw ConfigError("strategy s2 requires anda or multianda");
  if (sampled) {
    const auto grid = translation_offsets(config.aug_count, config.augmax, config.include_identity);
    if (grid.count() * config.steps < 2) {
      throw ConfigError("strategy s2 needs aug_count * steps >= 2 to define a covariance");
    }
  }

  AdversaryBatch batch;
  batch.kind = kind;
  batch.config = config;
  batch.records.resize(images.size());
  const GradientFn grad = model_gradient(model);

  parallel_for(images.size(), threads, [&](std::size_t i) {
    AttackConfig local = config;
    local.seed = derive_seed(config.seed, {i});
    AdversaryRecord& rec = batch.records[i];
    rec.original = images[i];
    rec.label = labels[i];
    switch (kind) {
      case AttackKind::Bim: rec.adversary = bim_attack(grad, images[i], labels[i], local); break;
      case AttackKind::Anda: {
        AndaResult r = anda_attack(grad, images[i], labels[i], local);
        rec.adversary = std::move(r.adversary);
        if (sampled) {
          for (std::size_t m = 0; m < config.sample_count; ++m) {
            rec.samples.push_back(anda_sample(r.posterior, images[i], m, local));
          }
        }
        break;
      }
      case AttackKind::MultiAnda: {
        MultiAndaResult r = multianda_attack(grad, images[i], labels[i], local);
        rec.adversary = std::move(r.adversary);
        if (sampled) {
          for (std::size_t m = 0; m < config.sample_count; ++m) {
            rec.samples.push_back(multianda_sample(r.mixture, images[i], m, local));
          }
        }
        break;
      }
    }
  });
  return batch;
}

}  // namespace anda
