#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "anda/dataset.hpp"
#include "anda/graph.hpp"

namespace anda {

enum class ArchKind : std::uint8_t { SoftmaxLinear = 0, Mlp = 1, SmallCnn = 2 };

std::string to_string(ArchKind kind);
ArchKind parse_arch_kind(const std::string& name);

// `layers` holds hidden widths for Mlp and the conv channel plan for SmallCnn
// (each stage is conv3x3 + bias + relu + 2x2 average pool). Unused for
// SoftmaxLinear.
struct Architecture {
  ArchKind kind = ArchKind::SoftmaxLinear;
  Shape input_shape;  // (C, H, W)
  std::size_t classes = 0;
  std::vector<std::size_t> layers;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

Graph build_graph(const Architecture& arch);

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct Checkpoint {
  Architecture arch;
  std::vector<double> weights;
  TrainingMeta meta;

  Graph graph() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for matmul/conv weights, zero biases.
std::vector<double> init_weights(const Graph& graph, std::uint64_t seed);

struct TrainOptions {
  std::size_t epochs = 10;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> log;
};

// Mini-batch SGD with momentum on the mean cross-entropy. Deterministic for a
// fixed seed. `test` may be empty. Throws TrainingDiverged on a non-finite loss.
TrainResult train_classifier(const Dataset& train, const Dataset& test, const Architecture& arch,
                             const TrainOptions& options);

// Argmax with ties broken toward the lowest index.
std::size_t argmax(const Tensor& logits);
std::size_t predict(const Graph& model, const ImageTensor& x);
std::size_t predict(const Checkpoint& checkpoint, const ImageTensor& x);

double accuracy(const Graph& model, const Dataset& data);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& context = "checkpoint");

}  // namespace anda
