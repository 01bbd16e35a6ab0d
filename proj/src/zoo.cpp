#include "anda/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "anda/error.hpp"
#include "anda/rng.hpp"
#include "binary.hpp"

namespace anda {

std::string to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::SoftmaxLinear: return "softmax_linear";
    case ArchKind::Mlp: return "mlp";
    case ArchKind::SmallCnn: return "small_cnn";
  }
  return "unknown";
}

ArchKind parse_arch_kind(const std::string& name) {
  if (name == "softmax_linear" || name == "linear") return ArchKind::SoftmaxLinear;
  if (name == "mlp") return ArchKind::Mlp;
  if (name == "small_cnn" || name == "cnn") return ArchKind::SmallCnn;
  throw ConfigError("unknown architecture '" + name + "' (expected softmax_linear, mlp or small_cnn)");
}

Graph build_graph(const Architecture& arch) {
  if (arch.input_shape.size() != 3) {
    throw ShapeError("architecture input must be (C,H,W), got " + shape_to_string(arch.input_shape));
  }
  if (arch.classes < 2) throw ConfigError("architecture needs at least 2 classes");

  GraphBuilder b(arch.input_shape);
  switch (arch.kind) {
    case ArchKind::SoftmaxLinear: b.flatten().matmul(arch.classes).bias_add(); break;
    case ArchKind::Mlp:
      b.flatten();
      for (std::size_t width : arch.layers) b.matmul(width).bias_add().relu();
      b.matmul(arch.classes).bias_add();
      break;
    case ArchKind::SmallCnn:
      if (arch.layers.empty()) throw ConfigError("small_cnn needs a non-empty channel plan");
      for (std::size_t channels : arch.layers) b.conv2d(channels, 3).bias_add().relu().avg_pool(2);
      b.flatten().matmul(arch.classes).bias_add();
      break;
  }
  return b.build();
}

Graph Checkpoint::graph() const { return build_graph(arch).with_weights(weights); }

std::vector<double> init_weights(const Graph& graph, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0});
  std::vector<double> w(graph.weight_count(), 0.0);
  for (const Node& n : graph.nodes()) {
    std::size_t fan_in = 0;
    if (n.op == OpKind::MatMul) fan_in = n.in_shape[0];
    if (n.op == OpKind::Conv2d) fan_in = n.in_shape[0] * n.kernel * n.kernel;
    if (fan_in == 0) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < n.param_count; ++i) w[n.param_offset + i] = dist(rng);
  }
  return w;
}

std::size_t argmax(const Tensor& logits) {
  if (logits.size() == 0) throw ShapeError("argmax of empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

std::size_t predict(const Graph& model, const ImageTensor& x) { return argmax(model.forward(x)); }

std::size_t predict(const Checkpoint& checkpoint, const ImageTensor& x) { return predict(checkpoint.graph(), x); }

double accuracy(const Graph& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += predict(model, data.images[i]) == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train_classifier(const Dataset& train, const Dataset& test, const Architecture& arch,
                             const TrainOptions& options) {
  if (train.size() == 0) throw DataError("training set is empty");
  train.validate();
  if (train.classes > arch.classes) throw ConfigError("dataset has more classes than the architecture");
  if (train.image_shape() != arch.input_shape) {
    throw ShapeError("dataset images " + shape_to_string(train.image_shape()) + " do not match architecture input " +
                     shape_to_string(arch.input_shape));
  }
  if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(options.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");

  const Graph skeleton = build_graph(arch);
  std::vector<double> weights = init_weights(skeleton, options.seed);
  std::vector<double> velocity(weights.size(), 0.0);
  std::vector<double> grad(weights.size());
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    Rng shuffle_rng = make_rng(options.seed, {1, epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Graph model = skeleton.with_weights(weights);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t idx = order[j];
        const Trace trace = model.forward_trace(train.images[idx]);
        const double loss = cross_entropy(trace.output(), train.labels[idx]);
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "non-finite loss in epoch " << epoch << " (learning rate " << options.learning_rate << ")";
          throw TrainingDiverged(msg.str());
        }
        loss_sum += loss;
        correct += argmax(trace.output()) == train.labels[idx];
        model.backward(trace, cross_entropy_grad(trace.output(), train.labels[idx]), grad);
      }
      const double scale = options.learning_rate / static_cast<double>(stop - start);
      for (std::size_t i = 0; i < weights.size(); ++i) {
        velocity[i] = options.momentum * velocity[i] - scale * grad[i];
        weights[i] += velocity[i];
      }
      model = skeleton.with_weights(weights);
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.loss = loss_sum / static_cast<double>(train.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    stats.test_accuracy = accuracy(model, test);
    result.log.push_back(stats);
  }

  const Graph final_model = skeleton.with_weights(weights);
  result.checkpoint.arch = arch;
  result.checkpoint.weights = std::move(weights);
  result.checkpoint.meta.seed = options.seed;
  result.checkpoint.meta.epochs = static_cast<std::uint32_t>(options.epochs);
  result.checkpoint.meta.train_accuracy = accuracy(final_model, train);
  result.checkpoint.meta.test_accuracy = accuracy(final_model, test);
  return result;
}

// ---- checkpoint format ----------------------------------------------------
//
//   "ANDAMODL" | u8 version | u32 descriptor length | descriptor |
//   u64 weight count | weight count x f64
//
// descriptor: u8 kind | u32 rank | rank x u32 dims | u32 classes |
//             u32 layer count | layer count x u32 | u64 seed | u32 epochs |
//             f64 train accuracy | f64 test accuracy
// All integers and floats little-endian.

namespace {

constexpr std::string_view kModelMagic = "ANDAMODL";
constexpr std::uint8_t kModelVersion = 1;

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  detail::ByteWriter desc;
  desc.u8(static_cast<std::uint8_t>(c.arch.kind));
  desc.u32(static_cast<std::uint32_t>(c.arch.input_shape.size()));
  for (std::size_t d : c.arch.input_shape) desc.u32(static_cast<std::uint32_t>(d));
  desc.u32(static_cast<std::uint32_t>(c.arch.classes));
  desc.u32(static_cast<std::uint32_t>(c.arch.layers.size()));
  for (std::size_t l : c.arch.layers) desc.u32(static_cast<std::uint32_t>(l));
  desc.u64(c.meta.seed);
  desc.u32(c.meta.epochs);
  desc.f64(c.meta.train_accuracy);
  desc.f64(c.meta.test_accuracy);

  detail::ByteWriter out;
  out.bytes(kModelMagic);
  out.u8(kModelVersion);
  out.u32(static_cast<std::uint32_t>(desc.size()));
  out.bytes(desc.str());
  out.u64(c.weights.size());
  for (double w : c.weights) out.f64(w);
  return out.str();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& context) {
  detail::ByteReader in(bytes, context);
  if (in.remaining() < kModelMagic.size() || in.bytes(kModelMagic.size()) != kModelMagic) {
    in.fail("bad magic (expected ANDAMODL)");
  }
  if (const auto v = in.u8(); v != kModelVersion) in.fail("unsupported version " + std::to_string(v));

  const std::uint32_t desc_len = in.u32();
  detail::ByteReader desc(in.bytes(desc_len), context + " descriptor");
  Checkpoint c;
  const std::uint8_t kind = desc.u8();
  if (kind > static_cast<std::uint8_t>(ArchKind::SmallCnn)) desc.fail("unknown architecture kind");
  c.arch.kind = static_cast<ArchKind>(kind);
  const std::uint32_t rank = desc.u32();
  if (rank > 4) desc.fail("input rank exceeds 4");
  c.arch.input_shape.resize(rank);
  for (auto& d : c.arch.input_shape) d = desc.u32();
  c.arch.classes = desc.u32();
  const std::uint32_t layers = desc.u32();
  if (layers > desc.remaining() / 4) desc.fail("truncated layer plan");
  c.arch.layers.resize(layers);
  for (auto& l : c.arch.layers) l = desc.u32();
  c.meta.seed = desc.u64();
  c.meta.epochs = desc.u32();
  c.meta.train_accuracy = desc.f64();
  c.meta.test_accuracy = desc.f64();
  if (!desc.at_end()) desc.fail("trailing bytes in descriptor");

  const std::uint64_t count = in.u64();
  if (count > in.remaining() / 8) in.fail("truncated weights (" + std::to_string(count) + " declared)");
  c.weights.resize(count);
  for (auto& w : c.weights) w = in.f64();
  if (!in.at_end()) in.fail("trailing bytes after weights");

  Graph g;
  try {
    g = build_graph(c.arch);
  } catch (const Error& e) {
    in.fail(std::string("invalid architecture: ") + e.what());
  }
  if (g.weight_count() != c.weights.size()) {
    in.fail("weight count mismatch: file has " + std::to_string(c.weights.size()) + ", architecture needs " +
            std::to_string(g.weight_count()));
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  detail::write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path), path); }

}  // namespace anda
