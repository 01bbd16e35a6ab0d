#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "anda/augment.hpp"
#include "anda/tensor.hpp"

namespace anda {

enum class OpKind { MatMul, BiasAdd, Conv2d, Relu, AvgPool, Flatten, Translate };

std::string op_name(OpKind op);

// One primitive op. `input` is the producing node index, or kGraphInput.
struct Node {
  static constexpr int kGraphInput = -1;

  OpKind op = OpKind::Relu;
  int input = kGraphInput;

  std::size_t out_features = 0;  // MatMul
  std::size_t out_channels = 0;  // Conv2d
  std::size_t kernel = 0;        // Conv2d, odd; same padding, stride 1
  std::size_t window = 0;        // AvgPool, window == stride
  Offset offset;                 // Translate

  Shape in_shape;
  Shape out_shape;
  std::size_t param_offset = 0;
  std::size_t param_count = 0;
};

// Activations recorded by a forward pass; activations[i] is node i's output.
struct Trace {
  Tensor input;
  std::vector<Tensor> activations;
  const Tensor& output() const { return activations.empty() ? input : activations.back(); }
};

// Immutable, topologically ordered graph of primitive ops plus a flat weight
// vector. The last node produces the logits; a graph with no nodes is the
// identity.
class Graph {
 public:
  Graph() = default;

  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return nodes_.empty() ? input_shape_ : nodes_.back().out_shape; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t weight_count() const noexcept { return weights_.size(); }

  Graph with_weights(std::vector<double> weights) const;

  Tensor forward(const Tensor& input) const;
  Trace forward_trace(const Tensor& input) const;

  // Propagates `output_grad` back through the trace. Returns d/d(input); when
  // `weight_grad` is non-empty (size weight_count()) weight gradients are
  // accumulated into it.
  Tensor backward(const Trace& trace, const Tensor& output_grad, std::span<double> weight_grad = {}) const;

 private:
  friend class GraphBuilder;

  void check_input(const Tensor& input) const;

  Shape input_shape_;
  std::vector<Node> nodes_;
  std::vector<double> weights_;
};

// Appends nodes, checks that shapes chain, and assigns parameter slices.
// Every method consumes the previously added node unless `input` is given.
class GraphBuilder {
 public:
  static constexpr int kPrevious = -2;

  explicit GraphBuilder(Shape input_shape);

  GraphBuilder& matmul(std::size_t out_features, int input = kPrevious);
  GraphBuilder& bias_add(int input = kPrevious);
  GraphBuilder& conv2d(std::size_t out_channels, std::size_t kernel, int input = kPrevious);
  GraphBuilder& relu(int input = kPrevious);
  GraphBuilder& avg_pool(std::size_t window, int input = kPrevious);
  GraphBuilder& flatten(int input = kPrevious);
  GraphBuilder& translate(double tx, double ty, int input = kPrevious);

  // Weights start at zero.
  Graph build() const;

 private:
  GraphBuilder& add(Node node, int input);
  const Shape& shape_of(int index) const;

  Shape input_shape_;
  std::vector<Node> nodes_;
  std::size_t param_total_ = 0;
};

Tensor forward(const Graph& graph, const Tensor& input);

// -log softmax(logits)[label], computed with the log-sum-exp shift.
double cross_entropy(const Tensor& logits, std::size_t label);

// softmax(logits) - onehot(label): the gradient of cross_entropy w.r.t. logits.
Tensor cross_entropy_grad(const Tensor& logits, std::size_t label);

// Gradient of cross_entropy(forward(graph, input), label) w.r.t. the input.
Tensor input_gradient(const Graph& graph, const Tensor& input, std::size_t label);

// Central differences, one coordinate at a time.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& fn, const Tensor& input, double h);
Tensor finite_difference_gradient(const Graph& graph, const Tensor& input, std::size_t label, double h);

}  // namespace anda
