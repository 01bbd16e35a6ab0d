#include "anda/graph.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "anda/error.hpp"

namespace anda {

std::string op_name(OpKind op) {
  switch (op) {
    case OpKind::MatMul: return "matmul";
    case OpKind::BiasAdd: return "bias_add";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Relu: return "relu";
    case OpKind::AvgPool: return "avg_pool";
    case OpKind::Flatten: return "flatten";
    case OpKind::Translate: return "translate";
  }
  return "unknown";
}

namespace {

std::string node_label(std::size_t index, const Node& node) {
  return "node " + std::to_string(index) + " (" + op_name(node.op) + ")";
}

// ---- per-op kernels -------------------------------------------------------

void matmul_forward(const Node& n, const double* w, const Tensor& x, Tensor& y) {
  const std::size_t in = n.in_shape[0];
  for (std::size_t o = 0; o < n.out_features; ++o) {
    const double* row = w + o * in;
    double acc = 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void matmul_backward(const Node& n, const double* w, const Tensor& x, const Tensor& gy, Tensor& gx, double* gw) {
  const std::size_t in = n.in_shape[0];
  for (std::size_t o = 0; o < n.out_features; ++o) {
    const double* row = w + o * in;
    const double g = gy[o];
    if (g == 0.0) continue;
    for (std::size_t i = 0; i < in; ++i) gx[i] += row[i] * g;
    if (gw) {
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += g * x[i];
    }
  }
}

// Bias is per element for rank-1 inputs and per channel for (C, H, W).
std::size_t bias_stride(const Node& n) { return n.in_shape.size() == 1 ? 1 : n.in_shape[1] * n.in_shape[2]; }

void conv_forward(const Node& n, const double* w, const Tensor& x, Tensor& y) {
  const std::size_t cin = n.in_shape[0], h = n.in_shape[1], wd = n.in_shape[2];
  const std::size_t k = n.kernel;
  const long pad = static_cast<long>(k / 2);
  for (std::size_t o = 0; o < n.out_channels; ++o) {
    double* out = y.data() + o * h * wd;
    for (std::size_t c = 0; c < cin; ++c) {
      const double* img = x.data() + c * h * wd;
      const double* ker = w + (o * cin + c) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long dy = static_cast<long>(ky) - pad;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long dx = static_cast<long>(kx) - pad;
          const double kv = ker[ky * k + kx];
          const long y0 = std::max(0L, -dy), y1 = std::min(static_cast<long>(h), static_cast<long>(h) - dy);
          const long x0 = std::max(0L, -dx), x1 = std::min(static_cast<long>(wd), static_cast<long>(wd) - dx);
          for (long yy = y0; yy < y1; ++yy) {
            double* orow = out + yy * static_cast<long>(wd);
            const double* irow = img + (yy + dy) * static_cast<long>(wd) + dx;
            for (long xx = x0; xx < x1; ++xx) orow[xx] += kv * irow[xx];
          }
        }
      }
    }
  }
}

void conv_backward(const Node& n, const double* w, const Tensor& x, const Tensor& gy, Tensor& gx, double* gw) {
  const std::size_t cin = n.in_shape[0], h = n.in_shape[1], wd = n.in_shape[2];
  const std::size_t k = n.kernel;
  const long pad = static_cast<long>(k / 2);
  for (std::size_t o = 0; o < n.out_channels; ++o) {
    const double* gout = gy.data() + o * h * wd;
    for (std::size_t c = 0; c < cin; ++c) {
      const double* img = x.data() + c * h * wd;
      double* gimg = gx.data() + c * h * wd;
      const double* ker = w + (o * cin + c) * k * k;
      double* gker = gw ? gw + (o * cin + c) * k * k : nullptr;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long dy = static_cast<long>(ky) - pad;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long dx = static_cast<long>(kx) - pad;
          const double kv = ker[ky * k + kx];
          const long y0 = std::max(0L, -dy), y1 = std::min(static_cast<long>(h), static_cast<long>(h) - dy);
          const long x0 = std::max(0L, -dx), x1 = std::min(static_cast<long>(wd), static_cast<long>(wd) - dx);
          double kgrad = 0.0;
          for (long yy = y0; yy < y1; ++yy) {
            const double* grow = gout + yy * static_cast<long>(wd);
            const long off = (yy + dy) * static_cast<long>(wd) + dx;
            double* girow = gimg + off;
            const double* irow = img + off;
            for (long xx = x0; xx < x1; ++xx) {
              girow[xx] += kv * grow[xx];
              kgrad += grow[xx] * irow[xx];
            }
          }
          if (gker) gker[ky * k + kx] += kgrad;
        }
      }
    }
  }
}

void pool_forward(const Node& n, const Tensor& x, Tensor& y) {
  const std::size_t c = n.in_shape[0], h = n.in_shape[1], w = n.in_shape[2];
  const std::size_t s = n.window, oh = h / s, ow = w / s;
  const double scale = 1.0 / static_cast<double>(s * s);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t py = 0; py < s; ++py) {
          for (std::size_t px = 0; px < s; ++px) acc += x[(ch * h + oy * s + py) * w + ox * s + px];
        }
        y[(ch * oh + oy) * ow + ox] = acc * scale;
      }
    }
  }
}

void pool_backward(const Node& n, const Tensor& gy, Tensor& gx) {
  const std::size_t c = n.in_shape[0], h = n.in_shape[1], w = n.in_shape[2];
  const std::size_t s = n.window, oh = h / s, ow = w / s;
  const double scale = 1.0 / static_cast<double>(s * s);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double g = gy[(ch * oh + oy) * ow + ox] * scale;
        for (std::size_t py = 0; py < s; ++py) {
          for (std::size_t px = 0; px < s; ++px) gx[(ch * h + oy * s + py) * w + ox * s + px] += g;
        }
      }
    }
  }
}

}  // namespace

// ---- builder --------------------------------------------------------------

GraphBuilder::GraphBuilder(Shape input_shape) : input_shape_(std::move(input_shape)) {
  if (input_shape_.empty() || input_shape_.size() > 4 || shape_size(input_shape_) == 0) {
    throw ShapeError("invalid graph input shape " + shape_to_string(input_shape_));
  }
}

const Shape& GraphBuilder::shape_of(int index) const {
  if (index == Node::kGraphInput) return input_shape_;
  return nodes_.at(static_cast<std::size_t>(index)).out_shape;
}

GraphBuilder& GraphBuilder::add(Node node, int input) {
  const std::size_t index = nodes_.size();
  if (input == kPrevious) input = static_cast<int>(index) - 1;
  if (input < Node::kGraphInput || input >= static_cast<int>(index)) {
    throw ShapeError(node_label(index, node) + ": input index " + std::to_string(input) + " is not an earlier node");
  }
  node.input = input;
  node.in_shape = shape_of(input);
  const Shape& in = node.in_shape;
  auto fail = [&](const std::string& why) {
    throw ShapeError(node_label(index, node) + ": " + why + ", input shape " + shape_to_string(in));
  };

  switch (node.op) {
    case OpKind::MatMul:
      if (in.size() != 1) fail("matmul needs a rank-1 input");
      if (node.out_features == 0) fail("matmul needs out_features > 0");
      node.out_shape = {node.out_features};
      node.param_count = node.out_features * in[0];
      break;
    case OpKind::BiasAdd:
      if (in.size() != 1 && in.size() != 3) fail("bias_add needs a rank-1 or (C,H,W) input");
      node.out_shape = in;
      node.param_count = in[0];
      break;
    case OpKind::Conv2d:
      if (in.size() != 3) fail("conv2d needs a (C,H,W) input");
      if (node.kernel == 0 || node.kernel % 2 == 0) fail("conv2d kernel must be odd");
      if (node.out_channels == 0) fail("conv2d needs out_channels > 0");
      node.out_shape = {node.out_channels, in[1], in[2]};
      node.param_count = node.out_channels * in[0] * node.kernel * node.kernel;
      break;
    case OpKind::Relu: node.out_shape = in; break;
    case OpKind::AvgPool:
      if (in.size() != 3) fail("avg_pool needs a (C,H,W) input");
      if (node.window == 0 || in[1] % node.window != 0 || in[2] % node.window != 0) {
        fail("avg_pool window must divide the spatial size");
      }
      node.out_shape = {in[0], in[1] / node.window, in[2] / node.window};
      break;
    case OpKind::Flatten: node.out_shape = {shape_size(in)}; break;
    case OpKind::Translate:
      if (in.size() != 2 && in.size() != 3) fail("translate needs an (H,W) or (C,H,W) input");
      node.out_shape = in;
      break;
  }
  node.param_offset = param_total_;
  param_total_ += node.param_count;
  nodes_.push_back(std::move(node));
  return *this;
}

GraphBuilder& GraphBuilder::matmul(std::size_t out_features, int input) {
  Node n;
  n.op = OpKind::MatMul;
  n.out_features = out_features;
  return add(std::move(n), input);
}

GraphBuilder& GraphBuilder::bias_add(int input) {
  Node n;
  n.op = OpKind::BiasAdd;
  return add(std::move(n), input);
}

GraphBuilder& GraphBuilder::conv2d(std::size_t out_channels, std::size_t kernel, int input) {
  Node n;
  n.op = OpKind::Conv2d;
  n.out_channels = out_channels;
  n.kernel = kernel;
  return add(std::move(n), input);
}

GraphBuilder& GraphBuilder::relu(int input) {
  Node n;
  n.op = OpKind::Relu;
  return add(std::move(n), input);
}

GraphBuilder& GraphBuilder::avg_pool(std::size_t window, int input) {
  Node n;
  n.op = OpKind::AvgPool;
  n.window = window;
  return add(std::move(n), input);
}

GraphBuilder& GraphBuilder::flatten(int input) {
  Node n;
  n.op = OpKind::Flatten;
  return add(std::move(n), input);
}

GraphBuilder& GraphBuilder::translate(double tx, double ty, int input) {
  Node n;
  n.op = OpKind::Translate;
  n.offset = {tx, ty};
  return add(std::move(n), input);
}

Graph GraphBuilder::build() const {
  Graph g;
  g.input_shape_ = input_shape_;
  g.nodes_ = nodes_;
  g.weights_.assign(param_total_, 0.0);
  return g;
}

// ---- graph ----------------------------------------------------------------

Graph Graph::with_weights(std::vector<double> weights) const {
  if (weights.size() != weights_.size()) {
    throw ShapeError("weight vector has " + std::to_string(weights.size()) + " entries, graph expects " +
                     std::to_string(weights_.size()));
  }
  Graph g = *this;
  g.weights_ = std::move(weights);
  return g;
}

void Graph::check_input(const Tensor& input) const {
  if (input.shape() != input_shape_) {
    const std::string where = nodes_.empty() ? std::string("graph input") : node_label(0, nodes_.front());
    throw ShapeError(where + ": expected input shape " + shape_to_string(input_shape_) + ", got " +
                     shape_to_string(input.shape()));
  }
}

Trace Graph::forward_trace(const Tensor& input) const {
  check_input(input);
  Trace trace;
  trace.input = input;
  trace.activations.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    const Tensor& x = n.input == Node::kGraphInput ? trace.input : trace.activations[static_cast<std::size_t>(n.input)];
    const double* w = weights_.data() + n.param_offset;
    Tensor y;
    switch (n.op) {
      case OpKind::MatMul:
        y = Tensor(n.out_shape);
        matmul_forward(n, w, x, y);
        break;
      case OpKind::BiasAdd: {
        y = x;
        const std::size_t stride = bias_stride(n);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += w[i / stride];
        break;
      }
      case OpKind::Conv2d:
        y = Tensor(n.out_shape);
        conv_forward(n, w, x, y);
        break;
      case OpKind::Relu:
        y = x;
        for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
        break;
      case OpKind::AvgPool:
        y = Tensor(n.out_shape);
        pool_forward(n, x, y);
        break;
      case OpKind::Flatten: y = x.reshaped(n.out_shape); break;
      case OpKind::Translate: y = translate(x, n.offset.tx, n.offset.ty); break;
    }
    trace.activations.push_back(std::move(y));
  }
  return trace;
}

Tensor Graph::forward(const Tensor& input) const { return forward_trace(input).output(); }

Tensor Graph::backward(const Trace& trace, const Tensor& output_grad, std::span<double> weight_grad) const {
  if (output_grad.shape() != output_shape()) {
    throw ShapeError("output gradient shape " + shape_to_string(output_grad.shape()) + " does not match graph output " +
                     shape_to_string(output_shape()));
  }
  if (!weight_grad.empty() && weight_grad.size() != weights_.size()) {
    throw ShapeError("weight gradient buffer has wrong length");
  }
  if (nodes_.empty()) return output_grad;

  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads.back() = output_grad;
  Tensor input_grad(input_shape_, 0.0);

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    if (!grads[idx]) continue;
    const Node& n = nodes_[idx];
    const Tensor& gy = *grads[idx];
    const Tensor& x = n.input == Node::kGraphInput ? trace.input : trace.activations[static_cast<std::size_t>(n.input)];
    const double* w = weights_.data() + n.param_offset;
    double* gw = weight_grad.empty() ? nullptr : weight_grad.data() + n.param_offset;

    Tensor gx;
    switch (n.op) {
      case OpKind::MatMul:
        gx = Tensor(n.in_shape, 0.0);
        matmul_backward(n, w, x, gy, gx, gw);
        break;
      case OpKind::BiasAdd: {
        gx = gy;
        if (gw) {
          const std::size_t stride = bias_stride(n);
          for (std::size_t i = 0; i < gy.size(); ++i) gw[i / stride] += gy[i];
        }
        break;
      }
      case OpKind::Conv2d:
        gx = Tensor(n.in_shape, 0.0);
        conv_backward(n, w, x, gy, gx, gw);
        break;
      case OpKind::Relu:
        gx = gy;
        for (std::size_t i = 0; i < gx.size(); ++i) {
          if (!(x[i] > 0.0)) gx[i] = 0.0;
        }
        break;
      case OpKind::AvgPool:
        gx = Tensor(n.in_shape, 0.0);
        pool_backward(n, gy, gx);
        break;
      case OpKind::Flatten: gx = gy.reshaped(n.in_shape); break;
      case OpKind::Translate: gx = translate_adjoint(gy, n.offset.tx, n.offset.ty); break;
    }

    Tensor& dst = [&]() -> Tensor& {
      if (n.input == Node::kGraphInput) return input_grad;
      auto& slot = grads[static_cast<std::size_t>(n.input)];
      if (!slot) slot = Tensor(n.in_shape, 0.0);
      return *slot;
    }();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gx[i];
    grads[idx].reset();
  }
  return input_grad;
}

// ---- free functions -------------------------------------------------------

Tensor forward(const Graph& graph, const Tensor& input) { return graph.forward(input); }

namespace {

void check_logits(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1 || logits.size() == 0) {
    throw ShapeError("logits must be a non-empty vector, got " + shape_to_string(logits.shape()));
  }
  if (label >= logits.size()) {
    throw ShapeError("label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) +
                     " classes");
  }
}

}  // namespace

double cross_entropy(const Tensor& logits, std::size_t label) {
  check_logits(logits, label);
  const double mx = *std::max_element(logits.values().begin(), logits.values().end());
  double sum = 0.0;
  for (double v : logits.values()) sum += std::exp(v - mx);
  return std::log(sum) - (logits[label] - mx);
}

Tensor cross_entropy_grad(const Tensor& logits, std::size_t label) {
  check_logits(logits, label);
  const double mx = *std::max_element(logits.values().begin(), logits.values().end());
  Tensor g(logits.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    g[i] = std::exp(logits[i] - mx);
    sum += g[i];
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] /= sum;
  g[label] -= 1.0;
  return g;
}

Tensor input_gradient(const Graph& graph, const Tensor& input, std::size_t label) {
  const Trace trace = graph.forward_trace(input);
  return graph.backward(trace, cross_entropy_grad(trace.output(), label));
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& fn, const Tensor& input, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  Tensor grad(input.shape(), 0.0);
  Tensor probe = input;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = fn(probe);
    probe[i] = orig - h;
    const double down = fn(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

Tensor finite_difference_gradient(const Graph& graph, const Tensor& input, std::size_t label, double h) {
  return finite_difference_gradient([&](const Tensor& x) { return cross_entropy(graph.forward(x), label); }, input, h);
}

}  // namespace anda
