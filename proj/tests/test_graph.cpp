#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "anda/error.hpp"
#include "anda/graph.hpp"
#include "anda/zoo.hpp"
#include "test_support.hpp"

namespace anda {
namespace {

using test::max_relative_error;
using test::random_tensor;
using test::with_random_weights;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor(Shape{1, 1, 1, 1, 1}), ShapeError);
  EXPECT_EQ(Tensor(Shape{2, 3}).size(), 6u);
}

TEST(Tensor, CheckFiniteNamesElement) {
  Tensor t(Shape{3}, std::vector<double>{0.0, NAN, 1.0});
  try {
    t.check_finite();
    FAIL() << "expected InvariantError";
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Tensor, SignOfZeroIsZero) {
  EXPECT_EQ(sign(0.0), 0.0);
  EXPECT_EQ(sign(-0.0), 0.0);
  EXPECT_EQ(sign(1e-300), 1.0);
  EXPECT_EQ(sign(-3.0), -1.0);
}

TEST(Forward, EmptyGraphIsIdentity) {
  const Graph g = GraphBuilder({3}).build();
  const Tensor x(Shape{3}, std::vector<double>{0.1, -2.0, 5.0});
  EXPECT_EQ(forward(g, x), x);
}

TEST(Forward, IdentityMatmulKeepsInput) {
  Graph g = GraphBuilder({3}).matmul(3).build();
  g = g.with_weights({1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor x(Shape{3}, std::vector<double>{0.25, -1.5, 4.0});
  EXPECT_EQ(forward(g, x), x);
}

TEST(Forward, LinearLayerByHand) {
  // W = [[1, 2], [3, -1], [0, 0.5]], b = [0.1, 0.2, 0.3], x = (2, -1)
  Graph g = GraphBuilder({2}).matmul(3).bias_add().build();
  g = g.with_weights({1, 2, 3, -1, 0, 0.5, 0.1, 0.2, 0.3});
  const Tensor y = forward(g, Tensor(Shape{2}, std::vector<double>{2, -1}));
  EXPECT_DOUBLE_EQ(y[0], 0.0 + 0.1);
  EXPECT_DOUBLE_EQ(y[1], 7.0 + 0.2);
  EXPECT_DOUBLE_EQ(y[2], -0.5 + 0.3);
}

TEST(Forward, ShapeMismatchNamesNode) {
  const Graph g = GraphBuilder({1, 4, 4}).flatten().matmul(2).build();
  try {
    forward(g, Tensor(Shape{1, 5, 5}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("node 0 (flatten)"), std::string::npos) << e.what();
  }
}

TEST(Builder, RejectsInconsistentChain) {
  try {
    GraphBuilder({1, 4, 4}).matmul(3);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("node 0 (matmul)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(GraphBuilder({1, 4, 4}).conv2d(2, 2), ShapeError);
  EXPECT_THROW(GraphBuilder({1, 5, 5}).avg_pool(2), ShapeError);
  EXPECT_THROW(GraphBuilder({4}).relu(3), ShapeError);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  for (std::size_t k : {2u, 5u, 10u}) {
    EXPECT_NEAR(cross_entropy(Tensor(Shape{k}, 0.7), 1), std::log(static_cast<double>(k)), 1e-12);
  }
}

TEST(CrossEntropy, SaturatedTrueClassIsZero) {
  Tensor logits(Shape{3}, std::vector<double>{1e6, 0.0, 0.0});
  EXPECT_NEAR(cross_entropy(logits, 0), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(cross_entropy(logits, 1)));
}

TEST(CrossEntropy, DirectEvaluation) {
  Tensor logits(Shape{3}, std::vector<double>{1, 2, 3});
  const double want = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  EXPECT_NEAR(cross_entropy(logits, 0), want, 1e-12);
  EXPECT_GT(cross_entropy(logits, 2), 0.0);
}

TEST(CrossEntropy, LabelOutOfRange) { EXPECT_THROW(cross_entropy(Tensor(Shape{3}), 3), ShapeError); }

TEST(InputGradient, ConstantGraphHasZeroGradient) {
  // Zero weights: logits are the bias alone.
  Graph g = GraphBuilder({1, 3, 3}).flatten().matmul(4).bias_add().build();
  std::vector<double> w(g.weight_count(), 0.0);
  for (std::size_t i = w.size() - 4; i < w.size(); ++i) w[i] = static_cast<double>(i);
  g = g.with_weights(w);
  std::mt19937_64 rng(3);
  const Tensor grad = input_gradient(g, random_tensor({1, 3, 3}, rng, 0, 1), 2);
  for (double v : grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(InputGradient, LinearSoftmaxClosedForm) {
  std::mt19937_64 rng(11);
  const std::size_t d = 6, k = 4;
  const Graph g = with_random_weights(GraphBuilder({d}).matmul(k).bias_add().build(), rng);
  const Tensor x = random_tensor({d}, rng);
  const std::size_t y = 2;

  // (softmax(Wx + b) - onehot(y))^T W, computed directly from the weights.
  const auto w = g.weights();
  std::vector<double> logits(k);
  for (std::size_t o = 0; o < k; ++o) {
    logits[o] = w[d * k + o];
    for (std::size_t i = 0; i < d; ++i) logits[o] += w[o * d + i] * x[i];
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  std::vector<double> want(d, 0.0);
  for (std::size_t o = 0; o < k; ++o) {
    const double p = std::exp(logits[o] - mx) / z - (o == y ? 1.0 : 0.0);
    for (std::size_t i = 0; i < d; ++i) want[i] += p * w[o * d + i];
  }
  const Tensor got = input_gradient(g, x, y);
  for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(InputGradient, DeterministicAcrossCalls) {
  std::mt19937_64 rng(5);
  const Graph g =
      with_random_weights(GraphBuilder({2, 6, 6}).conv2d(3, 3).relu().avg_pool(2).flatten().matmul(3).build(), rng);
  const Tensor x = random_tensor({2, 6, 6}, rng, 0, 1);
  const Tensor a = input_gradient(g, x, 1);
  const Tensor b = input_gradient(g, x, 1);
  EXPECT_EQ(a, b);
  EXPECT_EQ(forward(g, x), forward(g, x));
}

TEST(FiniteDifference, QuadraticNode) {
  const auto square = [](const Tensor& t) { return t[0] * t[0]; };
  const Tensor g = finite_difference_gradient(square, Tensor(Shape{1}, 3.0), 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-8);
}

TEST(FiniteDifference, LinearSlopeIndependentOfStep) {
  const auto line = [](const Tensor& t) { return 2.5 * t[0] - 4.0 * t[1]; };
  const Tensor x(Shape{2}, std::vector<double>{0.3, -0.7});
  for (double h : {1e-2, 1e-4, 0.5}) {
    const Tensor g = finite_difference_gradient(line, x, h);
    EXPECT_NEAR(g[0], 2.5, 1e-9);
    EXPECT_NEAR(g[1], -4.0, 1e-9);
  }
  EXPECT_THROW(finite_difference_gradient(line, x, 0.0), ConfigError);
}

// Central-difference oracle on each architecture family, with and without a
// translate node in front.
struct FdCase {
  const char* name;
  Graph graph;
};

std::vector<FdCase> fd_cases() {
  std::mt19937_64 rng(21);
  const Shape in{1, 8, 8};
  std::vector<FdCase> cases;
  const auto arch = [&](ArchKind k, std::vector<std::size_t> layers) {
    return with_random_weights(build_graph(Architecture{k, in, 4, std::move(layers)}), rng);
  };
  cases.push_back({"softmax_linear", arch(ArchKind::SoftmaxLinear, {})});
  cases.push_back({"mlp", arch(ArchKind::Mlp, {12, 7})});
  cases.push_back({"small_cnn", arch(ArchKind::SmallCnn, {3, 4})});
  cases.push_back(
      {"translate_linear",
       with_random_weights(GraphBuilder(in).translate(0.5, -0.25).flatten().matmul(4).bias_add().build(), rng)});
  cases.push_back(
      {"translate_cnn",
       with_random_weights(
           GraphBuilder(in).translate(-0.3, 0.3).conv2d(3, 3).bias_add().relu().avg_pool(2).flatten().matmul(4).build(),
           rng)});
  // The input feeds a dead branch (node 3) besides the translated path.
  cases.push_back({"branch", with_random_weights(GraphBuilder(in)
                                                     .flatten()
                                                     .translate(0.25, 0.25, Node::kGraphInput)
                                                     .flatten()
                                                     .matmul(4, 0)
                                                     .matmul(4, 2)
                                                     .build(),
                                                 rng)});
  return cases;
}

TEST(FiniteDifference, MatchesInputGradientOnEveryFamily) {
  std::mt19937_64 rng(33);
  for (const auto& c : fd_cases()) {
    for (std::size_t label = 0; label < 4; label += 3) {
      const Tensor x = random_tensor(c.graph.input_shape(), rng, 0.05, 0.95);
      const Tensor analytic = input_gradient(c.graph, x, label);
      const Tensor numeric = finite_difference_gradient(c.graph, x, label, 1e-4);
      EXPECT_LT(max_relative_error(analytic, numeric), 1e-4) << c.name << " label " << label;
    }
  }
}

TEST(Backward, WeightGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(8);
  const Graph g = with_random_weights(build_graph(Architecture{ArchKind::SmallCnn, {1, 4, 4}, 3, {2}}), rng);
  const Tensor x = random_tensor({1, 4, 4}, rng, 0, 1);
  const Trace tr = g.forward_trace(x);
  std::vector<double> wg(g.weight_count(), 0.0);
  g.backward(tr, cross_entropy_grad(tr.output(), 1), wg);

  const std::vector<double> w0(g.weights().begin(), g.weights().end());
  const auto loss_at = [&](const Tensor& w) { return cross_entropy(g.with_weights(w.vector()).forward(x), 1); };
  const Tensor numeric = finite_difference_gradient(loss_at, Tensor(Shape{w0.size()}, w0), 1e-5);
  EXPECT_LT(max_relative_error(Tensor(Shape{wg.size()}, wg), numeric), 1e-4);
}

}  // namespace
}  // namespace anda
