#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "anda/augment.hpp"
#include "anda/error.hpp"
#include "anda/graph.hpp"
#include "test_support.hpp"

namespace anda {
namespace {

using test::random_tensor;

bool has_zero(const TranslationGrid& g) {
  for (const auto& o : g.offsets) {
    if (o.tx == 0.0 && o.ty == 0.0) return true;
  }
  return false;
}

TEST(TranslationGrid, TwentyFiveAtPointThree) {
  const TranslationGrid g = translation_offsets(25, 0.3);
  const std::vector<double> axis{-0.3, -0.15, 0.0, 0.15, 0.3};
  ASSERT_EQ(g.count(), 25u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_EQ(g.offsets[i * 5 + j].tx, axis[i]);
      EXPECT_EQ(g.offsets[i * 5 + j].ty, axis[j]);
    }
  }
}

TEST(TranslationGrid, SingleOffsetIsIdentity) {
  const TranslationGrid g = translation_offsets(1, 0.7);
  ASSERT_EQ(g.count(), 1u);
  EXPECT_EQ(g.offsets[0], (Offset{0.0, 0.0}));
}

TEST(TranslationGrid, EvenSideHasNoZero) {
  EXPECT_FALSE(has_zero(translation_offsets(16, 0.3)));
  EXPECT_FALSE(has_zero(translation_offsets(4, 0.3)));
  EXPECT_FALSE(has_zero(translation_offsets(36, 0.5)));
}

TEST(TranslationGrid, ZeroPresentExactlyForOddSide) {
  for (std::size_t side = 1; side <= 7; ++side) {
    EXPECT_EQ(has_zero(translation_offsets(side * side, 0.4)), side % 2 == 1) << side;
  }
}

TEST(TranslationGrid, IncludeIdentityAppendsZeroForEvenSide) {
  const TranslationGrid g = translation_offsets(16, 0.3, true);
  EXPECT_EQ(g.count(), 17u);
  EXPECT_EQ(g.offsets.back(), (Offset{0.0, 0.0}));
  EXPECT_EQ(translation_offsets(25, 0.3, true).count(), 25u);
}

TEST(TranslationGrid, RangeAndShapeProperties) {
  for (std::size_t side = 2; side <= 7; ++side) {
    for (double a : {0.0, 0.1, 0.3, 1.0, 2.0}) {
      const TranslationGrid g = translation_offsets(side * side, a);
      ASSERT_EQ(g.count(), side * side);
      double mx = 0.0;
      std::set<double> xs, ys;
      for (const auto& o : g.offsets) {
        mx = std::max({mx, std::abs(o.tx), std::abs(o.ty)});
        xs.insert(o.tx);
        ys.insert(o.ty);
        EXPECT_LE(std::abs(o.tx), 2.0);
      }
      EXPECT_EQ(mx, a);
      if (a > 0.0) {
        EXPECT_EQ(xs.size(), side);
        EXPECT_EQ(ys.size(), side);
      }
      // Row-major Cartesian product: tx constant within each run of `side`.
      for (std::size_t i = 0; i < g.count(); ++i) EXPECT_EQ(g.offsets[i].tx, g.offsets[(i / side) * side].tx);
    }
  }
}

TEST(TranslationGrid, RejectsBadArguments) {
  EXPECT_THROW(translation_offsets(0, 0.3), ConfigError);
  EXPECT_THROW(translation_offsets(2, 0.3), ConfigError);
  EXPECT_THROW(translation_offsets(24, 0.3), ConfigError);
  EXPECT_THROW(translation_offsets(25, -0.1), ConfigError);
  EXPECT_THROW(translation_offsets(25, 2.5), ConfigError);
  EXPECT_THROW(translation_offsets(25, NAN), ConfigError);
}

TEST(Translate, ZeroOffsetIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({2, 5, 7}, rng);
  EXPECT_EQ(translate(x, 0.0, 0.0), x);
}

TEST(Translate, OnePixelRightWithZeroFill) {
  const Tensor x(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  // W = 2, so tx = 1 is one pixel.
  const Tensor y = translate(x, 1.0, 0.0);
  EXPECT_EQ(y, Tensor(Shape{2, 2}, std::vector<double>{0, 1, 0, 3}));
  EXPECT_EQ(translate(x, 0.0, 1.0), Tensor(Shape{2, 2}, std::vector<double>{0, 0, 1, 2}));
}

TEST(Translate, PixelShiftRoundsHalfUp) {
  EXPECT_EQ(pixel_shift(0.3, 16), 2);    // 2.4
  EXPECT_EQ(pixel_shift(0.15, 16), 1);   // 1.2
  EXPECT_EQ(pixel_shift(0.25, 4), 1);    // 0.5 -> 1
  EXPECT_EQ(pixel_shift(-0.25, 4), 0);   // -0.5 -> 0
  EXPECT_EQ(pixel_shift(-0.3, 16), -2);  // -2.4
  EXPECT_EQ(pixel_shift(2.0, 9), 9);
}

TEST(Translate, RoundTripPreservesInterior) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({1, 10, 10}, rng);
  const double tx = 0.4, ty = -0.2;  // (2, -1) pixels
  const Tensor back = translate(translate(x, tx, ty), -tx, -ty);
  const long dx = pixel_shift(tx, 10), dy = pixel_shift(ty, 10);
  for (long r = 0; r < 10; ++r) {
    for (long c = 0; c < 10; ++c) {
      const bool interior = c + dx >= 0 && c + dx < 10 && r + dy >= 0 && r + dy < 10;
      const double v = back[static_cast<std::size_t>(r * 10 + c)];
      if (interior) {
        EXPECT_EQ(v, x[static_cast<std::size_t>(r * 10 + c)]);
      } else {
        EXPECT_EQ(v, 0.0);
      }
    }
  }
}

TEST(Translate, AdjointInnerProduct) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> off(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_tensor({2, 6, 9}, rng);
    const Tensor g = random_tensor({2, 6, 9}, rng);
    const double tx = off(rng), ty = off(rng);
    const double lhs = dot(translate(x, tx, ty).values(), g.values());
    const double rhs = dot(x.values(), translate_adjoint(g, tx, ty).values());
    EXPECT_NEAR(lhs, rhs, 1e-12) << tx << "," << ty;
  }
}

TEST(Translate, LinearAndEnergyNonIncreasing) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor({7, 7}, rng);
    const Tensor b = random_tensor({7, 7}, rng);
    const double tx = 0.3 * (trial % 7) - 0.9, ty = 0.2 * (trial % 5) - 0.4;
    Tensor sum = a;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = 2.0 * a[i] - 3.0 * b[i];
    const Tensor ta = translate(a, tx, ty), tb = translate(b, tx, ty), ts = translate(sum, tx, ty);
    for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_NEAR(ts[i], 2.0 * ta[i] - 3.0 * tb[i], 1e-12);
    EXPECT_LE(dot(ta.values(), ta.values()), dot(a.values(), a.values()));
  }
}

TEST(Translate, ClampsOutOfRangeOffsets) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({4, 4}, rng);
  EXPECT_EQ(translate(x, 5.0, 0.0), translate(x, 2.0, 0.0));
  EXPECT_EQ(translate(x, 2.0, 0.0), Tensor(Shape{4, 4}));
  EXPECT_THROW(translate(x, NAN, 0.0), ConfigError);
}

TEST(Translate, GradientThroughGraphEqualsAdjoint) {
  std::mt19937_64 rng(6);
  const Shape in{1, 6, 6};
  const Graph plain = test::with_random_weights(GraphBuilder(in).flatten().matmul(3).bias_add().build(), rng);
  const std::vector<double> w(plain.weights().begin(), plain.weights().end());
  const Graph shifted = GraphBuilder(in).translate(0.34, -0.34).flatten().matmul(3).bias_add().build().with_weights(w);
  const Tensor x = random_tensor(in, rng, 0, 1);
  const Tensor via_graph = input_gradient(shifted, x, 1);
  const Tensor via_adjoint = translate_adjoint(input_gradient(plain, translate(x, 0.34, -0.34), 1), 0.34, -0.34);
  EXPECT_EQ(via_graph, via_adjoint);
}

}  // namespace
}  // namespace anda
