#include <gtest/gtest.h>

#include <cstring>

#include "hiasa/interaction.hpp"
#include "test_util.hpp"

using namespace hiasa;
using namespace hiasa::nd;
using hiasa::testing::random_tensor;

namespace {

TaskFeatures level0(Graph& g, const Tensor& a, const Tensor& s) { return {g.constant(a), g.constant(s), 0}; }

}  // namespace

TEST(CrossStitch, ScalarExample) {
  Graph g;
  TaskFeatures out = cross_stitch(level0(g, Tensor({1, 1}, 1.0), Tensor({1, 1}, 3.0)), 0.1);
  EXPECT_EQ(out.level, 1);
  EXPECT_NEAR(out.aspect.item(), 1.2, 1e-15);
  EXPECT_NEAR(out.sentiment.item(), 2.8, 1e-15);
}

TEST(CrossStitch, AlphaZeroIsBitwiseIdentity) {
  std::mt19937_64 rng(1);
  Tensor a = random_tensor({4, 3}, rng), s = random_tensor({4, 3}, rng);
  a[0] = -0.0;
  Graph g;
  TaskFeatures out = cross_stitch(level0(g, a, s), 0.0);
  EXPECT_EQ(std::memcmp(out.aspect.value().buffer().data(), a.buffer().data(), a.size() * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(out.sentiment.value().buffer().data(), s.buffer().data(), s.size() * sizeof(double)), 0);
}

TEST(CrossStitch, AlphaHalfGivesMean) {
  std::mt19937_64 rng(2);
  Tensor a = random_tensor({5, 4}, rng), s = random_tensor({5, 4}, rng);
  Graph g;
  TaskFeatures out = cross_stitch(level0(g, a, s), 0.5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(out.aspect.value()[i], (a[i] + s[i]) / 2, 1e-15);
    EXPECT_EQ(out.aspect.value()[i], out.sentiment.value()[i]);
  }
}

TEST(CrossStitch, SumPreservationAndSwapSymmetry) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    const Shape sh{hiasa::testing::random_extent(rng), hiasa::testing::random_extent(rng)};
    Tensor a = random_tensor(sh, rng, -5, 5), s = random_tensor(sh, rng, -5, 5);
    Graph g;
    TaskFeatures out = cross_stitch(level0(g, a, s), alpha);
    TaskFeatures swapped = cross_stitch(level0(g, s, a), alpha);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(out.aspect.value()[i] + out.sentiment.value()[i], a[i] + s[i], 1e-12);
      EXPECT_EQ(swapped.aspect.value()[i], out.sentiment.value()[i]);
      EXPECT_EQ(swapped.sentiment.value()[i], out.aspect.value()[i]);
    }
  }
}

TEST(CrossStitch, GradientReachesOtherTaskOnlyWhenAlphaPositive) {
  for (double alpha : {0.0, 0.2}) {
    std::mt19937_64 rng(8);
    Tensor a = random_tensor({3, 2}, rng), s = random_tensor({3, 2}, rng);
    a.set_requires_grad(true);
    s.set_requires_grad(true);
    Graph g;
    TaskFeatures out = cross_stitch({g.param(a), g.param(s), 0}, alpha);
    g.backward(sum(out.aspect));
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_DOUBLE_EQ(s.grad()[i], alpha);
      EXPECT_DOUBLE_EQ(a.grad()[i], 1.0 - alpha);
    }
  }
}

TEST(CrossStitch, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::vector<Tensor> in{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
  const double err = hiasa::testing::op_grad_error(
      [](Graph&, std::vector<Var>& v) {
        TaskFeatures o = cross_stitch({v[0], v[1], 0}, 0.3);
        return concat({o.aspect, o.sentiment}, 1);
      },
      in, rng);
  EXPECT_LT(err, 1e-9);
}

TEST(CrossStitch, RejectsAlphaOutsideRange) {
  Graph g;
  TaskFeatures in = level0(g, Tensor({1, 1}), Tensor({1, 1}));
  EXPECT_THROW(cross_stitch(in, -0.01), ConfigError);
  EXPECT_THROW(cross_stitch(in, 0.51), ConfigError);
  EXPECT_THROW(cross_stitch(in, std::nan("")), ConfigError);
  EXPECT_NO_THROW(cross_stitch(in, 0.5));
  TaskFeatures bad = level0(g, Tensor({1, 2}), Tensor({2, 1}));
  EXPECT_THROW(cross_stitch(bad, 0.1), ShapeError);
}
