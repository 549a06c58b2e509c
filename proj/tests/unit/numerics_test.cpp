#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vrlr/error.hpp"
#include "vrlr/numerics.hpp"

namespace vrlr {
namespace {

TEST(Elementwise, AddsComponentwise) {
  EXPECT_EQ(elementwise(ElementwiseOp::add, ParamVector{1, 2}, ParamVector{3, 4}), (ParamVector{4, 6}));
}

TEST(Elementwise, ScaleByZero) {
  EXPECT_EQ(elementwise(ElementwiseOp::scale, ParamVector{1, 2}, 0.0), (ParamVector{0, 0}));
}

TEST(Elementwise, DivisionByZeroUsesGuard) {
  const ParamVector r = elementwise(ElementwiseOp::div, ParamVector{1}, ParamVector{0});
  EXPECT_DOUBLE_EQ(r[0], 1.0 / 1e-12);
  EXPECT_DOUBLE_EQ(guarded_divide(1.0, -1e-15), -1e12);
  EXPECT_DOUBLE_EQ(guarded_divide(3.0, 2.0), 1.5);
}

TEST(Elementwise, OtherOps) {
  EXPECT_EQ(elementwise(ElementwiseOp::sub, ParamVector{5, 1}, ParamVector{2, 3}), (ParamVector{3, -2}));
  EXPECT_EQ(elementwise(ElementwiseOp::mul, ParamVector{2, 3}, ParamVector{4, 5}), (ParamVector{8, 15}));
  EXPECT_EQ(elementwise(ElementwiseOp::square, ParamVector{-3, 2}, 0.0), (ParamVector{9, 4}));
  EXPECT_EQ(elementwise(ElementwiseOp::sqrt, ParamVector{9, 4}, 0.0), (ParamVector{3, 2}));
}

TEST(Elementwise, ShapeMismatchNamesBothLengths) {
  try {
    elementwise(ElementwiseOp::add, ParamVector{1, 2}, ParamVector{1, 2, 3});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find('2'), std::string::npos);
    EXPECT_NE(what.find('3'), std::string::npos);
  }
}

TEST(Elementwise, NonFiniteResultIsReported) {
  EXPECT_THROW(elementwise(ElementwiseOp::sqrt, ParamVector{1, -1}, 0.0), NonFiniteError);
  try {
    elementwise(ElementwiseOp::mul, ParamVector{1, 1e200, 1}, ParamVector{1, 1e200, 1});
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(ParamVectorTest, FiniteQuery) {
  ParamVector v{1, 2, 3};
  EXPECT_TRUE(v.all_finite());
  v[2] = std::nan("");
  EXPECT_FALSE(v.all_finite());
  EXPECT_EQ(v.first_non_finite(), 2u);
  EXPECT_THROW(require_finite(v, "test"), NonFiniteError);
}

TEST(Reduce, Examples) {
  EXPECT_EQ(reduce(ReduceOp::sum, ParamVector{1, 2, 3}), 6.0);
  EXPECT_EQ(reduce(ReduceOp::l2norm, ParamVector{3, 4}), 5.0);
  EXPECT_EQ(reduce(ReduceOp::mean, ParamVector{2, 4}), 3.0);
  EXPECT_EQ(reduce(ReduceOp::max, ParamVector{2, 7, 4}), 7.0);
  EXPECT_THROW(reduce(ReduceOp::sum, ParamVector{}), Error);
}

TEST(Reduce, SumIsLeftToRight) {
  RngStream rng(5, 0);
  ParamVector v(1000);
  for (double& x : v) x = rng.standard_normal() * std::pow(10.0, 10.0 * rng.uniform01());
  double acc = 0.0;
  for (double x : v) acc += x;
  EXPECT_EQ(reduce(ReduceOp::sum, v), acc);
  EXPECT_EQ(reduce(ReduceOp::sum, v), reduce(ReduceOp::sum, v));
}

// Known-answer vectors from the Random123 distribution (kat_vectors).
TEST(Philox, KnownAnswers) {
  using Block = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, SameSeedSameSequence) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.uniform01(), b.uniform01());
    ASSERT_EQ(a.standard_normal(), b.standard_normal());
  }
}

TEST(Rng, DistinctStreamsDiffer) {
  RngStream a(42, 0), b(42, 1);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) equal += a.uniform01() == b.uniform01();
  EXPECT_EQ(equal, 0);
  // Uncorrelated to Monte Carlo precision.
  RngStream c(9, 0), d(9, 1);
  double sxy = 0.0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) sxy += c.standard_normal() * d.standard_normal();
  EXPECT_LT(std::fabs(sxy / n), 4.0 / std::sqrt(n));
}

TEST(Rng, OneBlockPerDraw) {
  RngStream r(1, 2);
  r.uniform01();
  r.standard_normal();
  r.index_uniform(10);
  EXPECT_EQ(r.counter(), 3u);
}

TEST(Rng, IndexUniformOfOneIsZero) {
  RngStream r(3, 3);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(r.index_uniform(1), 0u);
  EXPECT_THROW(r.index_uniform(0), Error);
}

TEST(Rng, IndexUniformCoversRange) {
  RngStream r(3, 4);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70'000; ++i) ++hits[r.index_uniform(7)];
  for (int h : hits) EXPECT_NEAR(h, 10'000, 500);
}

TEST(Rng, StandardNormalMoments) {
  RngStream r(2024, 0);
  const int n = 1'000'000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.standard_normal();
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_GE(var, 0.99);
  EXPECT_LE(var, 1.01);
}

TEST(Rng, ForkIsDeterministicAndIndependent) {
  const RngStream base(8, 1);
  RngStream f1 = base.fork(1), f1b = base.fork(1), f2 = base.fork(2);
  EXPECT_EQ(f1.stream_id(), f1b.stream_id());
  EXPECT_NE(f1.stream_id(), f2.stream_id());
  EXPECT_EQ(f1.uniform01(), f1b.uniform01());
}

TEST(Shuffle, IsAPermutation) {
  std::vector<std::size_t> v(100);
  std::iota(v.begin(), v.end(), 0);
  RngStream r(4, 4);
  shuffle(v, r);
  std::vector<std::size_t> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  std::vector<std::size_t> w(100);
  std::iota(w.begin(), w.end(), 0);
  EXPECT_NE(v, w);
}

}  // namespace
}  // namespace vrlr
