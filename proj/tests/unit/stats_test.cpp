#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vrlr/error.hpp"
#include "vrlr/stats.hpp"

namespace vrlr {
namespace {

std::vector<ParamVector> batch(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<ParamVector> out;
  for (auto r : rows) out.emplace_back(r);
  return out;
}

TEST(MinibatchStats, IdenticalSamples) {
  const BatchStats s = minibatch_stats(batch({{1}, {1}, {1}, {1}}));
  EXPECT_EQ(s.mean_increment[0], 1.0);
  EXPECT_EQ(s.variance[0], 0.0);
  EXPECT_EQ(s.scale_free[0], 0.0);
  EXPECT_EQ(s.batch_size, 4u);
}

TEST(MinibatchStats, HandEvaluatedPair) {
  const BatchStats s = minibatch_stats(batch({{1}, {3}}));
  EXPECT_DOUBLE_EQ(s.mean_increment[0], 2.0);
  EXPECT_DOUBLE_EQ(s.variance[0], 1.0);
  EXPECT_DOUBLE_EQ(s.scale_free[0], 0.25);
}

TEST(MinibatchStats, ZeroGradientGuardPath) {
  const BatchStats s = minibatch_stats(batch({{0}, {0}}));
  EXPECT_EQ(s.mean_increment[0], 0.0);
  EXPECT_EQ(s.variance[0], 0.0);
  EXPECT_EQ(s.scale_free[0], 0.0);
}

TEST(MinibatchStats, TinyMeanIsCapped) {
  const BatchStats s = minibatch_stats(batch({{1}, {-1}}));
  EXPECT_EQ(s.scale_free[0], kScaleFreeCap);
  const double guard = 1e-8;
  EXPECT_EQ(scale_free_variance(1e-20, 0.0, guard), 1e-20 / (guard * guard));
}

TEST(MinibatchStats, Errors) {
  std::vector<ParamVector> empty;
  EXPECT_THROW(minibatch_stats(empty), Error);
  EXPECT_THROW(minibatch_stats(batch({{1, 2}, {1}})), ShapeError);
}

TEST(MinibatchStats, OnePassAgreesWithTwoPass) {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng.index_uniform(50);
    std::vector<ParamVector> inc(m, ParamVector(3));
    for (auto& v : inc) {
      for (std::size_t j = 0; j < 3; ++j) v[j] = 1.0 + (j + 1.0) * rng.standard_normal();
    }
    const BatchStats s = minibatch_stats(inc);
    const ParamVector one = scale_free_one_pass(inc);
    for (std::size_t j = 0; j < 3; ++j) {
      if (std::fabs(s.mean_increment[j]) <= 1e-6) continue;
      EXPECT_NEAR(one[j], s.scale_free[j], 1e-10 * std::max(1.0, s.scale_free[j]));
    }
  }
}

TEST(MinibatchStats, ScaleFree) {
  RngStream rng(12, 0);
  std::vector<ParamVector> inc(10, ParamVector(4));
  for (auto& v : inc) {
    for (double& x : v) x = 0.5 + rng.standard_normal();
  }
  const BatchStats base = minibatch_stats(inc);
  for (double c : {-3.0, 0.25, 7.0}) {
    std::vector<ParamVector> scaled = inc;
    for (auto& v : scaled) {
      for (double& x : v) x *= c;
    }
    const BatchStats s = minibatch_stats(scaled);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(s.scale_free[j], base.scale_free[j], 1e-12 * base.scale_free[j]);
  }
}

TEST(MinibatchStats, GlobalScalarBroadcasts) {
  const BatchStats s = minibatch_stats_global(batch({{1, 0}, {3, 2}}));
  // |v^2| = 1 + 1 = 2, |mean|^2 = 4 + 1 = 5.
  EXPECT_DOUBLE_EQ(s.scale_free[0], 0.4);
  EXPECT_DOUBLE_EQ(s.scale_free[1], 0.4);
}

TEST(Regularizer, EqualRatioGivesOne) {
  RegularizerState st = RegularizerState::create(1, 2.0);
  record_history(st, ParamVector{0.7});
  EXPECT_EQ(regularizer_lambda(ParamVector{0.7}, st)[0], 1.0);
  EXPECT_EQ(bounded_regularizer(0.7, 0.7, 2.0), 1.0);
}

TEST(Regularizer, ZeroVarianceGivesUpperBound) {
  EXPECT_EQ(bounded_regularizer(0.0, 1.0, 2.0), 3.0);
}

TEST(Regularizer, RatioFour) {
  EXPECT_DOUBLE_EQ(bounded_regularizer(4.0, 1.0, 2.0), 1.0 / 3.0);
  // Literal mode divides by the running sum: Omega = 1, rho = 4.
  RegularizerState lit = RegularizerState::create(1, 2.0, NormalizationMode::algorithm_literal);
  record_history(lit, ParamVector{1.0});
  EXPECT_DOUBLE_EQ(regularizer_lambda(ParamVector{4.0}, lit)[0], 1.0 / 3.0);
}

TEST(Regularizer, NoHistoryGivesOne) {
  const RegularizerState st = RegularizerState::create(2, 2.0);
  EXPECT_EQ(regularizer_lambda(ParamVector{5.0, 0.0}, st), (ParamVector{1.0, 1.0}));
}

TEST(Regularizer, ZeroHistoryGivesOne) {
  RegularizerState st = RegularizerState::create(1, 2.0);
  record_history(st, ParamVector{0.0});
  EXPECT_EQ(regularizer_lambda(ParamVector{0.0}, st)[0], 1.0);
}

TEST(Regularizer, BoundsAndMonotonicity) {
  RngStream rng(77, 0);
  for (int i = 0; i < 10'000; ++i) {
    const double ref = std::exp(10.0 * (rng.uniform01() - 0.5));
    const double s = std::exp(6.0 * (rng.uniform01() - 0.5));
    const double rho = 20.0 * ref * rng.uniform01();
    const double l = bounded_regularizer(rho, ref, s);
    ASSERT_GT(l, 0.0);
    ASSERT_LE(l, 1.0 + s);
    ASSERT_LT(bounded_regularizer(rho + 0.1 * ref, ref, s), l);
  }
}

TEST(Regularizer, HomoskedasticIdentityIsExact) {
  RngStream rng(78, 0);
  for (int i = 0; i < 1000; ++i) {
    const double rho = std::exp(20.0 * (rng.uniform01() - 0.5));
    RegularizerState st = RegularizerState::create(1, 2.0);
    for (int t = 0; t < 100; ++t) {
      record_history(st, ParamVector{rho});
      ASSERT_EQ(regularizer_lambda(ParamVector{rho}, st)[0], 1.0);
    }
  }
}

TEST(UpdateHistory, Examples) {
  RegularizerState st = RegularizerState::create(1);
  st = update_history(st, ParamVector{2});
  EXPECT_EQ(st.history[0], 2.0);
  EXPECT_EQ(st.steps, 1u);
  st = update_history(st, ParamVector{4});
  EXPECT_EQ(st.history[0], 6.0);
  EXPECT_EQ(st.steps, 2u);
  EXPECT_EQ(st.history[0] / st.steps, 3.0);
  EXPECT_EQ(st.mean[0], 3.0);
  st = update_history(st, ParamVector{0});
  EXPECT_EQ(st.history[0], 6.0);
  EXPECT_EQ(st.steps, 3u);
  EXPECT_THROW(update_history(st, ParamVector{1, 2}), ShapeError);
}

TEST(Sigmoid, NeutralAmplitudeGivesOne) {
  EXPECT_NEAR(neutral_sigmoid_amplitude(), 1.0 + 1.0 / std::exp(1.0), 1e-15);
  EXPECT_NEAR(sigmoid_regularizer(2.0, 2.0, 2.0, neutral_sigmoid_amplitude()), 1.0, 1e-15);
  EXPECT_NEAR(sigmoid_regularizer(0.3, 0.3, 3.5, neutral_sigmoid_amplitude()), 1.0, 1e-15);
}

TEST(Sigmoid, LargeVarianceLimit) {
  const double a = 1.5, l0 = 3.0;
  EXPECT_NEAR(sigmoid_regularizer(1e12, 1.0, l0, a), a / (1.0 + std::exp(l0 / 2.0)), 1e-10);
}

TEST(Sigmoid, BoundedFormAgreesToSecondOrder) {
  const double l0 = 2.0;
  const double s = impact_from_lambda0(l0);
  EXPECT_NEAR(s, 2.0 / (std::exp(1.0) - 1.0), 1e-15);
  const double bounded = bounded_regularizer(1.1, 1.0, s);
  const double sigmoid = sigmoid_regularizer(1.1, 1.0, l0, neutral_sigmoid_amplitude());
  EXPECT_LT(std::fabs(bounded - sigmoid), 0.01);
  // First-order slopes match: the 1% deviation is far below 1% of the 1% move.
  const double b1 = bounded_regularizer(1.01, 1.0, s);
  const double g1 = sigmoid_regularizer(1.01, 1.0, l0, neutral_sigmoid_amplitude());
  EXPECT_LT(std::fabs(b1 - g1), 1e-4);
}

TEST(Cochran, TwoSampleBatches) {
  RngStream rng(5, 5);
  const CochranEstimate e = cochran_scaling_check(2, 1.0, rng, 1'000'000);
  EXPECT_NEAR(e.mean_batch_variance, 0.5, 0.005);
  EXPECT_DOUBLE_EQ(e.expected_batch_variance, 0.5);
}

TEST(Cochran, SingleSampleHasZeroVariance) {
  RngStream rng(5, 6);
  const CochranEstimate e = cochran_scaling_check(1, 1.0, rng, 1000);
  EXPECT_EQ(e.mean_batch_variance, 0.0);
}

TEST(Cochran, VarianceOfMean) {
  RngStream rng(5, 7);
  const CochranEstimate e = cochran_scaling_check(100, 4.0, rng, 100'000);
  EXPECT_NEAR(e.variance_of_mean, 0.04, 0.04 * 0.05);
}

}  // namespace
}  // namespace vrlr
