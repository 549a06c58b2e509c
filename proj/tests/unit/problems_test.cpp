#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <vector>

#include "vrlr/error.hpp"
#include "vrlr/noise.hpp"
#include "vrlr/optim.hpp"
#include "vrlr/problems.hpp"
#include "vrlr/stats.hpp"
#include "vrlr/stream.hpp"

namespace vrlr {
namespace {

std::shared_ptr<Dataset> table(std::vector<std::vector<double>> rows, std::vector<double> labels) {
  auto d = std::make_shared<Dataset>();
  d->features = RowMatrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      d->features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  d->labels = std::move(labels);
  return d;
}

std::shared_ptr<Dataset> random_regression(std::size_t n, std::size_t dim, std::uint64_t seed) {
  RngStream rng(seed, 0);
  auto d = std::make_shared<Dataset>();
  d->features = RowMatrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  d->labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = rng.standard_normal();
      d->features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      y += (j + 1.0) * v;
    }
    d->labels[i] = y + 0.5 * rng.standard_normal();
  }
  return d;
}

ParamVector random_point(std::size_t dim, RngStream& rng, double scale = 1.0) {
  ParamVector x(dim);
  for (double& v : x) v = scale * rng.standard_normal();
  return x;
}

void gradient_descent(const Problem& p, ParamVector& x, double rate, int steps) {
  for (int i = 0; i < steps; ++i) {
    const ParamVector g = p.gradient(x);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] -= rate * g[j];
  }
}

TEST(Quadratic, AnalyticGradient) {
  QuadraticProblem q(1.0, 1);
  EXPECT_EQ(q.sample_grad(ParamVector{2}, 0), (ParamVector{2}));
  EXPECT_EQ(q.sample_grad(ParamVector{0}, 0), (ParamVector{0}));
  EXPECT_EQ(q.loss(ParamVector{2}), 2.0);
  EXPECT_EQ(*q.optimal_value(), 0.0);
  EXPECT_EQ(*q.lipschitz(), 1.0);
  EXPECT_THROW(QuadraticProblem(0.0, 1), PreconditionError);
}

TEST(Quadratic, BatchMeanVarianceFollowsCentralLimit) {
  QuadraticProblem q(1.0, 1);
  StreamOptions opt;
  opt.batch_size = 4;
  opt.noise = NoiseSchedule::constant_variance(1.0);
  GradientStream stream(q, opt, RngStream(3, 0));
  const int n = 100'000;
  double s = 0.0, s2 = 0.0;
  const ParamVector x{1.0};
  for (int i = 0; i < n; ++i) {
    const StreamBatch b = stream.next(x);
    double mean = 0.0;
    for (const auto& v : b.per_sample) mean += v[0];
    mean /= 4.0;
    s += mean;
    s2 += mean * mean;
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var, 0.25, 0.25 * 0.02);
}

TEST(LinearRegression, SingleSampleGradient) {
  LinearRegressionProblem p(table({{1.0}}, {2.0}));
  EXPECT_EQ(p.sample_grad(ParamVector{0}, 0), (ParamVector{-2}));
}

TEST(LinearRegression, PerfectFitHasZeroGradientAtOptimum) {
  LinearRegressionProblem p(table({{1, 0}, {0, 1}, {1, 1}}, {1, 2, 3}));
  const ParamVector g = p.gradient(*p.optimum());
  for (double v : g) EXPECT_NEAR(v, 0.0, 1e-10);
  EXPECT_NEAR(*p.optimal_value(), 0.0, 1e-20);
}

TEST(LinearRegression, GradientDescentReachesNormalEquationOptimum) {
  LinearRegressionProblem p(random_regression(50, 5, 9), 0.0);
  ParamVector x = p.initial_point();
  gradient_descent(p, x, 1.0 / *p.lipschitz(), 10'000);
  EXPECT_LE(p.loss(x) - *p.optimal_value(), 1e-8);
  EXPECT_GE(p.loss(x) - *p.optimal_value(), -1e-12);
}

TEST(LinearRegression, RidgeEntersLossAndOptimum) {
  auto d = random_regression(30, 3, 10);
  LinearRegressionProblem p(d, 2.0);
  const ParamVector g = p.gradient(*p.optimum());
  for (double v : g) EXPECT_NEAR(v, 0.0, 1e-10);
  EXPECT_THROW(LinearRegressionProblem(std::make_shared<Dataset>(), 0.0), PreconditionError);
}

TEST(LogisticRegression, GradientAtZero) {
  auto d = table({{1.0, -2.0}, {0.5, 3.0}}, {1.0, 0.0});
  LogisticRegressionProblem p(d);
  for (std::size_t i = 0; i < 2; ++i) {
    const ParamVector g = p.sample_grad(ParamVector{0, 0}, i);
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(g[j], -(d->labels[i] - 0.5) * d->features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 1e-15);
    }
  }
}

TEST(LogisticRegression, SeparableLossDecreasesUnderGd) {
  LogisticRegressionProblem p(table({{1.0, 0.5}, {-1.0, -0.5}}, {1.0, 0.0}));
  ParamVector x = p.initial_point();
  const double rate = 1.0 / *p.lipschitz();
  double previous = p.loss(x);
  for (int i = 0; i < 200; ++i) {
    gradient_descent(p, x, rate, 1);
    const double now = p.loss(x);
    ASSERT_LT(now, previous);
    previous = now;
  }
}

TEST(LogisticRegression, RejectsBadLabels) {
  EXPECT_THROW(LogisticRegressionProblem(table({{1.0}}, {2.0})), PreconditionError);
}

TEST(LogisticRegression, AccuracyOnSeparableData) {
  LogisticRegressionProblem p(table({{1.0}, {-1.0}}, {1.0, 0.0}));
  const std::vector<std::size_t> idx{0, 1};
  EXPECT_EQ(*p.accuracy(ParamVector{1.0}, idx), 1.0);
  EXPECT_EQ(*p.accuracy(ParamVector{-1.0}, idx), 0.0);
}

TEST(GradCheck, ConvexModelsAtRandomPoints) {
  RngStream rng(21, 0);
  RngStream data_rng(21, 1);
  QuadraticProblem quad(2.0, 4);
  LinearRegressionProblem lin(random_regression(40, 4, 22), 0.3);
  LogisticRegressionProblem log(std::make_shared<const Dataset>(make_blobs(40, 4, 2, 1.0, data_rng)));
  for (const Problem* p : std::initializer_list<const Problem*>{&quad, &lin, &log}) {
    for (int k = 0; k < 100; ++k) {
      const ParamVector x = random_point(p->dim(), rng);
      const std::size_t i = rng.index_uniform(p->sample_count());
      ASSERT_LT(finite_difference_check(*p, x, i).relative_error, 1e-5) << p->name();
    }
  }
}

TEST(GradCheck, DetectsWrongGradient) {
  // A problem whose gradient is deliberately off by 1% must fail the check.
  class Skewed final : public Problem {
   public:
    std::string_view name() const override { return "skewed"; }
    std::size_t dim() const override { return 2; }
    std::size_t sample_count() const override { return 1; }
    double sample_loss(const ParamVector& x, std::size_t) const override { return x[0] * x[0] + x[1]; }
    ParamVector sample_grad(const ParamVector& x, std::size_t) const override { return {2.02 * x[0], 1.0}; }
    ParamVector initial_point() const override { return {1.0, 1.0}; }
  } skewed;
  EXPECT_GT(finite_difference_check(skewed, ParamVector{1.0, 0.0}, 0).relative_error, 1e-3);
}

TEST(Convexity, MidpointAndLipschitzOnSampledPairs) {
  RngStream rng(23, 0);
  RngStream data_rng(23, 1);
  QuadraticProblem quad(3.0, 3);
  LinearRegressionProblem lin(random_regression(30, 3, 24), 0.1);
  LogisticRegressionProblem log(std::make_shared<const Dataset>(make_blobs(30, 3, 2, 1.0, data_rng)));
  for (const Problem* p : std::initializer_list<const Problem*>{&quad, &lin, &log}) {
    const double L = *p->lipschitz();
    for (int k = 0; k < 200; ++k) {
      const ParamVector a = random_point(p->dim(), rng, 2.0);
      const ParamVector b = random_point(p->dim(), rng, 2.0);
      ParamVector mid(p->dim());
      for (std::size_t j = 0; j < mid.size(); ++j) mid[j] = 0.5 * (a[j] + b[j]);
      ASSERT_LE(p->loss(mid), 0.5 * (p->loss(a) + p->loss(b)) + 1e-12) << p->name();
      const ParamVector ga = p->gradient(a), gb = p->gradient(b);
      double dg = 0.0, dx = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) {
        dg += (ga[j] - gb[j]) * (ga[j] - gb[j]);
        dx += (a[j] - b[j]) * (a[j] - b[j]);
      }
      ASSERT_LE(std::sqrt(dg), L * std::sqrt(dx) * (1.0 + 1e-12)) << p->name();
    }
  }
}

TEST(Mlp, ZeroWeightsZeroInputGivesLn2) {
  auto d = table({{0.0, 0.0, 0.0}}, {1.0});
  MlpProblem mlp(d, {3, 4, 2}, Activation::tanh, 1);
  const ParamVector zero(mlp.dim(), 0.0);
  EXPECT_NEAR(mlp.sample_loss(zero, 0), std::log(2.0), 1e-15);
  const ParamVector g = mlp.sample_grad(zero, 0);
  // The output-layer bias gradient is softmax - onehot: antisymmetric across the two classes.
  const double b0 = g[g.size() - 2], b1 = g[g.size() - 1];
  EXPECT_NEAR(b0, 0.5, 1e-15);
  EXPECT_NEAR(b1, -0.5, 1e-15);
  EXPECT_EQ(b0 + b1, 0.0);
}

TEST(Mlp, LayoutAndInitialization) {
  RngStream rng(30, 0);
  auto d = std::make_shared<const Dataset>(make_blobs(20, 3, 3, 1.0, rng));
  MlpProblem a(d, {3, 5, 3}, Activation::relu, 4);
  MlpProblem b(d, {3, 5, 3}, Activation::relu, 4);
  MlpProblem c(d, {3, 5, 3}, Activation::relu, 5);
  EXPECT_EQ(a.dim(), 3u * 5 + 5 + 5 * 3 + 3);
  EXPECT_EQ(a.initial_point(), b.initial_point());
  EXPECT_NE(a.initial_point(), c.initial_point());
  // First-layer weights lie within 1/sqrt(fan_in).
  for (std::size_t k = 0; k < 15; ++k) EXPECT_LE(std::fabs(a.initial_point()[k]), 1.0 / std::sqrt(3.0));
}

TEST(Mlp, ShapeErrors) {
  RngStream rng(31, 0);
  auto d = std::make_shared<const Dataset>(make_blobs(10, 3, 2, 1.0, rng));
  EXPECT_THROW(MlpProblem(d, {4, 5, 2}, Activation::tanh, 0), ShapeError);
  EXPECT_THROW(MlpProblem(d, {3, 2}, Activation::tanh, 0), PreconditionError);
  MlpProblem ok(d, {3, 5, 2}, Activation::tanh, 0);
  EXPECT_THROW(ok.sample_loss(ParamVector(3), 0), ShapeError);
}

TEST(Mlp, FiniteDifferencesTanh) {
  RngStream rng(32, 0);
  auto d = std::make_shared<const Dataset>(make_blobs(30, 4, 3, 1.0, rng));
  MlpProblem mlp(d, {4, 6, 3}, Activation::tanh, 7);
  for (int k = 0; k < 20; ++k) {
    ParamVector x = mlp.initial_point();
    for (double& v : x) v += 0.3 * rng.standard_normal();
    ASSERT_LT(finite_difference_check(mlp, x, rng.index_uniform(30)).relative_error, 1e-4);
  }
}

TEST(Mlp, BatchedMatchesLooped) {
  RngStream rng(33, 0);
  auto d = std::make_shared<const Dataset>(make_blobs(25, 5, 4, 1.0, rng));
  for (Activation act : {Activation::tanh, Activation::relu}) {
    MlpProblem mlp(d, {5, 7, 6, 4}, act, 8);
    ParamVector x = mlp.initial_point();
    for (double& v : x) v += 0.2 * rng.standard_normal();
    std::vector<std::size_t> idx(25);
    std::iota(idx.begin(), idx.end(), 0);
    const auto batched = mlp.batched_sample_grads(x, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const ParamVector looped = mlp.sample_grad(x, idx[i]);
      for (std::size_t j = 0; j < looped.size(); ++j) {
        ASSERT_NEAR(batched[i][j], looped[j], 1e-10 * std::max(1.0, std::fabs(looped[j])));
      }
    }
  }
}

TEST(Mlp, SgdLearnsTwoBlobs) {
  RngStream rng(34, 0);
  auto d = std::make_shared<const Dataset>(make_blobs(500, 2, 2, 1.5, rng));
  MlpProblem mlp(d, {2, 8, 2}, Activation::tanh, 9);
  OptimizerConfig c;
  c.kind = OptimizerKind::sgd;
  c.learning_rate = 0.1;
  Optimizer opt(c, mlp.initial_point());
  StreamOptions so;
  so.batch_size = 20;
  GradientStream stream(mlp, so, RngStream(35, 0));
  std::vector<std::size_t> all(500);
  std::iota(all.begin(), all.end(), 0);
  double accuracy = 0.0;
  for (int epoch = 0; epoch < 50 && accuracy < 0.95; ++epoch) {
    for (std::size_t b = 0; b < stream.batches_per_epoch(); ++b) opt.step(stream.next(opt.params()).per_sample);
    accuracy = *mlp.accuracy(opt.params(), all);
  }
  EXPECT_GE(accuracy, 0.95);
}

TEST(Blobs, NormalizeUnitL2) {
  RngStream rng(36, 0);
  Dataset d = make_blobs(50, 6, 3, 2.0, rng);
  normalize_rows_unit_l2(d);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    double n = 0.0;
    for (double v : d.row(i)) n += v * v;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
  }
}

TEST(Noise, MeanZeroAndMoments) {
  for (NoiseShape shape : {NoiseShape::gaussian, NoiseShape::uniform, NoiseShape::laplace,
                           NoiseShape::centered_exponential}) {
    RngStream rng(40, static_cast<std::uint64_t>(shape));
    const int n = 1'000'000;
    std::vector<double> z(n);
    for (double& v : z) v = draw_unit(shape, rng);
    double m1 = 0.0;
    for (double v : z) m1 += v;
    m1 /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0, m8 = 0.0;
    for (double v : z) {
      const double c = v - m1;
      m2 += c * c;
      m3 += c * c * c;
      m4 += c * c * c * c;
      m8 += std::pow(c, 8);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m8 /= n;
    const ShapeMoments target = shape_moments(shape);
    EXPECT_LT(std::fabs(m1), 3.0 * std::sqrt(m2 / n)) << to_string(shape);
    EXPECT_NEAR(m2, 1.0, 3.0 * std::sqrt((m4 - m2 * m2) / n)) << to_string(shape);
    EXPECT_NEAR(m4, target.kurtosis, 3.0 * std::sqrt((m8 - m4 * m4) / n)) << to_string(shape);
    EXPECT_NEAR(m3, target.skewness, 0.05 * std::max(1.0, target.skewness)) << to_string(shape);
  }
}

TEST(Noise, ScheduleShapes) {
  NoiseSchedule two = NoiseSchedule::two_level_variance(0.5, 50.0, 3);
  EXPECT_EQ(two.variance_at(0), 0.5);
  EXPECT_EQ(two.variance_at(2), 0.5);
  EXPECT_EQ(two.variance_at(3), 50.0);
  EXPECT_EQ(two.variance_at(6), 0.5);
  NoiseSchedule burst;
  burst.kind = NoiseKind::periodic_burst;
  burst.low = 1.0;
  burst.high = 9.0;
  burst.block = 10;
  burst.burst = 2;
  EXPECT_EQ(burst.variance_at(1), 9.0);
  EXPECT_EQ(burst.variance_at(2), 1.0);
  EXPECT_EQ(burst.variance_at(11), 9.0);
  NoiseSchedule ramp;
  ramp.kind = NoiseKind::ramp;
  ramp.low = 1.0;
  ramp.high = 3.0;
  ramp.ramp_steps = 4;
  EXPECT_EQ(ramp.variance_at(0), 1.0);
  EXPECT_EQ(ramp.variance_at(100), 3.0);
  NoiseSchedule bad = NoiseSchedule::constant_variance(-1.0);
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Noise, MeanOfBatchMoments) {
  const MeanNoiseMoments g = mean_noise_moments(2.0, 4, shape_moments(NoiseShape::gaussian));
  EXPECT_DOUBLE_EQ(g.variance, 0.5);
  EXPECT_DOUBLE_EQ(g.third, 0.0);
  EXPECT_DOUBLE_EQ(g.fourth, 3.0 * 0.25);
}

TEST(Stream, ConstantScheduleGivesSteadyRho) {
  QuadraticProblem q(1.0, 1);
  StreamOptions opt;
  opt.batch_size = 500;
  opt.noise = NoiseSchedule::constant_variance(1.0);
  GradientStream stream(q, opt, RngStream(41, 0));
  std::vector<double> rho;
  for (int t = 0; t < 1000; ++t) rho.push_back(minibatch_stats(stream.next(ParamVector{2.0}).per_sample).scale_free[0]);
  const double mean = std::accumulate(rho.begin(), rho.end(), 0.0) / rho.size();
  double var = 0.0;
  for (double r : rho) var += (r - mean) * (r - mean);
  var /= rho.size() - 1;
  EXPECT_LT(std::sqrt(var) / mean, 0.1);
}

TEST(Stream, TwoLevelScheduleSeparatesRho) {
  QuadraticProblem q(1.0, 1);
  StreamOptions opt;
  opt.batch_size = 100;
  opt.noise = NoiseSchedule::two_level_variance(0.01, 1.0, 20);
  GradientStream stream(q, opt, RngStream(42, 0));
  double low = 0.0, high = 0.0;
  int nl = 0, nh = 0;
  for (int t = 0; t < 2000; ++t) {
    const StreamBatch b = stream.next(ParamVector{2.0});
    const double r = minibatch_stats(b.per_sample).scale_free[0];
    if (b.noise_variance == 1.0) {
      high += r;
      ++nh;
    } else {
      low += r;
      ++nl;
    }
  }
  const double ratio = (high / nh) / (low / nl);
  EXPECT_NEAR(ratio, 100.0, 20.0);
}

TEST(Stream, ZeroNoiseGivesZeroVariance) {
  QuadraticProblem q(1.0, 3);
  StreamOptions opt;
  opt.batch_size = 10;
  GradientStream stream(q, opt, RngStream(43, 0));
  for (int t = 0; t < 10; ++t) {
    const BatchStats s = minibatch_stats(stream.next(ParamVector{1, -2, 3}).per_sample);
    for (double v : s.variance) ASSERT_EQ(v, 0.0);
  }
}

TEST(Stream, EpochCoversEveryIndexOnce) {
  RngStream rng(44, 0);
  auto d = std::make_shared<const Dataset>(make_blobs(23, 2, 2, 1.0, rng));
  LogisticRegressionProblem p(d);
  StreamOptions opt;
  opt.batch_size = 5;
  GradientStream stream(p, opt, RngStream(45, 0));
  EXPECT_EQ(stream.batches_per_epoch(), 4u);
  std::vector<std::size_t> first_epoch;
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<std::size_t> seen;
    std::vector<std::size_t> sizes;
    for (std::size_t b = 0; b < stream.batches_per_epoch(); ++b) {
      const StreamBatch batch = stream.next(p.initial_point());
      EXPECT_EQ(batch.epoch, static_cast<std::uint64_t>(epoch));
      EXPECT_EQ(batch.ends_epoch, b + 1 == stream.batches_per_epoch());
      seen.insert(seen.end(), batch.indices.begin(), batch.indices.end());
      sizes.push_back(batch.indices.size());
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{5, 5, 5, 8}));
    if (epoch == 0) first_epoch = seen;
    else EXPECT_NE(seen, first_epoch);
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < seen.size(); ++i) ASSERT_EQ(seen[i], i);
  }
}

TEST(Stream, RelativeNoiseScalesWithGradient) {
  QuadraticProblem q(1.0, 1);
  StreamOptions opt;
  opt.batch_size = 2000;
  opt.noise = NoiseSchedule::constant_variance(0.04);
  opt.noise.scaling = NoiseScaling::relative;
  GradientStream stream(q, opt, RngStream(46, 0));
  for (double x : {0.5, 5.0}) {
    const BatchStats s = minibatch_stats(stream.next(ParamVector{x}).per_sample);
    EXPECT_NEAR(std::sqrt(s.variance[0]) / x, 0.2, 0.02);
  }
}

}  // namespace
}  // namespace vrlr
