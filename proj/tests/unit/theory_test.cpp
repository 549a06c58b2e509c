#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "vrlr/error.hpp"
#include "vrlr/theory.hpp"

namespace vrlr {
namespace {

TraceStep step(double x, double gamma, double g, double eps, double f) {
  TraceStep s;
  s.x = ParamVector{x};
  s.gamma = gamma;
  s.lambda = ParamVector{1.0};
  s.g = ParamVector{g};
  s.eps = ParamVector{eps};
  s.f = f;
  s.r = x * x;
  return s;
}

TrajectoryTrace one_d(std::vector<TraceStep> steps) {
  TrajectoryTrace t;
  t.steps = std::move(steps);
  t.x_star = ParamVector{0.0};
  return t;
}

TEST(AverageLoss, Examples) {
  TrajectoryTrace t = one_d({step(1, 0.1, 1, 0, 0.0), step(1, 0.1, 1, 0, 0.0)});
  EXPECT_EQ(average_loss_criterion(t, 0.0), 0.0);
  t = one_d({step(1, 0.1, 1, 0, 2.0), step(1, 0.1, 1, 0, 4.0)});
  EXPECT_EQ(average_loss_criterion(t, 0.0), 3.0);
  EXPECT_EQ(average_loss_criterion(t, 0.0, 1), 2.0);
  EXPECT_THROW(average_loss_criterion(one_d({}), 0.0), Error);
}

TEST(AverageLoss, MatchesIndependentAccumulation) {
  QuadraticRunSetup setup;
  setup.steps = 500;
  const TrajectoryTrace t = quadratic_traces(setup, 1, 3).front();
  long double acc = 0.0L;
  for (const auto& s : t.steps) acc += static_cast<long double>(s.f);
  EXPECT_NEAR(average_loss_criterion(t, 0.0), static_cast<double>(acc / t.size()), 1e-12);
}

TEST(UpperBound, NoiseFreeSingleStep) {
  const TrajectoryTrace t = one_d({step(2, 0.25, 2, 0, 0.5)});
  EXPECT_DOUBLE_EQ(upper_bound_S_T(t, 1.0, 9.0), 9.0 / (2 * 0.25));
}

TEST(UpperBound, HandComputedTwoStepTrace) {
  // L = 1, x* = 0, gamma = 0.5: x1 = 2, g1 = 2, eps1 = 0.4; x2 = 2 - 0.5 * 2.4 = 0.8, eps2 = -0.2.
  const TrajectoryTrace t = one_d({step(2.0, 0.5, 2.0, 0.4, 0.32), step(0.8, 0.5, 0.8, -0.2, 0.045)});
  // 4/(2*0.5*2) + (0.5*1.5*0.16 + 0.5*1.5*0.04)/4 - (0.4*(2 - 0.5) - 0.2*(0.8 - 0.2))/2
  EXPECT_NEAR(upper_bound_S_T(t, 1.0, 4.0), 1.7975, 1e-12);
}

TEST(UpperBound, PreconditionsAreChecked) {
  const TrajectoryTrace big_rate = one_d({step(1, 2.0, 1, 0, 0)});
  EXPECT_THROW(upper_bound_S_T(big_rate, 1.0, 4.0), PreconditionError);
  const TrajectoryTrace rising = one_d({step(1, 0.1, 1, 0, 0), step(1, 0.2, 1, 0, 0)});
  EXPECT_THROW(check_lemma1_preconditions(rising, 1.0, 4.0), PreconditionError);
  const TrajectoryTrace outside = one_d({step(3, 0.1, 1, 0, 0)});
  EXPECT_THROW(check_lemma1_preconditions(outside, 1.0, 4.0), PreconditionError);
}

TEST(DescentInequality, InequalityHoldsOnSeededRuns) {
  QuadraticRunSetup setup;
  setup.dim = 3;
  setup.batch_size = 2;
  setup.steps = 150;
  setup.schedule.kind = RateSchedule::Kind::inverse_time;
  setup.schedule.gamma0 = 1.0;
  const auto traces = quadratic_traces(setup, 100, 50);
  const Lemma1Report r = lemma1_audit(traces, setup.curvature, 1);
  EXPECT_TRUE(r.holds);
  EXPECT_GE(r.min_slack, -1e-10);
  EXPECT_EQ(r.runs, 100u);
}

TEST(ExpectedBound, BoundArithmetic) {
  const std::vector<double> g(100, 0.1);
  EXPECT_NEAR(expected_bound_theorem1(g, 1.0, 1.0), 0.15, 1e-15);
  const std::vector<double> c(7, 0.3);
  EXPECT_NEAR(expected_bound_theorem1(c, 2.0, 0.5), 2.0 / (2 * 0.3 * 7) + 0.3 * 0.5, 1e-15);
}

TEST(ExpectedBound, PowerLawLeadingOrderScaling) {
  for (double a : {0.3, 0.5, 0.7}) {
    std::vector<double> T, exact, leading;
    for (double k = 2.0; k <= 5.0; k += 0.5) {
      const auto steps = static_cast<std::uint64_t>(std::pow(10.0, k));
      const PowerLawBound b = theorem1_power_law(0.5, a, steps, 1.0, 1.0);
      T.push_back(static_cast<double>(steps));
      exact.push_back(b.exact);
      leading.push_back(b.decay_term + b.noise_term);
    }
    EXPECT_NEAR(exact.back() / leading.back(), 1.0, 0.05) << a;
    const double slope = fit_loglog_slope(std::span(T).last(3), std::span(exact).last(3));
    EXPECT_NEAR(slope, -std::min(a, 1.0 - a), 0.08) << a;
  }
}

TEST(ExpectedBound, MonteCarloWithinBound) {
  QuadraticRunSetup setup;
  setup.schedule.gamma0 = 0.1;
  const MonteCarloBoundReport r = theorem1_monte_carlo(setup, 200, 1);
  EXPECT_TRUE(r.holds);
  EXPECT_LE(r.estimate, r.bound + 3.0 * r.std_error);
}

TEST(VarianceBound, BoundArithmetic) {
  EXPECT_EQ(variance_bound_theorem2(100, 1.0, 0.0, 0.0, 1.0), 0.0);
  EXPECT_NEAR(variance_bound_theorem2(100, 1.0, 1.0, 3.0, 1.0), 0.07, 1e-15);
}

TEST(VarianceBound, MonteCarloWithinBound) {
  QuadraticRunSetup setup;
  setup.schedule.gamma0 = 0.1;
  const MonteCarloBoundReport r = theorem2_monte_carlo(setup, 500, 1);
  EXPECT_TRUE(r.holds);
}

TEST(VarianceBound, RejectsSkewedNoise) {
  QuadraticRunSetup setup;
  setup.shape = NoiseShape::centered_exponential;
  EXPECT_THROW(theorem2_monte_carlo(setup, 10, 1), PreconditionError);
}

TEST(Lyapunov, ClosedForm) {
  EXPECT_EQ(lyapunov_variance_step(0.1, 0.0, 0.0, 0.0, 2.0), 0.0);
  const double g = 0.3, s2 = 2.0, d = -1.5;
  EXPECT_NEAR(lyapunov_variance_step(g, s2, 0.0, 3 * s2 * s2, d),
              2 * std::pow(g, 4) * s2 * s2 + 4 * g * g * s2 * d * d, 1e-15);
  EXPECT_NEAR(lyapunov_variance_step(0.1, 1.0, 0.0, 3.0, 2.0), 0.1602, 1e-15);
}

TEST(Lyapunov, MonteCarloWithinOnePercent) {
  RngStream rng(60, 0);
  const McEstimate mc = lyapunov_variance_mc(0.1, 1.0, 2.0, NoiseShape::gaussian, 1'000'000, rng);
  EXPECT_NEAR(mc.value, 0.1602, 0.01 * 0.1602);
}

TEST(Lyapunov, SkewedShapeUsesThirdMoment) {
  RngStream rng(61, 0);
  const ShapeMoments sm = shape_moments(NoiseShape::centered_exponential);
  const double closed = lyapunov_variance_step(0.5, 1.0, sm.skewness, sm.kurtosis, 1.0);
  const McEstimate mc = lyapunov_variance_mc(0.5, 1.0, 1.0, NoiseShape::centered_exponential, 1'000'000, rng);
  EXPECT_NEAR(mc.value, closed, 4.0 * mc.std_error);
}

TEST(StrongConvexity, ZeroNoiseFollowsRecursion) {
  const StrongConvexityReport r = strong_convexity_rate_check(1.0, 0.0, 4.0, 50, 3, 1);
  EXPECT_TRUE(r.rate_holds);
  EXPECT_EQ(r.mean_r[0], 4.0);
  // gamma_1 = 1/l sends x to the optimum in one step.
  for (std::size_t t = 1; t < r.mean_r.size(); ++t) EXPECT_EQ(r.mean_r[t], 0.0);
  EXPECT_DOUBLE_EQ(r.bound[3], 1.0);
  EXPECT_TRUE(r.corollary_holds);
}

TEST(StrongConvexity, RateAndCorollaryHold) {
  const StrongConvexityReport r = strong_convexity_rate_check(2.0, 1.0, 4.0, 1000, 200, 9);
  EXPECT_TRUE(r.rate_holds);
  EXPECT_TRUE(r.corollary_holds);
  EXPECT_NEAR(r.gamma_sq_slope, -2.0, 1e-12);
}

TEST(LogLogSlope, ExactPowerLaw) {
  std::vector<double> x, y;
  for (int i = 1; i <= 10; ++i) {
    x.push_back(i);
    y.push_back(3.0 * std::pow(i, -1.7));
  }
  EXPECT_NEAR(fit_loglog_slope(x, y), -1.7, 1e-12);
}

TEST(QtObjective, Examples) {
  const std::vector<double> zero{0, 0}, ones{1, 1};
  EXPECT_EQ(qt_objective(zero, ones, 2.0), 0.0);
  EXPECT_EQ(qt_objective(ones, ones, 2.0), 3.0);
  const std::vector<double> three{1, 1, 1};
  EXPECT_THROW(qt_objective(three, ones, 2.0), ShapeError);
}

TEST(QtObjective, ConvexAlongSegments) {
  RngStream rng(62, 0);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> s2(6), a(6), b(6), mid(6);
    for (std::size_t t = 0; t < 6; ++t) {
      s2[t] = 0.1 + rng.uniform01();
      a[t] = 3.0 * rng.uniform01();
      b[t] = 3.0 * rng.uniform01();
      mid[t] = 0.5 * (a[t] + b[t]);
    }
    const double l0 = 0.5 + 4.0 * rng.uniform01();
    ASSERT_LE(qt_objective(mid, s2, l0), 0.5 * (qt_objective(a, s2, l0) + qt_objective(b, s2, l0)) + 1e-12);
  }
}

TEST(ClosedForm, EqualVariancesGiveOnes) {
  const std::vector<double> s2(5, 0.7);
  for (double l : optimal_lambdas_closed_form(s2, 3.0)) EXPECT_NEAR(l, 1.0, 1e-15);
}

TEST(ClosedForm, HandEvaluatedPair) {
  const std::vector<double> s2{1.0, 2.0};
  EXPECT_NEAR(inverse_averaged_variance(s2), 4.0 / 3.0, 1e-15);
  const auto l = optimal_lambdas_closed_form(s2, 2.0);
  EXPECT_NEAR(l[0], 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(l[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(l[0] + l[1], 2.0, 1e-15);
}

TEST(ClosedForm, RejectsNonPositiveVariance) {
  const std::vector<double> s2{1.0, 0.0};
  EXPECT_THROW(optimal_lambdas_closed_form(s2, 2.0), PreconditionError);
}

TEST(ClosedForm, MatchesOracleAndBeatsFeasiblePerturbations) {
  RngStream rng(63, 0);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t T = 3 + rng.index_uniform(18);
    std::vector<double> s2(T);
    for (double& v : s2) v = 1.0 + 0.1 * (2.0 * rng.uniform01() - 1.0);
    const double l0 = 1.0 + 4.0 * rng.uniform01();
    const auto closed = optimal_lambdas_closed_form(s2, l0);
    const auto oracle = projected_gradient_oracle(s2, l0);
    const double sum = std::accumulate(closed.begin(), closed.end(), 0.0);
    ASSERT_NEAR(sum, static_cast<double>(T), 1e-10);
    for (std::size_t t = 0; t < T; ++t) ASSERT_NEAR(closed[t], oracle.lambda[t], 1e-6);
    const double best = qt_objective(closed, s2, l0);
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> p = closed;
      std::vector<double> d(T);
      double mean = 0.0;
      for (double& v : d) {
        v = 0.1 * rng.standard_normal();
        mean += v;
      }
      mean /= static_cast<double>(T);
      for (std::size_t t = 0; t < T; ++t) p[t] += d[t] - mean;
      ASSERT_LE(best, qt_objective(p, s2, l0) + 1e-12);
    }
  }
}

TEST(BoxAuditTest, Feasibility) {
  const std::vector<double> ok{0.5, 1.5}, bad{-0.1, 2.1};
  EXPECT_TRUE(box_audit(ok, 2.0).feasible);
  const BoxAudit b = box_audit(bad, 2.0);
  EXPECT_FALSE(b.feasible);
  EXPECT_EQ(b.min_lambda, -0.1);
  EXPECT_EQ(b.max_lambda, 2.1);
}

std::vector<double> spread_sequence(double spread) {
  std::vector<double> s(9);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = 1.0 + spread * (static_cast<double>(t) / 4.0 - 1.0);
  return s;
}

TEST(Consistency, ZeroSpread) {
  const ConsistencyReport r = bounded_regularizer_consistency(std::vector<double>(5, 2.0), 2.0);
  EXPECT_NEAR(r.max_deviation_sigmoid, 0.0, 1e-15);
  EXPECT_NEAR(r.max_deviation_closed_form, 0.0, 1e-15);
}

TEST(Consistency, OnePercentSpreadAtLambdaTwo) {
  const ConsistencyReport r = bounded_regularizer_consistency(spread_sequence(0.01), 2.0);
  EXPECT_LT(r.max_deviation_sigmoid, 1e-3);
  EXPECT_NEAR(r.impact, 2.0 / (std::exp(1.0) - 1.0), 1e-15);
}

TEST(Consistency, DeviationIsSecondOrder) {
  for (double l0 : {1.0, 4.0}) {
    const double small = bounded_regularizer_consistency(spread_sequence(0.01), l0).max_deviation_sigmoid;
    const double large = bounded_regularizer_consistency(spread_sequence(0.1), l0).max_deviation_sigmoid;
    EXPECT_GE(large / small, 50.0) << l0;
    EXPECT_LE(large / small, 200.0) << l0;
  }
}

}  // namespace
}  // namespace vrlr
