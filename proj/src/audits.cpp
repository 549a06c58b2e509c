#include "vrlr/audits.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include <fmt/format.h>

#include "vrlr/config.hpp"
#include "vrlr/error.hpp"
#include "vrlr/noise.hpp"
#include "vrlr/optim.hpp"
#include "vrlr/problems.hpp"
#include "vrlr/report.hpp"
#include "vrlr/runner.hpp"
#include "vrlr/stats.hpp"
#include "vrlr/theory.hpp"

namespace vrlr {

bool SuiteResult::passed() const noexcept {
  for (const CheckLine& c : checks) {
    if (!c.informational && !c.passed) return false;
  }
  return within_budget();
}

namespace {

using Clock = std::chrono::steady_clock;

std::size_t or_default(std::size_t requested, std::size_t fallback) {
  return requested > 0 ? requested : fallback;
}

double log_uniform(RngStream& rng, double lo, double hi) {
  return lo * std::exp(rng.uniform01() * std::log(hi / lo));
}

double uniform(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); }

// ---------------------------------------------------------------- regularizer

SuiteResult regularizer_suite(const SuiteOptions& opt) {
  SuiteResult out{"regularizer", {}, 0.0, 1.0};
  const std::size_t n = or_default(opt.seeds, 10'000);
  RngStream rng(opt.base_seed, 0x7265);

  std::size_t range_fail = 0, identity_fail = 0, monotone_fail = 0;
  double min_lambda = 1e300, max_excess = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const double reference = log_uniform(rng, 1e-3, 1e3);
    const double rho = reference * 10.0 * rng.uniform01();
    const double s = log_uniform(rng, 1e-3, 1e2);

    const double lambda = bounded_regularizer(rho, reference, s);
    min_lambda = std::min(min_lambda, lambda);
    max_excess = std::max(max_excess, lambda - (1.0 + s));
    if (!(lambda > 0.0 && lambda <= 1.0 + s)) ++range_fail;

    // Identity through the history path: a constant rho for a random number of
    // steps leaves the mean-normalized reference equal to rho.
    RegularizerState state = RegularizerState::create(1, s, NormalizationMode::mean_normalized);
    const std::size_t steps = 1 + rng.index_uniform(50);
    const ParamVector r(1, reference);
    for (std::size_t k = 0; k < steps; ++k) record_history(state, r);
    if (regularizer_lambda(r, state)[0] != 1.0) ++identity_fail;

    const double rho2 = rho + reference * (0.01 + rng.uniform01());
    if (!(bounded_regularizer(rho2, reference, s) < lambda)) ++monotone_fail;
  }
  out.checks.push_back({"lambda in (0, 1+s]", range_fail == 0,
                        fmt::format("{} triples, min lambda {:.3e}, max lambda-(1+s) {:.3e}", n,
                                    min_lambda, max_excess)});
  out.checks.push_back({"lambda == 1 when rho equals its running mean", identity_fail == 0,
                        fmt::format("{} of {} constant-rho histories off by any ulp", identity_fail, n)});
  out.checks.push_back({"lambda strictly decreasing in rho", monotone_fail == 0,
                        fmt::format("{} of {} pairs not strictly decreasing", monotone_fail, n)});
  return out;
}

// ------------------------------------------------------------------- theorem3

SuiteResult theorem3_suite(const SuiteOptions& opt) {
  SuiteResult out{"theorem3", {}, 0.0, 30.0};
  const std::size_t n = or_default(opt.seeds, 50);
  RngStream rng(opt.base_seed, 0x7433);

  double worst_elem = 0.0, worst_sum = 0.0;
  std::size_t infeasible = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t T = 3 + rng.index_uniform(18);
    const double base = log_uniform(rng, 0.1, 10.0);
    const double spread = 0.1 * rng.uniform01();
    const double lambda0 = uniform(rng, 1.0, 5.0);
    std::vector<double> sigma_sq(T);
    for (double& v : sigma_sq) v = base * (1.0 + spread * (2.0 * rng.uniform01() - 1.0));

    const std::vector<double> closed = optimal_lambdas_closed_form(sigma_sq, lambda0);
    const ConstrainedSolution oracle = projected_gradient_oracle(sigma_sq, lambda0);
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      worst_elem = std::max(worst_elem, std::fabs(closed[t] - oracle.lambda[t]));
      sum += closed[t];
    }
    worst_sum = std::max(worst_sum, std::fabs(sum - static_cast<double>(T)));
    if (!box_audit(closed, lambda0).feasible) ++infeasible;
  }
  out.checks.push_back({"closed form matches constrained minimizer", worst_elem <= 1e-6,
                        fmt::format("{} instances, max |closed - oracle| {:.3e} (tol 1e-6)", n,
                                    worst_elem)});
  out.checks.push_back({"sum of lambda equals T", worst_sum <= 1e-10,
                        fmt::format("max |sum - T| {:.3e} (tol 1e-10)", worst_sum)});
  out.checks.push_back({"box 0 < lambda <= lambda0", true,
                        fmt::format("{} of {} unconstrained optima leave the box", infeasible, n),
                        true});
  return out;
}

// -------------------------------------------------------------- lemma1 / MC

QuadraticRunSetup lemma1_setup() {
  QuadraticRunSetup setup;
  setup.curvature = 1.0;
  setup.dim = 2;
  setup.initial_value = 2.0;
  setup.noise_variance = 1.0;
  setup.batch_size = 4;
  setup.steps = 200;
  setup.schedule.kind = RateSchedule::Kind::inverse_sqrt;
  setup.schedule.gamma0 = 0.5;
  return setup;
}

SuiteResult lemma1_suite(const SuiteOptions& opt) {
  SuiteResult out{"lemma1", {}, 0.0, 60.0};
  const std::size_t n = or_default(opt.seeds, 100);
  const QuadraticRunSetup setup = lemma1_setup();
  const std::vector<TrajectoryTrace> traces = quadratic_traces(setup, n, opt.base_seed);
  const Lemma1Report rep = lemma1_audit(traces, setup.curvature, 1);
  out.checks.push_back({"average excess loss <= S_T at every checkpoint", rep.holds,
                        fmt::format("{} runs, {} checkpoints, min slack {:.6g} (tol -1e-10)",
                                    rep.runs, rep.checkpoints, rep.min_slack)});
  return out;
}

QuadraticRunSetup theorem_setup() {
  QuadraticRunSetup setup;
  setup.curvature = 1.0;
  setup.dim = 1;
  setup.initial_value = 2.0;
  setup.noise_variance = 1.0;
  setup.batch_size = 1;
  setup.steps = 100;
  setup.schedule.kind = RateSchedule::Kind::constant;
  setup.schedule.gamma0 = 0.1;
  return setup;
}

CheckLine bound_line(std::string name, const MonteCarloBoundReport& r, std::size_t seeds) {
  return {std::move(name), r.holds,
          fmt::format("{} seeds, estimate {:.6g} +- {:.3g} vs bound {:.6g} (M^2 {:.4g})", seeds,
                      r.estimate, r.std_error, r.bound, r.m_sq)};
}

SuiteResult theorem1_suite(const SuiteOptions& opt) {
  SuiteResult out{"theorem1", {}, 0.0, 300.0};
  const std::size_t n = or_default(opt.seeds, 200);
  out.checks.push_back(bound_line("E[S_T] <= expected-loss bound",
                                  theorem1_monte_carlo(theorem_setup(), n, opt.base_seed), n));
  return out;
}

SuiteResult theorem2_suite(const SuiteOptions& opt) {
  SuiteResult out{"theorem2", {}, 0.0, 300.0};
  const std::size_t n = or_default(opt.seeds, 500);
  out.checks.push_back(bound_line("Var(S_T) <= variance bound",
                                  theorem2_monte_carlo(theorem_setup(), n, opt.base_seed), n));
  return out;
}

// ------------------------------------------------------------------ lyapunov

SuiteResult lyapunov_suite(const SuiteOptions& opt) {
  SuiteResult out{"lyapunov", {}, 0.0, 300.0};
  const double gamma = 0.1, sigma_sq = 1.0, d = 2.0;
  const std::size_t draws = or_default(opt.seeds, 1'000'000);
  RngStream rng(opt.base_seed, 0x1a9);
  const double closed = lyapunov_variance_step(gamma, sigma_sq, 0.0, 3.0 * sigma_sq * sigma_sq, d);
  const McEstimate mc = lyapunov_variance_mc(gamma, sigma_sq, d, NoiseShape::gaussian, draws, rng);
  const double rel = std::fabs(mc.value - closed) / closed;
  out.checks.push_back({"one-step Var(R) closed form vs Monte Carlo", rel <= 0.01,
                        fmt::format("closed {:.6g}, MC {:.6g} +- {:.2g} ({} draws), rel {:.3e} (tol 1e-2)",
                                    closed, mc.value, mc.std_error, mc.draws, rel)});
  return out;
}

SuiteResult strong_convexity_suite(const SuiteOptions& opt) {
  SuiteResult out{"strong_convexity", {}, 0.0, 300.0};
  const std::size_t n = or_default(opt.seeds, 500);
  const StrongConvexityReport r = strong_convexity_rate_check(1.0, 1.0, 4.0, 1000, n, opt.base_seed);
  out.checks.push_back(
      {"E[R_t] <= max{R_1, G^2/l^2} / t for t <= 1000", r.rate_holds,
       r.rate_holds ? fmt::format("{} seeds, G^2 {:.4g}", n, r.g_sq)
                    : fmt::format("{} seeds, first violation at t = {}", n, r.first_violation)});
  out.checks.push_back(
      {"Var(R_t) decays faster than gamma_t^2", r.corollary_holds,
       fmt::format("conditional one-step variance slope {:.4f} vs gamma^2 slope {:.4f}",
                   r.conditional_variance_slope, r.gamma_sq_slope)});
  out.checks.push_back({"marginal Var(R_t) slope", true,
                        fmt::format("{:.4f} over t in [10, 1000]", r.marginal_variance_slope), true});
  return out;
}

// -------------------------------------------------------------------- vr_adam

SuiteResult vr_adam_suite(const SuiteOptions& opt) {
  SuiteResult out{"vr_adam", {}, 0.0, 60.0};
  RngStream rng(opt.base_seed, 0xada);

  // Recursions against directly summed geometric series.
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double b1 = uniform(rng, 0.5, 0.99);
    const double b2 = uniform(rng, 0.9, 0.9999);
    const std::size_t T = 20;
    std::vector<double> s2(T);
    for (double& v : s2) v = log_uniform(rng, 1e-3, 1e3);
    ParamVector u(1, 0.0), v(1, 0.0), w(1, 0.0);
    for (std::size_t t = 1; t <= T; ++t) {
      const AdamVarianceTerms terms = adam_variance_recursions(u, v, w, ParamVector(1, s2[t - 1]), b1, b2);
      u = terms.u;
      v = terms.v;
      w = terms.w;
      double su = 0.0, sv = 0.0, sw = 0.0;
      for (std::size_t k = 1; k <= t; ++k) {
        const double age = static_cast<double>(t - k);
        su += (1.0 - b1 * b1) * std::pow(b1 * b1, age) * s2[k - 1];
        sv += (1.0 - b2 * b2) * std::pow(b2 * b2, age) * s2[k - 1];
        sw += (1.0 - b1 * b2) * std::pow(b1 * b2, age) * s2[k - 1];
      }
      worst = std::max({worst, std::fabs(u[0] - su) / su, std::fabs(v[0] - sv) / sv,
                        std::fabs(w[0] - sw) / sw});
    }
  }
  out.checks.push_back({"u, v, w equal their geometric sums", worst <= 1e-12,
                        fmt::format("200 random 20-step sequences, max rel err {:.3e} (tol 1e-12)",
                                    worst)});

  // Frozen-point Monte Carlo of the bias-corrected Adam increment.
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const std::size_t steps = 500;
  const std::size_t replicas = or_default(opt.seeds, 20'000);
  const std::vector<double> delta = {1.0, -0.5, 2.0, -3.0};
  const std::size_t dim = delta.size();
  std::vector<double> sigma(dim);
  for (std::size_t j = 0; j < dim; ++j) sigma[j] = 0.1 * std::fabs(delta[j]);

  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0), p2_sum(dim, 0.0);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  for (std::size_t r = 0; r < replicas; ++r) {
    RngStream stream(opt.base_seed + 1, r);
    std::vector<double> m1(dim, 0.0), m2(dim, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double g = delta[j] + sigma[j] * stream.standard_normal();
        m1[j] = beta1 * m1[j] + (1.0 - beta1) * g;
        m2[j] = beta2 * m2[j] + (1.0 - beta2) * g * g;
      }
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const double inc = (m1[j] / c1) / (std::sqrt(m2[j] / c2) + eps);
      sum[j] += inc;
      sum_sq[j] += inc * inc;
      p2_sum[j] += m2[j] / c2;
    }
  }

  ParamVector u(dim, 0.0), v(dim, 0.0), w(dim, 0.0), s2(dim);
  for (std::size_t j = 0; j < dim; ++j) s2[j] = sigma[j] * sigma[j];
  AdamVarianceTerms terms;
  for (std::size_t t = 0; t < steps; ++t) {
    terms = adam_variance_recursions(u, v, w, s2, beta1, beta2);
    u = terms.u;
    v = terms.v;
    w = terms.w;
  }
  const double nr = static_cast<double>(replicas);
  double worst_rel = 0.0;
  std::string detail;
  for (std::size_t j = 0; j < dim; ++j) {
    const double mean = sum[j] / nr;
    const double empirical = (sum_sq[j] - nr * mean * mean) / (nr - 1.0);
    const double predicted =
        adam_increment_variance(terms.first[j] / (c1 * c1), terms.second[j] / (c2 * c2),
                                terms.cross[j] / (c1 * c2), mean, p2_sum[j] / nr);
    const double rel = std::fabs(predicted - empirical) / empirical;
    worst_rel = std::max(worst_rel, rel);
    detail += fmt::format("{}g={:+.1f}: pred {:.4e} MC {:.4e}", j ? "; " : "", delta[j], predicted,
                          empirical);
  }
  out.checks.push_back({"Var(increment) combination vs frozen-point MC", worst_rel <= 0.2,
                        fmt::format("{} replicas x {} steps, max rel err {:.3f} (tol 0.2); {}",
                                    replicas, steps, worst_rel, detail)});
  return out;
}

// --------------------------------------------------------------- consistency

SuiteResult consistency_suite(const SuiteOptions&) {
  SuiteResult out{"consistency", {}, 0.0, 10.0};
  auto spread_sequence = [](double spread) {
    std::vector<double> s(11);
    for (std::size_t t = 0; t < s.size(); ++t) {
      s[t] = 1.0 + spread * (2.0 * static_cast<double>(t) / 10.0 - 1.0);
    }
    return s;
  };
  for (double lambda0 : {1.0, 4.0}) {
    const ConsistencyReport small = bounded_regularizer_consistency(spread_sequence(0.01), lambda0);
    const ConsistencyReport large = bounded_regularizer_consistency(spread_sequence(0.1), lambda0);
    const double ratio = large.max_deviation_sigmoid / small.max_deviation_sigmoid;
    out.checks.push_back(
        {fmt::format("bounded vs sigmoid is second order (lambda0 = {})", lambda0),
         ratio >= 50.0 && ratio <= 200.0,
         fmt::format("s {:.4f}, deviation {:.3e} at 1% spread, {:.3e} at 10%, ratio {:.1f} (want [50, 200])",
                     small.impact, small.max_deviation_sigmoid, large.max_deviation_sigmoid, ratio)});
    out.checks.push_back(
        {fmt::format("bounded vs closed-form optimum (lambda0 = {})", lambda0), true,
         fmt::format("deviation {:.3e} at 1% spread, {:.3e} at 10%", small.max_deviation_closed_form,
                     large.max_deviation_closed_form),
         true});
  }
  return out;
}

// -------------------------------------------------------------------- cochran

SuiteResult cochran_suite(const SuiteOptions& opt) {
  SuiteResult out{"cochran", {}, 0.0, 60.0};
  RngStream rng(opt.base_seed, 0xc0c);
  const std::size_t batches = or_default(opt.seeds, 1'000'000);
  const CochranEstimate e = cochran_scaling_check(10, 2.0, rng, batches);
  const bool first = std::fabs(e.mean_batch_variance - e.expected_batch_variance) <=
                     3.0 * e.mean_batch_variance_stderr;
  const bool second = std::fabs(e.variance_of_mean - e.expected_variance_of_mean) <=
                      3.0 * e.variance_of_mean_stderr;
  out.checks.push_back({"E[v^2] = (m-1)/m sigma0^2", first,
                        fmt::format("m 10, {} batches: {:.6g} +- {:.2g} vs {:.6g}", e.batches,
                                    e.mean_batch_variance, e.mean_batch_variance_stderr,
                                    e.expected_batch_variance)});
  out.checks.push_back({"Var(mean) = sigma0^2 / m", second,
                        fmt::format("{:.6g} +- {:.2g} vs {:.6g}", e.variance_of_mean,
                                    e.variance_of_mean_stderr, e.expected_variance_of_mean)});
  return out;
}

// ------------------------------------------------------------------- gradcheck

CheckLine gradcheck_problem(const Problem& problem, double scale, double tolerance,
                            std::size_t points, RngStream& rng) {
  const ParamVector center = problem.initial_point();
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    ParamVector x = center;
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += scale * rng.standard_normal();
    const std::size_t sample = rng.index_uniform(problem.sample_count());
    worst = std::max(worst, finite_difference_check(problem, x, sample).relative_error);
  }
  return {fmt::format("{} ({} params)", problem.name(), problem.dim()), worst < tolerance,
          fmt::format("{} points, max rel err {:.3e} (tol {:.0e})", points, worst, tolerance)};
}

SuiteResult gradcheck_suite(const SuiteOptions& opt) {
  SuiteResult out{"gradcheck", {}, 0.0, 60.0};
  const std::size_t points = or_default(opt.seeds, 100);
  RngStream rng(opt.base_seed, 0x9c);

  RngStream data_rng(opt.base_seed, 0xda7a);
  auto regression = std::make_shared<Dataset>(make_blobs(60, 5, 2, 1.0, data_rng));
  for (std::size_t i = 0; i < regression->rows(); ++i) {
    regression->labels[i] = 0.5 * regression->labels[i] + 0.3 * data_rng.standard_normal();
  }
  auto binary = std::make_shared<const Dataset>(make_blobs(60, 4, 2, 1.0, data_rng));
  auto multi = std::make_shared<const Dataset>(make_blobs(60, 4, 3, 1.0, data_rng));

  QuadraticProblem quadratic(1.5, 5, 1.0);
  LinearRegressionProblem linear(regression, 0.1);
  LogisticRegressionProblem logistic(binary);
  MlpProblem mlp_tanh(multi, {4, 8, 3}, Activation::tanh, 11);
  MlpProblem mlp_relu(multi, {4, 8, 6, 3}, Activation::relu, 12);

  out.checks.push_back(gradcheck_problem(quadratic, 1.0, 1e-5, points, rng));
  out.checks.push_back(gradcheck_problem(linear, 1.0, 1e-5, points, rng));
  out.checks.push_back(gradcheck_problem(logistic, 1.0, 1e-5, points, rng));
  CheckLine tanh_line = gradcheck_problem(mlp_tanh, 0.5, 1e-4, points, rng);
  tanh_line.name += " tanh";
  out.checks.push_back(tanh_line);
  CheckLine relu_line = gradcheck_problem(mlp_relu, 0.5, 1e-4, points, rng);
  relu_line.name += " relu";
  out.checks.push_back(relu_line);
  return out;
}

// ----------------------------------------------------------------- convergence

ExperimentConfig desk_config(std::size_t seeds, std::uint64_t base_seed) {
  ExperimentConfig c;
  c.seeds.clear();
  for (std::size_t i = 0; i < seeds; ++i) c.seeds.push_back(base_seed + i);
  c.steps = 200;
  c.batch_size = 100;
  c.metric_cadence = 1;
  c.record_wall_time = false;
  c.stop_on_convergence = false;
  c.optimizer.learning_rate = 0.01;
  c.optimizer.impact = 2.0;
  return c;
}


CompareSummary sgd_vs_vr(ExperimentConfig config) {
  config.optimizer.kind = OptimizerKind::sgd;
  const std::vector<RunRecord> a = run_experiment(config);
  config.optimizer.kind = OptimizerKind::vr_sgd;
  const std::vector<RunRecord> b = run_experiment(config);
  return compare_report(a, b, CompareMetric::train_loss);
}

CheckLine heteroskedastic_line(std::string name, const CompareSummary& s, bool informational) {
  const bool ok = s.average_win_rate_b >= 0.7 && s.final_median_b < s.final_median_a;
  return {std::move(name), informational ? true : ok,
          fmt::format("{} seeds: avg-loss win-rate {:.2f} (want >= 0.70), final median sgd {:.4g} "
                      "vr {:.4g} (ratio {:.3f})",
                      s.seeds, s.average_win_rate_b, s.final_median_a, s.final_median_b,
                      s.final_median_b / s.final_median_a),
          informational};
}

SuiteResult convergence_suite(const SuiteOptions& opt) {
  SuiteResult out{"convergence", {}, 0.0, 600.0};
  const std::size_t seeds = or_default(opt.seeds, 50);

  ExperimentConfig quad = desk_config(seeds, opt.base_seed);
  quad.name = "desk_quadratic";
  quad.problem.kind = ProblemKind::quadratic;
  quad.problem.dim = 10;
  quad.problem.curvature = 1.0;
  quad.problem.initial_value = 1.0;
  quad.noise = NoiseSchedule::two_level_variance(0.01, 1.0, 20);
  quad.noise.scaling = NoiseScaling::relative;
  out.checks.push_back(heteroskedastic_line("quadratic, two-level noise (ratio 100)",
                                            sgd_vs_vr(quad), false));

  ExperimentConfig logistic = desk_config(seeds, opt.base_seed);
  logistic.name = "desk_logistic";
  logistic.problem.kind = ProblemKind::logistic_regression;
  logistic.problem.dataset.kind = DatasetKind::blobs;
  logistic.problem.dataset.samples = 1000;
  logistic.problem.dataset.dim = 5;
  logistic.problem.dataset.classes = 2;
  logistic.problem.dataset.offset = 0.5;
  logistic.problem.dataset.seed = 7;
  logistic.noise = NoiseSchedule::two_level_variance(1.0, 100.0, 20);
  out.checks.push_back(heteroskedastic_line("logistic regression, two-level noise (ratio 100)",
                                            sgd_vs_vr(logistic), false));

  ExperimentConfig control = quad;
  control.name = "desk_control";
  control.noise = NoiseSchedule::constant_variance(0.01);
  control.noise.scaling = NoiseScaling::relative;
  const CompareSummary c = sgd_vs_vr(control);
  const double ratio = c.final_median_b / c.final_median_a;
  out.checks.push_back({"homoskedastic control: final loss within 5%", std::fabs(ratio - 1.0) <= 0.05,
                        fmt::format("{} seeds: final median sgd {:.4g} vr {:.4g}, ratio {:.4f}",
                                    c.seeds, c.final_median_a, c.final_median_b, ratio)});

  ExperimentConfig absolute = quad;
  absolute.name = "desk_quadratic_absolute";
  absolute.noise.scaling = NoiseScaling::absolute;
  out.checks.push_back(heteroskedastic_line("quadratic, state-independent two-level noise",
                                            sgd_vs_vr(absolute), true));
  return out;
}

using SuiteFn = std::function<SuiteResult(const SuiteOptions&)>;

const std::map<std::string, SuiteFn, std::less<>>& registry() {
  static const std::map<std::string, SuiteFn, std::less<>> r = {
      {"regularizer", regularizer_suite},
      {"theorem3", theorem3_suite},
      {"lemma1", lemma1_suite},
      {"theorem1", theorem1_suite},
      {"theorem2", theorem2_suite},
      {"lyapunov", lyapunov_suite},
      {"strong_convexity", strong_convexity_suite},
      {"vr_adam", vr_adam_suite},
      {"consistency", consistency_suite},
      {"cochran", cochran_suite},
      {"gradcheck", gradcheck_suite},
      {"convergence", convergence_suite},
  };
  return r;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "regularizer", "theorem3", "lemma1",      "theorem1", "theorem2",  "lyapunov",
      "strong_convexity", "vr_adam", "consistency", "cochran", "gradcheck", "convergence"};
  return names;
}

const std::vector<std::string>& theory_suite_names() {
  static const std::vector<std::string> names = {
      "regularizer", "theorem3", "lemma1",  "theorem1",   "theorem2",
      "lyapunov",    "strong_convexity", "vr_adam", "consistency", "cochran"};
  return names;
}

SuiteResult run_suite(std::string_view name, const SuiteOptions& options) {
  const auto it = registry().find(name);
  if (it == registry().end()) {
    throw PreconditionError(fmt::format("unknown audit suite '{}'", name));
  }
  const auto start = Clock::now();
  SuiteResult result = it->second(options);
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

SuiteResult determinism_suite(const std::filesystem::path& fixture_config,
                              const std::filesystem::path& golden_dir) {
  const auto start = Clock::now();
  SuiteResult out{"determinism", {}, 0.0, 60.0};
  const ExperimentConfig config = load_config(fixture_config);
  const std::vector<RunRecord> first = run_experiment(config);
  const std::vector<RunRecord> second = run_experiment(config);
  out.checks.push_back({"two reruns are bit-identical", first == second,
                        fmt::format("{} seeds, {} rows in seed {}", first.size(),
                                    first.empty() ? 0 : first.front().rows.size(),
                                    first.empty() ? 0 : first.front().seed)});

  std::size_t matched = 0;
  std::string mismatch;
  for (const RunRecord& rec : first) {
    const std::filesystem::path csv = golden_dir / fmt::format("seed_{}.csv", rec.seed);
    if (read_text(csv) == run_csv(rec)) {
      ++matched;
    } else if (mismatch.empty()) {
      mismatch = fmt::format("; {} differs", csv.filename().string());
    }
  }
  bool manifests = false;
  try {
    manifests = read_run_outputs(golden_dir) == first;
  } catch (const Error& e) {
    mismatch += fmt::format("; {}", e.what());
  }
  out.checks.push_back(
      {"committed golden run reproduces exactly", matched == first.size() && manifests,
       fmt::format("{} of {} CSVs byte-identical, manifests {}{}", matched, first.size(),
                   manifests ? "equal" : "differ", mismatch)});
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

std::string format_suite(const SuiteResult& r) {
  std::string text;
  for (const CheckLine& c : r.checks) {
    const char* tag = c.informational ? "INFO" : (c.passed ? "PASS" : "FAIL");
    text += fmt::format("  [{}] {:<52} {}\n", tag, c.name, c.detail);
  }
  text += fmt::format("  {} {}: {:.2f} s{}\n", r.passed() ? "PASS" : "FAIL", r.suite, r.seconds,
                      r.budget_seconds > 0.0
                          ? fmt::format(" (budget {:.0f} s{})", r.budget_seconds,
                                        r.within_budget() ? "" : ", exceeded")
                          : std::string());
  return text;
}

}  // namespace vrlr
