#include "vrlr/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "vrlr/stats.hpp"

namespace vrlr {

namespace {

std::size_t resolve_upto(const TrajectoryTrace& trace, std::size_t upto, const char* context) {
  if (trace.steps.empty()) throw PreconditionError(std::string(context) + ": empty trace");
  if (upto == 0) return trace.steps.size();
  if (upto > trace.steps.size()) {
    throw PreconditionError(std::string(context) + ": checkpoint beyond the trace");
  }
  return upto;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double central4 = 0.0;
};

Moments sample_moments(std::span<const double> v) {
  Moments out;
  const double n = static_cast<double>(v.size());
  for (double x : v) out.mean += x;
  out.mean /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : v) {
    const double d = x - out.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  out.variance = v.size() > 1 ? m2 / (n - 1.0) : 0.0;
  out.central4 = m4 / n;
  return out;
}

// Standard error of a sample variance: sqrt((mu4 - sigma^4) / n).
double variance_std_error(const Moments& m, std::size_t n) {
  const double s4 = m.variance * m.variance;
  return std::sqrt(std::max(m.central4 - s4, 0.0) / static_cast<double>(n));
}

}  // namespace

double TrajectoryTrace::max_r() const {
  double best = 0.0;
  for (const auto& s : steps) best = std::max(best, s.r);
  return best;
}

double RateSchedule::at(std::uint64_t t) const {
  if (t == 0) throw PreconditionError("rate schedule: steps are 1-based");
  const double td = static_cast<double>(t);
  switch (kind) {
    case Kind::constant: return gamma0;
    case Kind::inverse_sqrt: return gamma0 / std::sqrt(td);
    case Kind::inverse_time: return gamma0 / td;
    case Kind::power: return gamma0 * std::pow(td, -exponent);
  }
  return gamma0;
}

TrajectoryTrace record_sgd_trajectory(const Problem& problem, GradientStream& stream,
                                      const RateSchedule& schedule, std::size_t steps) {
  const auto x_star = problem.optimum();
  const auto f_star = problem.optimal_value();
  if (!x_star || !f_star) throw PreconditionError("record_sgd_trajectory: optimum must be known");

  TrajectoryTrace trace;
  trace.x_star = *x_star;
  trace.f_star = *f_star;
  trace.steps.reserve(steps);
  ParamVector x = problem.initial_point();
  for (std::size_t t = 1; t <= steps; ++t) {
    StreamBatch batch = stream.next(x);
    if (!batch.true_gradient) {
      throw PreconditionError("record_sgd_trajectory: stream must track the true gradient");
    }
    const BatchStats stats = minibatch_stats(batch.per_sample);
    TraceStep step;
    step.x = x;
    step.gamma = schedule.at(t);
    step.lambda = ParamVector(x.size(), 1.0);
    step.g = *batch.true_gradient;
    step.eps = ParamVector(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      step.eps[j] = stats.mean_increment[j] - step.g[j];
      const double dx = x[j] - trace.x_star[j];
      step.r += dx * dx;
      x[j] -= step.gamma * stats.mean_increment[j];
    }
    step.f = problem.loss(x);
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

double average_loss_criterion(const TrajectoryTrace& trace, double f_star, std::size_t upto) {
  const std::size_t n = resolve_upto(trace, upto, "average_loss_criterion");
  double acc = 0.0;
  for (std::size_t t = 0; t < n; ++t) acc += trace.steps[t].f - f_star;
  return acc / static_cast<double>(n);
}

void check_lemma1_preconditions(const TrajectoryTrace& trace, double lipschitz, double m_sq,
                                std::size_t upto) {
  const std::size_t n = resolve_upto(trace, upto, "upper_bound_S_T");
  if (!(lipschitz > 0.0)) throw PreconditionError("upper_bound_S_T: L must be > 0");
  const double limit = 1.0 / lipschitz;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& s = trace.steps[t];
    if (!(s.gamma > 0.0) || s.gamma > limit) {
      throw PreconditionError("upper_bound_S_T: gamma_" + std::to_string(t + 1) +
                              " violates 0 < gamma <= 1/L");
    }
    if (t > 0 && s.gamma > trace.steps[t - 1].gamma) {
      throw PreconditionError("upper_bound_S_T: gamma_" + std::to_string(t + 1) +
                              " increases; the bound needs a nonincreasing schedule");
    }
    if (s.r > m_sq) {
      throw PreconditionError("upper_bound_S_T: R_" + std::to_string(t + 1) + " exceeds M^2");
    }
  }
}

double upper_bound_S_T(const TrajectoryTrace& trace, double lipschitz, double m_sq,
                       std::size_t upto) {
  const std::size_t n = resolve_upto(trace, upto, "upper_bound_S_T");
  check_lemma1_preconditions(trace, lipschitz, m_sq, n);
  double noise = 0.0;
  double cross = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& s = trace.steps[t];
    const double lg2 = lipschitz * s.gamma * s.gamma;
    double eps_sq = 0.0;
    double dot_term = 0.0;
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      eps_sq += s.eps[j] * s.eps[j];
      dot_term += s.eps[j] * (s.x[j] - lg2 * s.g[j] - trace.x_star[j]);
    }
    noise += s.gamma * (1.0 + lipschitz * s.gamma) * eps_sq;
    cross += dot_term;
  }
  const double T = static_cast<double>(n);
  const double gamma_T = trace.steps[n - 1].gamma;
  return m_sq / (2.0 * gamma_T * T) + noise / (2.0 * T) - cross / T;
}

double expected_bound_theorem1(std::span<const double> gammas, double m_sq, double sigma0_sq) {
  if (gammas.empty()) throw PreconditionError("expected_bound_theorem1: empty schedule");
  double sum = 0.0;
  for (double g : gammas) {
    if (!(g > 0.0)) throw PreconditionError("expected_bound_theorem1: rates must be positive");
    sum += g;
  }
  const double T = static_cast<double>(gammas.size());
  return m_sq / (2.0 * gammas.back() * T) + sum / T * sigma0_sq;
}

PowerLawBound theorem1_power_law(double gamma0, double a, std::uint64_t steps, double m_sq,
                                 double sigma0_sq) {
  if (!(a > 0.0 && a < 1.0)) throw PreconditionError("theorem1_power_law: need 0 < a < 1");
  if (steps == 0) throw PreconditionError("theorem1_power_law: T must be >= 1");
  double sum = 0.0;
  for (std::uint64_t t = 1; t <= steps; ++t) sum += gamma0 * std::pow(static_cast<double>(t), -a);
  const double T = static_cast<double>(steps);
  PowerLawBound out;
  out.exact = m_sq / (2.0 * gamma0 * std::pow(T, -a) * T) + sum / T * sigma0_sq;
  out.decay_term = m_sq * std::pow(T, a - 1.0) / (2.0 * gamma0);
  out.noise_term = gamma0 * sigma0_sq * std::pow(T, -a) / (1.0 - a);
  return out;
}

double variance_bound_theorem2(std::uint64_t steps, double m_sq, double sigma_bar_sq,
                               double eta_bar_4, double lipschitz) {
  if (steps == 0) throw PreconditionError("variance_bound_theorem2: T must be >= 1");
  if (!(lipschitz > 0.0)) throw PreconditionError("variance_bound_theorem2: L must be > 0");
  return (4.0 * m_sq * sigma_bar_sq + eta_bar_4 / (lipschitz * lipschitz)) /
         static_cast<double>(steps);
}

double lyapunov_variance_step(double gamma, double sigma_sq, double iota_3, double eta_4,
                              double d) {
  const double g2 = gamma * gamma;
  return g2 * g2 * (eta_4 - sigma_sq * sigma_sq) + 4.0 * g2 * sigma_sq * d * d -
         4.0 * g2 * gamma * iota_3 * d;
}

McEstimate lyapunov_variance_mc(double gamma, double sigma_sq, double d, NoiseShape shape,
                                std::size_t draws, RngStream& rng) {
  if (draws < 2) throw PreconditionError("lyapunov_variance_mc: need at least 2 draws");
  const double sigma = std::sqrt(sigma_sq);
  std::vector<double> r(draws);
  for (auto& v : r) {
    const double next = d - gamma * sigma * draw_unit(shape, rng);
    v = next * next;
  }
  const Moments m = sample_moments(r);
  return {m.variance, variance_std_error(m, draws), draws};
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw PreconditionError("fit_loglog_slope: need two or more matched points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw PreconditionError("fit_loglog_slope: values must be positive");
    }
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

StrongConvexityReport strong_convexity_rate_check(double l, double sigma_sq, double r1,
                                                  std::size_t steps, std::size_t seeds,
                                                  std::uint64_t base_seed) {
  if (!(l > 0.0)) throw PreconditionError("strong_convexity_rate_check: l must be > 0");
  if (steps < 20 || seeds < 2) {
    throw PreconditionError("strong_convexity_rate_check: need steps >= 20 and seeds >= 2");
  }
  StrongConvexityReport out;
  out.g_sq = l * l * std::max(r1, sigma_sq / (l * l)) + sigma_sq;
  const double cap = std::max(r1, out.g_sq / (l * l));
  const double sigma = std::sqrt(sigma_sq);

  // r[s][t-1] = R_t for replica s; cond[t-1] accumulates Var(R_{t+1} | x_t).
  std::vector<std::vector<double>> r(seeds, std::vector<double>(steps));
  std::vector<double> cond(steps, 0.0);
  for (std::size_t s = 0; s < seeds; ++s) {
    RngStream rng(base_seed + s, 0x5c0ull);
    double x = std::sqrt(r1);
    for (std::size_t t = 1; t <= steps; ++t) {
      r[s][t - 1] = x * x;
      const double gamma = 1.0 / (static_cast<double>(t) * l);
      const double d = x - gamma * l * x;
      cond[t - 1] += lyapunov_variance_step(gamma, sigma_sq, 0.0, 3.0 * sigma_sq * sigma_sq, d);
      x -= gamma * (l * x + sigma * rng.standard_normal());
    }
  }

  const double n = static_cast<double>(seeds);
  std::vector<double> marginal(steps);
  out.mean_r.resize(steps);
  out.stderr_r.resize(steps);
  out.bound.resize(steps);
  std::vector<double> column(seeds);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t s = 0; s < seeds; ++s) column[s] = r[s][t];
    const Moments m = sample_moments(column);
    out.mean_r[t] = m.mean;
    out.stderr_r[t] = std::sqrt(m.variance / n);
    out.bound[t] = cap / static_cast<double>(t + 1);
    marginal[t] = m.variance;
    cond[t] /= n;
    if (out.rate_holds && m.mean > out.bound[t] + 3.0 * out.stderr_r[t]) {
      out.rate_holds = false;
      out.first_violation = t + 1;
    }
  }

  // Fit over t in [10, steps]; the conditional variance at index t-1 belongs to R_{t+1}.
  std::vector<double> ts, g2, cv, mv;
  for (std::size_t t = 10; t <= steps; ++t) {
    const double gamma = 1.0 / (static_cast<double>(t) * l);
    ts.push_back(static_cast<double>(t));
    g2.push_back(gamma * gamma);
    cv.push_back(cond[t - 1]);
    mv.push_back(marginal[t - 1]);
  }
  out.gamma_sq_slope = fit_loglog_slope(ts, g2);
  // Identically zero variance (no noise) decays faster than any power.
  const auto slope_or_floor = [&](const std::vector<double>& y) {
    const bool all_zero = std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; });
    return all_zero ? -std::numeric_limits<double>::infinity() : fit_loglog_slope(ts, y);
  };
  out.conditional_variance_slope = slope_or_floor(cv);
  out.marginal_variance_slope = slope_or_floor(mv);
  out.corollary_holds = out.conditional_variance_slope < out.gamma_sq_slope;
  return out;
}

double qt_objective(std::span<const double> lambda, std::span<const double> sigma_sq,
                    double lambda0) {
  if (lambda.size() != sigma_sq.size()) throw ShapeError("qt_objective", sigma_sq.size(), lambda.size());
  if (!(lambda0 > 0.0)) throw PreconditionError("qt_objective: lambda0 must be > 0");
  double acc = 0.0;
  for (std::size_t t = 0; t < lambda.size(); ++t) {
    acc += lambda[t] * (1.0 + lambda[t] / lambda0) * sigma_sq[t];
  }
  return acc;
}

double inverse_averaged_variance(std::span<const double> sigma_sq) {
  if (sigma_sq.empty()) throw PreconditionError("inverse_averaged_variance: empty sequence");
  double acc = 0.0;
  for (double s : sigma_sq) {
    if (!(s > 0.0)) throw PreconditionError("inverse_averaged_variance: variances must be > 0");
    acc += 1.0 / s;
  }
  return static_cast<double>(sigma_sq.size()) / acc;
}

std::vector<double> optimal_lambdas_closed_form(std::span<const double> sigma_sq, double lambda0) {
  if (!(lambda0 > 0.0)) throw PreconditionError("optimal_lambdas_closed_form: lambda0 must be > 0");
  const double tilde = inverse_averaged_variance(sigma_sq);
  const double half = 0.5 * lambda0;
  std::vector<double> out(sigma_sq.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = (1.0 + half) * tilde / sigma_sq[t] - half;
  return out;
}

ConstrainedSolution projected_gradient_oracle(std::span<const double> sigma_sq, double lambda0,
                                              std::size_t iterations) {
  if (sigma_sq.empty()) throw PreconditionError("projected_gradient_oracle: empty sequence");
  if (!(lambda0 > 0.0)) throw PreconditionError("projected_gradient_oracle: lambda0 must be > 0");
  const double top = *std::max_element(sigma_sq.begin(), sigma_sq.end());
  if (!(top > 0.0)) throw PreconditionError("projected_gradient_oracle: variances must be > 0");
  const std::size_t n = sigma_sq.size();
  // The Hessian is diag(2 sigma_t^2 / lambda0); this step is 1 / its largest entry.
  const double eta = lambda0 / (2.0 * top);

  ConstrainedSolution out;
  out.lambda.assign(n, 1.0);
  std::vector<double> grad(n);
  for (std::size_t k = 0; k < iterations; ++k) {
    double mean_grad = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] = sigma_sq[t] * (1.0 + 2.0 * out.lambda[t] / lambda0);
      mean_grad += grad[t];
    }
    mean_grad /= static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) out.lambda[t] -= eta * (grad[t] - mean_grad);
    out.multiplier = mean_grad;
    out.iterations = k + 1;
  }
  return out;
}

BoxAudit box_audit(std::span<const double> lambda, double lambda0) {
  BoxAudit out;
  if (lambda.empty()) return out;
  out.min_lambda = *std::min_element(lambda.begin(), lambda.end());
  out.max_lambda = *std::max_element(lambda.begin(), lambda.end());
  out.feasible = out.min_lambda > 0.0 && out.max_lambda <= lambda0;
  return out;
}

ConsistencyReport bounded_regularizer_consistency(std::span<const double> sigma_sq,
                                                  double lambda0) {
  ConsistencyReport out;
  out.impact = impact_from_lambda0(lambda0);
  const std::vector<double> closed = optimal_lambdas_closed_form(sigma_sq, lambda0);
  double mean = 0.0;
  for (double s : sigma_sq) mean += s;
  mean /= static_cast<double>(sigma_sq.size());
  const double amplitude = neutral_sigmoid_amplitude();
  for (std::size_t t = 0; t < sigma_sq.size(); ++t) {
    const double bounded = bounded_regularizer(sigma_sq[t], mean, out.impact);
    const double sigmoid = sigmoid_regularizer(sigma_sq[t], mean, lambda0, amplitude);
    out.max_deviation_sigmoid =
        std::max(out.max_deviation_sigmoid, std::fabs(bounded - sigmoid) / std::fabs(sigmoid));
    out.max_deviation_closed_form = std::max(out.max_deviation_closed_form,
                                             std::fabs(bounded - closed[t]) / std::fabs(closed[t]));
  }
  return out;
}

std::vector<TrajectoryTrace> quadratic_traces(const QuadraticRunSetup& setup, std::size_t seeds,
                                              std::uint64_t base_seed) {
  const QuadraticProblem problem(setup.curvature, setup.dim, setup.initial_value);
  StreamOptions options;
  options.batch_size = setup.batch_size;
  options.noise = NoiseSchedule::constant_variance(setup.noise_variance, setup.shape);
  options.track_true_gradient = true;
  std::vector<TrajectoryTrace> traces;
  traces.reserve(seeds);
  for (std::size_t s = 0; s < seeds; ++s) {
    GradientStream stream(problem, options, RngStream(base_seed + s, 0));
    traces.push_back(record_sgd_trajectory(problem, stream, setup.schedule, setup.steps));
  }
  return traces;
}

Lemma1Report lemma1_audit(std::span<const TrajectoryTrace> traces, double lipschitz,
                          std::size_t cadence) {
  if (cadence == 0) throw PreconditionError("lemma1_audit: cadence must be >= 1");
  Lemma1Report out;
  out.min_slack = std::numeric_limits<double>::infinity();
  for (const auto& trace : traces) {
    const double m_sq = trace.max_r() * 1.1;
    const std::size_t n = trace.size();
    for (std::size_t upto = 1; upto <= n; ++upto) {
      if (upto % cadence != 0 && upto != n) continue;
      const double slack = upper_bound_S_T(trace, lipschitz, m_sq, upto) -
                           average_loss_criterion(trace, trace.f_star, upto);
      out.min_slack = std::min(out.min_slack, slack);
      ++out.checkpoints;
    }
    ++out.runs;
  }
  out.holds = out.runs > 0 && out.min_slack >= -1e-10;
  return out;
}

namespace {

double common_m_sq(const std::vector<TrajectoryTrace>& traces) {
  double best = 0.0;
  for (const auto& tr : traces) best = std::max(best, tr.max_r());
  return best * 1.1;
}

std::vector<double> s_t_values(const std::vector<TrajectoryTrace>& traces, double lipschitz,
                               double m_sq) {
  std::vector<double> out;
  out.reserve(traces.size());
  for (const auto& tr : traces) out.push_back(upper_bound_S_T(tr, lipschitz, m_sq));
  return out;
}

}  // namespace

MonteCarloBoundReport theorem1_monte_carlo(const QuadraticRunSetup& setup, std::size_t seeds,
                                           std::uint64_t base_seed) {
  if (seeds < 2) throw PreconditionError("theorem1_monte_carlo: need at least 2 seeds");
  const auto traces = quadratic_traces(setup, seeds, base_seed);
  MonteCarloBoundReport out;
  out.m_sq = common_m_sq(traces);
  const std::vector<double> s = s_t_values(traces, setup.curvature, out.m_sq);
  const Moments m = sample_moments(s);
  out.estimate = m.mean;
  out.std_error = std::sqrt(m.variance / static_cast<double>(seeds));
  std::vector<double> gammas(setup.steps);
  for (std::size_t t = 0; t < setup.steps; ++t) gammas[t] = setup.schedule.at(t + 1);
  const double sigma0_sq = static_cast<double>(setup.dim) * setup.noise_variance /
                           static_cast<double>(setup.batch_size);
  out.bound = expected_bound_theorem1(gammas, out.m_sq, sigma0_sq);
  out.holds = out.estimate <= out.bound + 3.0 * out.std_error;
  return out;
}

MonteCarloBoundReport theorem2_monte_carlo(const QuadraticRunSetup& setup, std::size_t seeds,
                                           std::uint64_t base_seed) {
  if (seeds < 2) throw PreconditionError("theorem2_monte_carlo: need at least 2 seeds");
  const ShapeMoments shape = shape_moments(setup.shape);
  if (shape.skewness != 0.0) {
    throw PreconditionError("theorem2_monte_carlo: needs a symmetric noise shape");
  }
  const auto traces = quadratic_traces(setup, seeds, base_seed);
  MonteCarloBoundReport out;
  out.m_sq = common_m_sq(traces);
  const std::vector<double> s = s_t_values(traces, setup.curvature, out.m_sq);
  const Moments m = sample_moments(s);
  out.estimate = m.variance;
  out.std_error = variance_std_error(m, seeds);

  // Moments of |eps|^2 for eps the mean of m draws in each of `dim` coordinates.
  const MeanNoiseMoments coord = mean_noise_moments(setup.noise_variance, setup.batch_size, shape);
  const double d = static_cast<double>(setup.dim);
  const double sigma_bar_sq = d * coord.variance;
  const double eta_bar_4 = d * coord.fourth + d * (d - 1.0) * coord.variance * coord.variance;
  out.bound = variance_bound_theorem2(setup.steps, out.m_sq, sigma_bar_sq, eta_bar_4,
                                      setup.curvature);
  out.holds = out.estimate <= out.bound + 3.0 * out.std_error;
  return out;
}

}  // namespace vrlr
