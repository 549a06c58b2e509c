#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vrlr/noise.hpp"
#include "vrlr/numerics.hpp"
#include "vrlr/problems.hpp"
#include "vrlr/stream.hpp"

namespace vrlr {

// One SGD step t = 1..T. `x`, `g`, `r` describe the iterate before the update,
// `eps` is the mini-batch mean minus `g`, and `f` is the objective after the
// update, so f of step t is f(x_{t+1}).
struct TraceStep {
  ParamVector x;
  double gamma = 0.0;
  ParamVector lambda;
  ParamVector g;
  ParamVector eps;
  double f = 0.0;
  double r = 0.0;
};

struct TrajectoryTrace {
  std::vector<TraceStep> steps;
  ParamVector x_star;
  double f_star = 0.0;

  std::size_t size() const noexcept { return steps.size(); }
  double max_r() const;
};

// Step-size schedule gamma_t, t >= 1.
struct RateSchedule {
  enum class Kind { constant, inverse_sqrt, inverse_time, power };
  Kind kind = Kind::constant;
  double gamma0 = 0.1;
  double exponent = 1.0;  // used by `power`: gamma0 * t^-exponent

  double at(std::uint64_t t) const;
};

// Runs SGD with the given schedule on `problem`, drawing batches from
// `stream` (which must track the true gradient), for `steps` steps.
TrajectoryTrace record_sgd_trajectory(const Problem& problem, GradientStream& stream,
                                      const RateSchedule& schedule, std::size_t steps);

// Mean of f_t - f* over the first `upto` steps (all steps when upto == 0).
double average_loss_criterion(const TrajectoryTrace& trace, double f_star, std::size_t upto = 0);

// Throws PreconditionError unless gamma_t <= 1/L, gamma_t is nonincreasing and
// every recorded R_t <= M^2, for the first `upto` steps.
void check_lemma1_preconditions(const TrajectoryTrace& trace, double lipschitz, double m_sq,
                                std::size_t upto = 0);

// S_T = M^2 / (2 gamma_T T) + (1/2T) sum gamma_t (1 + L gamma_t) |eps_t|^2
//       - (1/T) sum eps_t . (x_t - L gamma_t^2 g_t - x*),  over the first T = upto steps.
double upper_bound_S_T(const TrajectoryTrace& trace, double lipschitz, double m_sq,
                       std::size_t upto = 0);

// M^2 / (2 gamma_T T) + (sum gamma_t / T) sigma0^2, where sigma0^2 bounds E|eps_t|^2.
double expected_bound_theorem1(std::span<const double> gammas, double m_sq, double sigma0_sq);

// expected_bound_theorem1 for gamma_t = gamma0 t^-a, 0 < a < 1: the exact value and the
// leading-order split M^2 T^(a-1) / (2 gamma0) + gamma0 sigma0^2 T^-a / (1 - a).
struct PowerLawBound {
  double exact = 0.0;
  double decay_term = 0.0;
  double noise_term = 0.0;
};
PowerLawBound theorem1_power_law(double gamma0, double a, std::uint64_t steps, double m_sq,
                                 double sigma0_sq);

// (1/T) [4 M^2 sigma_bar^2 + eta_bar^4 / L^2].
double variance_bound_theorem2(std::uint64_t steps, double m_sq, double sigma_bar_sq,
                               double eta_bar_4, double lipschitz);

// Var(R_{t+1}) = gamma^4 (eta^4 - sigma^4) + 4 gamma^2 sigma^2 d^2 - 4 gamma^3 iota^3 d.
double lyapunov_variance_step(double gamma, double sigma_sq, double iota_3, double eta_4,
                              double d);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
};

// Sample variance of (d - gamma eps)^2 over `draws` one-step draws of eps with
// variance sigma_sq and the given shape.
McEstimate lyapunov_variance_mc(double gamma, double sigma_sq, double d, NoiseShape shape,
                                std::size_t draws, RngStream& rng);

// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

struct StrongConvexityReport {
  double g_sq = 0.0;
  std::vector<double> mean_r;        // index t-1 holds E[R_t]
  std::vector<double> stderr_r;
  std::vector<double> bound;         // max{R_1, G^2/l^2} / t
  bool rate_holds = true;            // mean_r <= bound + 3 stderr at every t
  std::size_t first_violation = 0;   // 1-based t, 0 if none
  double gamma_sq_slope = 0.0;       // log-log slope of gamma_t^2
  double conditional_variance_slope = 0.0;  // slope of E[Var(R_{t+1} | x_t)]
  double marginal_variance_slope = 0.0;     // slope of the across-seed Var(R_t)
  bool corollary_holds = false;      // conditional slope < gamma_sq slope
};

// 1-D quadratic with curvature l, x_1 = sqrt(r1), gamma_t = 1/(t l) and Gaussian
// gradient noise of variance sigma_sq, over `seeds` replicas of `steps` steps.
// G^2 is taken as l^2 max{R_1, sigma^2/l^2} + sigma^2, which bounds E|g-bar_t|^2
// along the whole trajectory. Slopes are fitted over t in [10, steps]; a variance
// that is zero throughout gets slope -infinity.
StrongConvexityReport strong_convexity_rate_check(double l, double sigma_sq, double r1,
                                                  std::size_t steps, std::size_t seeds,
                                                  std::uint64_t base_seed);

// Q_T = sum lambda_t (1 + lambda_t / lambda0) sigma_t^2.
double qt_objective(std::span<const double> lambda, std::span<const double> sigma_sq,
                    double lambda0);

// (mean of 1 / sigma_t^2)^-1.
double inverse_averaged_variance(std::span<const double> sigma_sq);

// lambda_t = (1 + lambda0/2) sigma_tilde^2 / sigma_t^2 - lambda0/2.
std::vector<double> optimal_lambdas_closed_form(std::span<const double> sigma_sq, double lambda0);

struct ConstrainedSolution {
  std::vector<double> lambda;
  double multiplier = 0.0;  // xi in grad Q = xi * 1
  std::size_t iterations = 0;
};

// Minimizes Q_T subject to sum lambda = T by projected gradient descent on the
// hyperplane, starting from lambda = 1.
ConstrainedSolution projected_gradient_oracle(std::span<const double> sigma_sq, double lambda0,
                                              std::size_t iterations = 10'000);

// Feasibility of a lambda sequence for the box 0 < lambda_t <= lambda0.
struct BoxAudit {
  bool feasible = true;
  double min_lambda = 0.0;
  double max_lambda = 0.0;
};
BoxAudit box_audit(std::span<const double> lambda, double lambda0);

struct ConsistencyReport {
  double impact = 0.0;                 // s = (1 + l0/2) / (e - l0/2)
  double max_deviation_sigmoid = 0.0;  // bounded form vs sigmoid form
  double max_deviation_closed_form = 0.0;  // bounded form vs closed-form optimum
};

// Compares the bounded regularizer (1+s)/(1+s sigma_t^2/sigma_bar^2), with the
// matched impact factor, against the sigmoid form (amplitude 1 + 1/e) and the
// closed-form optimum. Deviations are max relative |a - b| / |b|.
ConsistencyReport bounded_regularizer_consistency(std::span<const double> sigma_sq,
                                                  double lambda0);

// Setup shared by the noisy-quadratic Monte Carlo checks.
struct QuadraticRunSetup {
  double curvature = 1.0;
  std::size_t dim = 1;
  double initial_value = 2.0;
  double noise_variance = 1.0;  // per-sample, per-coordinate
  std::size_t batch_size = 1;
  NoiseShape shape = NoiseShape::gaussian;
  std::size_t steps = 100;
  RateSchedule schedule;
};

// Traces for seeds base_seed .. base_seed + seeds - 1.
std::vector<TrajectoryTrace> quadratic_traces(const QuadraticRunSetup& setup, std::size_t seeds,
                                              std::uint64_t base_seed);

struct Lemma1Report {
  std::size_t runs = 0;
  std::size_t checkpoints = 0;
  double min_slack = 0.0;  // min over runs and checkpoints of S_T - average loss
  bool holds = true;
};

// For every trace, M^2 is its max R_t plus 10%; the inequality is checked at
// every `cadence`-th step and at the last step.
Lemma1Report lemma1_audit(std::span<const TrajectoryTrace> traces, double lipschitz,
                          std::size_t cadence);

struct MonteCarloBoundReport {
  double m_sq = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool holds = false;  // estimate <= bound + 3 stderr
};

// Mean of S_T over the traces (common M^2 = max R over all traces plus 10%)
// against expected_bound_theorem1 with sigma0^2 = dim * noise_variance / m.
MonteCarloBoundReport theorem1_monte_carlo(const QuadraticRunSetup& setup, std::size_t seeds,
                                           std::uint64_t base_seed);

// Sample variance of S_T against variance_bound_theorem2; requires a symmetric shape.
MonteCarloBoundReport theorem2_monte_carlo(const QuadraticRunSetup& setup, std::size_t seeds,
                                           std::uint64_t base_seed);

}  // namespace vrlr
