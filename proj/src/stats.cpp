#include "vrlr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vrlr {

RegularizerState RegularizerState::create(std::size_t dim, double impact, NormalizationMode mode,
                                          double guard) {
  if (!(impact >= 0.0)) throw PreconditionError("regularizer: impact factor must be >= 0");
  if (!(guard > 0.0)) throw PreconditionError("regularizer: guard must be positive");
  RegularizerState state;
  state.impact = impact;
  state.history = ParamVector(dim, 0.0);
  state.mean = ParamVector(dim, 0.0);
  state.mode = mode;
  state.guard = guard;
  return state;
}

double scale_free_variance(double variance, double mean, double guard) {
  if (variance <= 0.0) return 0.0;
  const double denom = std::max(mean * mean, guard * guard);
  return std::min(variance / denom, kScaleFreeCap);
}

namespace {

void check_batch(std::span<const ParamVector> increments, const char* context) {
  if (increments.empty()) throw PreconditionError(std::string(context) + ": empty mini-batch");
  const std::size_t dim = increments.front().size();
  for (const auto& inc : increments) {
    if (inc.size() != dim) throw ShapeError(context, dim, inc.size());
  }
}

ParamVector batch_mean(std::span<const ParamVector> increments) {
  const std::size_t dim = increments.front().size();
  const double inv_m = 1.0 / static_cast<double>(increments.size());
  ParamVector mean(dim, 0.0);
  for (const auto& inc : increments) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += inc[j];
  }
  for (std::size_t j = 0; j < dim; ++j) mean[j] *= inv_m;
  return mean;
}

}  // namespace

BatchStats minibatch_stats(std::span<const ParamVector> increments, double guard) {
  check_batch(increments, "minibatch_stats");
  const std::size_t dim = increments.front().size();
  const double inv_m = 1.0 / static_cast<double>(increments.size());

  BatchStats stats;
  stats.batch_size = increments.size();
  stats.mean_increment = batch_mean(increments);
  stats.variance = ParamVector(dim, 0.0);
  for (const auto& inc : increments) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double dev = inc[j] - stats.mean_increment[j];
      stats.variance[j] += dev * dev;
    }
  }
  stats.scale_free = ParamVector(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    stats.variance[j] *= inv_m;
    stats.scale_free[j] = scale_free_variance(stats.variance[j], stats.mean_increment[j], guard);
  }
  return stats;
}

BatchStats minibatch_stats_global(std::span<const ParamVector> increments, double guard) {
  BatchStats stats = minibatch_stats(increments, guard);
  double total_variance = 0.0;
  for (double v : stats.variance) total_variance += v;
  double rho = 0.0;
  if (total_variance > 0.0) {
    const double denom = std::max(squared_norm(stats.mean_increment), guard * guard);
    rho = std::min(total_variance / denom, kScaleFreeCap);
  }
  stats.scale_free.fill(rho);
  return stats;
}

ParamVector scale_free_one_pass(std::span<const ParamVector> increments, double guard) {
  check_batch(increments, "scale_free_one_pass");
  const std::size_t dim = increments.front().size();
  const double m = static_cast<double>(increments.size());
  ParamVector sum(dim, 0.0);
  ParamVector sum_sq(dim, 0.0);
  for (const auto& inc : increments) {
    for (std::size_t j = 0; j < dim; ++j) {
      sum[j] += inc[j];
      sum_sq[j] += inc[j] * inc[j];
    }
  }
  ParamVector rho(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const double mean = sum[j] / m;
    if (std::fabs(mean) >= guard) {
      rho[j] = std::clamp(sum_sq[j] / (m * mean * mean) - 1.0, 0.0, kScaleFreeCap);
    } else {
      rho[j] = scale_free_variance(std::max(sum_sq[j] / m - mean * mean, 0.0), mean, guard);
    }
  }
  return rho;
}

double bounded_regularizer(double rho, double reference, double impact) {
  if (reference <= 0.0) return 1.0;
  return (1.0 + impact) / (1.0 + impact * (rho / reference));
}

ParamVector regularizer_lambda(const ParamVector& rho, const RegularizerState& state) {
  require_same_length(rho, state.history, "regularizer_lambda");
  ParamVector lambda(rho.size(), 1.0);
  if (state.steps == 0) return lambda;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    const double reference = state.mode == NormalizationMode::mean_normalized
                                 ? state.mean[j]
                                 : state.history[j];
    lambda[j] = bounded_regularizer(rho[j], reference, state.impact);
  }
  return lambda;
}

void record_history(RegularizerState& state, const ParamVector& rho) {
  require_same_length(state.history, rho, "update_history");
  require_same_length(state.mean, rho, "update_history");
  ++state.steps;
  const double t = static_cast<double>(state.steps);
  for (std::size_t j = 0; j < rho.size(); ++j) {
    state.history[j] += rho[j];
    state.mean[j] += (rho[j] - state.mean[j]) / t;
  }
}

RegularizerState update_history(RegularizerState state, const ParamVector& rho) {
  record_history(state, rho);
  return state;
}

double sigmoid_regularizer(double var_t, double mean_var, double lambda0, double amplitude) {
  if (!(var_t > 0.0) || !(mean_var > 0.0) || !(lambda0 > 0.0)) {
    throw PreconditionError("sigmoid_regularizer: variances and lambda0 must be positive");
  }
  const double half = 0.5 * lambda0;
  return amplitude / (1.0 + std::exp(half - (1.0 + half) * mean_var / var_t));
}

double neutral_sigmoid_amplitude() { return 1.0 + 1.0 / std::numbers::e; }

double impact_from_lambda0(double lambda0) {
  const double half = 0.5 * lambda0;
  if (!(lambda0 > 0.0) || half >= std::numbers::e) {
    throw PreconditionError("impact_from_lambda0: need 0 < lambda0 < 2e");
  }
  return (1.0 + half) / (std::numbers::e - half);
}

CochranEstimate cochran_scaling_check(std::size_t m, double sigma0_sq, RngStream& rng,
                                      std::size_t batches) {
  if (m == 0) throw PreconditionError("cochran_scaling_check: m must be >= 1");
  if (batches < 2) throw PreconditionError("cochran_scaling_check: need at least 2 batches");
  const double sigma0 = std::sqrt(sigma0_sq);
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> sample(m);

  double sum_v = 0.0, sum_v_sq = 0.0;
  double sum_mean_sq = 0.0, sum_mean_4 = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sample[i] = sigma0 * rng.standard_normal();
      mean += sample[i];
    }
    mean *= inv_m;
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) v += (sample[i] - mean) * (sample[i] - mean);
    v *= inv_m;
    sum_v += v;
    sum_v_sq += v * v;
    // True mean is zero, so delta-bar^2 is an unbiased per-batch estimate of Var(delta-bar).
    sum_mean_sq += mean * mean;
    sum_mean_4 += mean * mean * mean * mean;
  }
  const double n = static_cast<double>(batches);
  CochranEstimate out;
  out.batch_size = m;
  out.batches = batches;
  out.mean_batch_variance = sum_v / n;
  out.mean_batch_variance_stderr =
      std::sqrt(std::max(sum_v_sq / n - out.mean_batch_variance * out.mean_batch_variance, 0.0) /
                (n - 1.0));
  out.variance_of_mean = sum_mean_sq / n;
  out.variance_of_mean_stderr = std::sqrt(
      std::max(sum_mean_4 / n - out.variance_of_mean * out.variance_of_mean, 0.0) / (n - 1.0));
  out.expected_batch_variance = (static_cast<double>(m) - 1.0) * inv_m * sigma0_sq;
  out.expected_variance_of_mean = sigma0_sq * inv_m;
  return out;
}

}  // namespace vrlr
