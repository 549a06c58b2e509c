#include "vrlr/optim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace vrlr {

namespace {

constexpr std::array<std::pair<OptimizerKind, std::string_view>, 5> kKindNames = {{
    {OptimizerKind::sgd, "sgd"},
    {OptimizerKind::vr_sgd, "vr_sgd"},
    {OptimizerKind::momentum, "momentum"},
    {OptimizerKind::adam, "adam"},
    {OptimizerKind::vr_adam, "vr_adam"},
}};

template <typename Table, typename Value>
std::string_view lookup_name(const Table& table, Value value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

template <typename Value, typename Table>
std::optional<Value> lookup_value(const Table& table, std::string_view name) {
  for (const auto& [v, n] : table) {
    if (n == name) return v;
  }
  return std::nullopt;
}

constexpr std::array<std::pair<NormalizationMode, std::string_view>, 2> kModeNames = {{
    {NormalizationMode::mean_normalized, "mean_normalized"},
    {NormalizationMode::algorithm_literal, "algorithm_literal"},
}};

constexpr std::array<std::pair<Granularity, std::string_view>, 2> kGranularityNames = {{
    {Granularity::per_parameter, "per_parameter"},
    {Granularity::global_scalar, "global_scalar"},
}};

}  // namespace

std::string_view to_string(OptimizerKind kind) { return lookup_name(kKindNames, kind); }
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name) {
  return lookup_value<OptimizerKind>(kKindNames, name);
}
std::string_view to_string(NormalizationMode mode) { return lookup_name(kModeNames, mode); }
std::optional<NormalizationMode> parse_normalization_mode(std::string_view name) {
  return lookup_value<NormalizationMode>(kModeNames, name);
}
std::string_view to_string(Granularity g) { return lookup_name(kGranularityNames, g); }
std::optional<Granularity> parse_granularity(std::string_view name) {
  return lookup_value<Granularity>(kGranularityNames, name);
}

bool is_variance_regularized(OptimizerKind kind) {
  return kind == OptimizerKind::vr_sgd || kind == OptimizerKind::vr_adam;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optimizer.learning_rate", "must be a finite positive number");
  }
  if (!(impact >= 0.0) || !std::isfinite(impact)) {
    throw ConfigError("optimizer.impact", "must be a finite non-negative number");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2", "must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("optimizer.adam_epsilon", "must be positive");
  if (!(guard > 0.0)) throw ConfigError("optimizer.guard", "must be positive");
}

OptimizerState OptimizerState::create(const OptimizerConfig& config, ParamVector x0) {
  config.validate();
  const std::size_t dim = x0.size();
  OptimizerState state;
  state.x = std::move(x0);
  switch (config.kind) {
    case OptimizerKind::sgd:
      break;
    case OptimizerKind::momentum:
      state.m1 = ParamVector(dim, 0.0);
      break;
    case OptimizerKind::adam:
      state.m1 = ParamVector(dim, 0.0);
      state.m2 = ParamVector(dim, 0.0);
      break;
    case OptimizerKind::vr_adam:
      state.m1 = ParamVector(dim, 0.0);
      state.m2 = ParamVector(dim, 0.0);
      state.u = ParamVector(dim, 0.0);
      state.v = ParamVector(dim, 0.0);
      state.w = ParamVector(dim, 0.0);
      [[fallthrough]];
    case OptimizerKind::vr_sgd:
      state.reg = RegularizerState::create(dim, config.impact, config.vr_mode, config.guard);
      break;
  }
  return state;
}

namespace {

bool exceeds_threshold(const ParamVector& x) {
  for (double v : x) {
    if (!std::isfinite(v) || std::fabs(v) > kDivergenceThreshold) return true;
  }
  return false;
}

StepReport plain_report(const OptimizerState& state) {
  StepReport report;
  report.lambda = ParamVector(state.x.size(), 1.0);
  report.diverged = exceeds_threshold(state.x);
  return report;
}

void check_increment(const OptimizerState& state, const ParamVector& increment,
                     const char* context) {
  require_same_length(state.x, increment, context);
  require_finite(increment, context);
}

double current_impact(const OptimizerConfig& config, std::uint64_t step) {
  return config.impact_schedule ? config.impact_schedule(step) : config.impact;
}

double mean_of(const ParamVector& a) { return a.empty() ? 0.0 : reduce(ReduceOp::mean, a); }

// Adam moment update followed by the (optionally bias-corrected) increment.
ParamVector adam_increment(OptimizerState& state, const OptimizerConfig& config,
                           const ParamVector& g) {
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  ++state.t;
  const double c1 = config.bias_correction ? 1.0 - std::pow(b1, static_cast<double>(state.t)) : 1.0;
  const double c2 = config.bias_correction ? 1.0 - std::pow(b2, static_cast<double>(state.t)) : 1.0;
  ParamVector increment(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    state.m1[j] = b1 * state.m1[j] + (1.0 - b1) * g[j];
    state.m2[j] = b2 * state.m2[j] + (1.0 - b2) * g[j] * g[j];
    const double first = state.m1[j] / c1;
    const double second = state.m2[j] / c2;
    increment[j] = first / (std::sqrt(second) + config.adam_epsilon);
  }
  return increment;
}

}  // namespace

StepReport sgd_step_with_rate(OptimizerState& state, const ParamVector& mean_increment,
                              double rate) {
  check_increment(state, mean_increment, "sgd_step");
  for (std::size_t j = 0; j < state.x.size(); ++j) state.x[j] -= rate * mean_increment[j];
  ++state.t;
  return plain_report(state);
}

StepReport sgd_step(OptimizerState& state, const OptimizerConfig& config,
                    const ParamVector& mean_increment) {
  return sgd_step_with_rate(state, mean_increment, config.learning_rate);
}

StepReport vr_sgd_step(OptimizerState& state, const OptimizerConfig& config,
                       std::span<const ParamVector> per_sample) {
  if (!state.reg) throw PreconditionError("vr_sgd_step: state has no regularizer history");
  const BatchStats stats = config.granularity == Granularity::global_scalar
                               ? minibatch_stats_global(per_sample, config.guard)
                               : minibatch_stats(per_sample, config.guard);
  check_increment(state, stats.mean_increment, "vr_sgd_step");

  RegularizerState& reg = *state.reg;
  reg.impact = current_impact(config, state.t + 1);
  record_history(reg, stats.scale_free);
  StepReport report;
  report.lambda = regularizer_lambda(stats.scale_free, reg);
  for (std::size_t j = 0; j < state.x.size(); ++j) {
    state.x[j] -= config.learning_rate * (report.lambda[j] * stats.mean_increment[j]);
  }
  ++state.t;
  report.mean_rho = mean_of(stats.scale_free);
  report.mean_variance = mean_of(stats.variance);
  report.diverged = exceeds_threshold(state.x);
  return report;
}

StepReport momentum_step(OptimizerState& state, const OptimizerConfig& config,
                         const ParamVector& mean_increment) {
  check_increment(state, mean_increment, "momentum_step");
  const double b = config.beta1;
  for (std::size_t j = 0; j < state.x.size(); ++j) {
    state.m1[j] = b * state.m1[j] + (1.0 - b) * mean_increment[j];
    state.x[j] -= config.learning_rate * state.m1[j];
  }
  ++state.t;
  return plain_report(state);
}

StepReport adam_step(OptimizerState& state, const OptimizerConfig& config,
                     const ParamVector& mean_increment) {
  check_increment(state, mean_increment, "adam_step");
  const ParamVector increment = adam_increment(state, config, mean_increment);
  for (std::size_t j = 0; j < state.x.size(); ++j) {
    state.x[j] -= config.learning_rate * increment[j];
  }
  return plain_report(state);
}

AdamVarianceTerms adam_variance_recursions(const ParamVector& u, const ParamVector& v,
                                           const ParamVector& w, const ParamVector& sigma_sq,
                                           double beta1, double beta2) {
  require_same_length(u, sigma_sq, "adam_variance_recursions");
  require_same_length(v, sigma_sq, "adam_variance_recursions");
  require_same_length(w, sigma_sq, "adam_variance_recursions");
  const double b11 = beta1 * beta1;
  const double b22 = beta2 * beta2;
  const double b12 = beta1 * beta2;
  if (b12 == 1.0 || b11 == 1.0 || b22 == 1.0) {
    throw PreconditionError("adam_variance_recursions: beta1 * beta2 == 1 is degenerate");
  }
  const double k1 = (1.0 - beta1) * (1.0 - beta1) / (1.0 - b11);
  const double k2 = (1.0 - beta2) * (1.0 - beta2) / (1.0 - b22);
  const double k12 = (1.0 - beta1) * (1.0 - beta2) / (1.0 - b12);

  const std::size_t dim = sigma_sq.size();
  AdamVarianceTerms out{ParamVector(dim), ParamVector(dim), ParamVector(dim),
                        ParamVector(dim), ParamVector(dim), ParamVector(dim)};
  for (std::size_t j = 0; j < dim; ++j) {
    out.u[j] = b11 * u[j] + (1.0 - b11) * sigma_sq[j];
    out.v[j] = b22 * v[j] + (1.0 - b22) * sigma_sq[j];
    out.w[j] = b12 * w[j] + (1.0 - b12) * sigma_sq[j];
    out.first[j] = k1 * out.u[j];
    out.second[j] = k2 * out.v[j];
    out.cross[j] = k12 * out.w[j];
  }
  return out;
}

double adam_increment_variance(double first, double second, double cross, double increment,
                               double second_moment) {
  const double numer =
      first - 2.0 * std::fabs(increment) * cross + increment * increment * second;
  const double denom = std::max(second_moment, 1e-300);
  return std::max(numer, 0.0) / denom;
}

StepReport vr_adam_step(OptimizerState& state, const OptimizerConfig& config,
                        std::span<const ParamVector> per_sample) {
  if (!state.reg) throw PreconditionError("vr_adam_step: state has no regularizer history");
  if (per_sample.size() < 2) {
    throw PreconditionError("vr_adam_step: needs at least 2 samples per batch");
  }
  const BatchStats stats = minibatch_stats(per_sample, config.guard);
  check_increment(state, stats.mean_increment, "vr_adam_step");
  const std::size_t dim = state.x.size();

  // Var(delta-bar) estimate from the within-batch variance: E[v^2] = (m-1) sigma_t^2.
  const double bridge = 1.0 / (static_cast<double>(stats.batch_size) - 1.0);
  ParamVector sigma_sq(dim);
  for (std::size_t j = 0; j < dim; ++j) sigma_sq[j] = stats.variance[j] * bridge;

  const ParamVector increment = adam_increment(state, config, stats.mean_increment);
  AdamVarianceTerms terms = adam_variance_recursions(state.u, state.v, state.w, sigma_sq,
                                                     config.beta1, config.beta2);
  state.u = std::move(terms.u);
  state.v = std::move(terms.v);
  state.w = std::move(terms.w);

  const double t = static_cast<double>(state.t);
  const double c1 = config.bias_correction ? 1.0 - std::pow(config.beta1, t) : 1.0;
  const double c2 = config.bias_correction ? 1.0 - std::pow(config.beta2, t) : 1.0;

  ParamVector rho(dim);
  double var_sum = 0.0;
  double inc_sq_sum = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    // Bias correction divides p_{t|1} by c1 and p^2_{t|2} by c2, which rescales
    // the variance-like terms by the matching powers.
    const double var = adam_increment_variance(terms.first[j] / (c1 * c1),
                                               terms.second[j] / (c2 * c2),
                                               terms.cross[j] / (c1 * c2), increment[j],
                                               state.m2[j] / c2);
    var_sum += var;
    inc_sq_sum += increment[j] * increment[j];
    rho[j] = scale_free_variance(var, increment[j], config.guard);
  }
  if (config.granularity == Granularity::global_scalar) {
    const double global =
        var_sum > 0.0
            ? std::min(var_sum / std::max(inc_sq_sum, config.guard * config.guard), kScaleFreeCap)
            : 0.0;
    rho.fill(global);
  }

  RegularizerState& reg = *state.reg;
  reg.impact = current_impact(config, state.t);
  record_history(reg, rho);
  StepReport report;
  report.lambda = regularizer_lambda(rho, reg);
  for (std::size_t j = 0; j < dim; ++j) {
    state.x[j] -= config.learning_rate * (report.lambda[j] * increment[j]);
  }
  report.mean_rho = mean_of(rho);
  report.mean_variance = var_sum / static_cast<double>(dim);
  report.diverged = exceeds_threshold(state.x);
  return report;
}

Optimizer::Optimizer(OptimizerConfig config, ParamVector x0)
    : config_(std::move(config)), state_(OptimizerState::create(config_, std::move(x0))) {}

StepReport Optimizer::step(std::span<const ParamVector> per_sample) {
  switch (config_.kind) {
    case OptimizerKind::vr_sgd: return vr_sgd_step(state_, config_, per_sample);
    case OptimizerKind::vr_adam: return vr_adam_step(state_, config_, per_sample);
    default: break;
  }
  const BatchStats stats = minibatch_stats(per_sample, config_.guard);
  StepReport report;
  switch (config_.kind) {
    case OptimizerKind::sgd: report = sgd_step(state_, config_, stats.mean_increment); break;
    case OptimizerKind::momentum: report = momentum_step(state_, config_, stats.mean_increment); break;
    case OptimizerKind::adam: report = adam_step(state_, config_, stats.mean_increment); break;
    default: break;
  }
  report.mean_variance = mean_of(stats.variance);
  return report;
}

}  // namespace vrlr
