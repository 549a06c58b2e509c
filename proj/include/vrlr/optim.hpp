#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>

#include "vrlr/numerics.hpp"
#include "vrlr/stats.hpp"

namespace vrlr {

enum class OptimizerKind { sgd, vr_sgd, momentum, adam, vr_adam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name);
std::string_view to_string(NormalizationMode mode);
std::optional<NormalizationMode> parse_normalization_mode(std::string_view name);
std::string_view to_string(Granularity granularity);
std::optional<Granularity> parse_granularity(std::string_view name);

bool is_variance_regularized(OptimizerKind kind);

// Parameters with |x| above this halt the run as diverged.
inline constexpr double kDivergenceThreshold = 1e12;

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.01;  // alpha
  double impact = kDefaultImpactFactor;
  double beta1 = 0.9;  // also the heavy-ball decay for `momentum`
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool bias_correction = true;
  NormalizationMode vr_mode = NormalizationMode::mean_normalized;
  Granularity granularity = Granularity::per_parameter;
  double guard = kDefaultVarianceGuard;
  // Optional time-varying impact factor s_t; when set it replaces `impact`
  // at every step (argument is the 1-based step about to be taken).
  std::function<double(std::uint64_t)> impact_schedule;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct OptimizerState {
  ParamVector x;
  std::uint64_t t = 0;
  ParamVector m1;  // first moment (momentum and Adam kinds)
  ParamVector m2;  // second moment accumulator (Adam kinds)
  std::optional<RegularizerState> reg;
  // Momentum-variance accumulators for VR-Adam, decays beta1^2, beta2^2, beta1*beta2.
  ParamVector u, v, w;

  static OptimizerState create(const OptimizerConfig& config, ParamVector x0);
};

struct StepReport {
  ParamVector lambda;        // regularizer applied this step; ones for non-VR kinds
  double mean_rho = 0.0;     // mean scale-free variance (VR kinds), else 0
  double mean_variance = 0.0;
  bool diverged = false;
};

// x <- x - alpha * delta-bar.
StepReport sgd_step(OptimizerState& state, const OptimizerConfig& config,
                    const ParamVector& mean_increment);

// Same update with an explicit step size gamma_t, for schedules driven from
// outside (decaying rates in the theory lab).
StepReport sgd_step_with_rate(OptimizerState& state, const ParamVector& mean_increment,
                              double rate);

// Mini-batch stats, history update, lambda, then x <- x - alpha * lambda (.) delta-bar.
StepReport vr_sgd_step(OptimizerState& state, const OptimizerConfig& config,
                       std::span<const ParamVector> per_sample);

// m1 <- b1 m1 + (1 - b1) delta-bar; x <- x - alpha m1.
StepReport momentum_step(OptimizerState& state, const OptimizerConfig& config,
                         const ParamVector& mean_increment);

StepReport adam_step(OptimizerState& state, const OptimizerConfig& config,
                     const ParamVector& mean_increment);

struct AdamVarianceTerms {
  ParamVector u, v, w;
  ParamVector first;   // sigma^2_{t|1}
  ParamVector second;  // sigma^2_{t|2}
  ParamVector cross;   // <eps_{t|1} eps_{t|2}>
};

// u' = b1^2 u + (1-b1^2) s2, v' = b2^2 v + (1-b2^2) s2, w' = b1 b2 w + (1-b1 b2) s2,
// then the three variance-like terms. Throws PreconditionError if b1*b2 == 1.
AdamVarianceTerms adam_variance_recursions(const ParamVector& u, const ParamVector& v,
                                           const ParamVector& w, const ParamVector& sigma_sq,
                                           double beta1, double beta2);

// Lowest-order variance of the Adam increment:
//   (1/p2) [first - 2 |increment| cross + increment^2 second], clamped at 0.
double adam_increment_variance(double first, double second, double cross, double increment,
                               double second_moment);

// Adam with the variance-regularized rate. Needs m >= 2.
StepReport vr_adam_step(OptimizerState& state, const OptimizerConfig& config,
                        std::span<const ParamVector> per_sample);

// Owns config and state; dispatches on the configured kind.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, ParamVector x0);

  StepReport step(std::span<const ParamVector> per_sample);

  const OptimizerState& state() const noexcept { return state_; }
  const OptimizerConfig& config() const noexcept { return config_; }
  const ParamVector& params() const noexcept { return state_.x; }

 private:
  OptimizerConfig config_;
  OptimizerState state_;
};

}  // namespace vrlr
