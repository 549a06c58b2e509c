#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "vrlr/numerics.hpp"

namespace vrlr {

inline constexpr double kDefaultImpactFactor = 2.0;
// Applied to the squared mean increment before it divides the variance.
inline constexpr double kDefaultVarianceGuard = 1e-8;
inline constexpr double kScaleFreeCap = 1e12;

// How the current scale-free variance is compared against its history.
//   mean_normalized:   rho_t / (Omega_t / t), the running mean.
//   algorithm_literal: rho_t / Omega_t, the running sum.
enum class NormalizationMode { mean_normalized, algorithm_literal };

// per_parameter keeps one rho per coordinate; global_scalar forms a single
// rho from vector norms and broadcasts it.
enum class Granularity { per_parameter, global_scalar };

// Statistics of one mini-batch of per-sample increments.
struct BatchStats {
  ParamVector mean_increment;  // delta-bar
  ParamVector variance;        // v^2 with 1/m normalization, >= 0
  ParamVector scale_free;      // rho = v^2 / delta-bar^2, >= 0
  std::size_t batch_size = 0;
};

struct RegularizerState {
  double impact = kDefaultImpactFactor;  // s
  ParamVector history;                   // Omega, running sum of rho
  // Running mean of rho, updated as m += (rho - m) / t so that a constant rho
  // reproduces itself bit for bit (Omega / t can be off by an ulp).
  ParamVector mean;
  std::uint64_t steps = 0;               // t
  NormalizationMode mode = NormalizationMode::mean_normalized;
  double guard = kDefaultVarianceGuard;

  static RegularizerState create(std::size_t dim, double impact = kDefaultImpactFactor,
                                 NormalizationMode mode = NormalizationMode::mean_normalized,
                                 double guard = kDefaultVarianceGuard);
};

// rho for one coordinate: variance / max(mean^2, guard^2), capped at
// kScaleFreeCap. Zero variance gives zero regardless of the mean.
double scale_free_variance(double variance, double mean, double guard = kDefaultVarianceGuard);

// Two-pass mean and variance, then rho. Throws PreconditionError for an
// empty batch and ShapeError for ragged increments.
BatchStats minibatch_stats(std::span<const ParamVector> increments,
                           double guard = kDefaultVarianceGuard);

// Same statistics but rho is a single scalar from vector norms,
// |v|^2 / max(|delta-bar|^2, guard^2), broadcast to every coordinate.
BatchStats minibatch_stats_global(std::span<const ParamVector> increments,
                                  double guard = kDefaultVarianceGuard);

// One-pass form rho = (1 / (m delta-bar^2)) sum_i delta_i^2 - 1. Used to
// cross-check the two-pass statistics; agrees to 1e-10 relative wherever
// |delta-bar| is well above the guard.
ParamVector scale_free_one_pass(std::span<const ParamVector> increments,
                                double guard = kDefaultVarianceGuard);

// (1 + s) / (1 + s * rho / reference); reference == 0 gives 1.
double bounded_regularizer(double rho, double reference, double impact);

// lambda_t for every coordinate from the current rho and the state, which
// must already include rho_t in its history. Before any history exists
// (steps == 0) lambda is 1 everywhere.
ParamVector regularizer_lambda(const ParamVector& rho, const RegularizerState& state);

// Omega += rho, t += 1.
RegularizerState update_history(RegularizerState state, const ParamVector& rho);
void record_history(RegularizerState& state, const ParamVector& rho);

// a / (1 + exp[l0/2 - (1 + l0/2) * mean_var / var_t]).
double sigmoid_regularizer(double var_t, double mean_var, double lambda0, double amplitude);

// Amplitude that makes the sigmoid form equal 1 when var_t == mean_var.
double neutral_sigmoid_amplitude();

// Impact factor for which the bounded form matches the sigmoid to first
// order: s = (1 + l0/2) / (e - l0/2). Requires 0 < l0 < 2e.
double impact_from_lambda0(double lambda0);

struct CochranEstimate {
  std::size_t batch_size = 0;
  std::size_t batches = 0;
  double mean_batch_variance = 0.0;         // E[v^2] estimate
  double mean_batch_variance_stderr = 0.0;
  double variance_of_mean = 0.0;            // Var(delta-bar) estimate
  double variance_of_mean_stderr = 0.0;
  double expected_batch_variance = 0.0;     // (m - 1) / m * sigma0^2
  double expected_variance_of_mean = 0.0;   // sigma0^2 / m
};

// Monte Carlo over `batches` mini-batches of m i.i.d. N(0, sigma0^2)
// increments: checks E[v^2] = (m-1)/m sigma0^2 and Var(delta-bar) = sigma0^2/m.
CochranEstimate cochran_scaling_check(std::size_t m, double sigma0_sq, RngStream& rng,
                                      std::size_t batches = 1'000'000);

}  // namespace vrlr
