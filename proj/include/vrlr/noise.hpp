#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "vrlr/numerics.hpp"

namespace vrlr {

// Time profile of the per-sample noise variance sigma0^2(t), t = 0-based step.
//   constant:       low
//   two_level:      low on even blocks of `block` steps, high on odd blocks
//   periodic_burst: high for the first `burst` steps of every `block`-step period, else low
//   ramp:           linear from low (t = 0) to high (t = ramp_steps), then high
enum class NoiseKind { constant, two_level, periodic_burst, ramp };

// Distribution of one unit-variance, mean-zero draw.
enum class NoiseShape { gaussian, uniform, laplace, centered_exponential };

// absolute: per-coordinate noise std is sqrt(sigma0^2(t)).
// relative: per-coordinate noise std is sqrt(sigma0^2(t)) * |g_j|, where g_j is
//           the noiseless per-sample gradient coordinate.
enum class NoiseScaling { absolute, relative };

std::string_view to_string(NoiseKind kind);
std::optional<NoiseKind> parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseShape shape);
std::optional<NoiseShape> parse_noise_shape(std::string_view name);
std::string_view to_string(NoiseScaling scaling);
std::optional<NoiseScaling> parse_noise_scaling(std::string_view name);

// Standardized third and fourth moments of a NoiseShape.
struct ShapeMoments {
  double skewness = 0.0;
  double kurtosis = 3.0;
};
ShapeMoments shape_moments(NoiseShape shape);

// One unit-variance, mean-zero draw of the given shape. Consumes one block.
double draw_unit(NoiseShape shape, RngStream& rng) noexcept;

struct NoiseSchedule {
  NoiseKind kind = NoiseKind::constant;
  double low = 0.0;
  double high = 0.0;
  std::uint64_t block = 1;
  std::uint64_t burst = 1;
  std::uint64_t ramp_steps = 1;
  NoiseShape shape = NoiseShape::gaussian;
  NoiseScaling scaling = NoiseScaling::absolute;

  static NoiseSchedule none() { return {}; }
  static NoiseSchedule constant_variance(double variance,
                                         NoiseShape shape = NoiseShape::gaussian);
  static NoiseSchedule two_level_variance(double low, double high, std::uint64_t block,
                                          NoiseShape shape = NoiseShape::gaussian);

  // Throws ConfigError naming the offending field.
  void validate() const;

  double variance_at(std::uint64_t t) const noexcept;
  bool is_zero() const noexcept { return low == 0.0 && high == 0.0; }

  // One draw with variance variance_at(t) (before relative scaling).
  double draw(RngStream& rng, std::uint64_t t) const noexcept;
};

// Moments of the mean of m i.i.d. draws whose single-draw variance is s2 and
// standardized moments are `shape`: sigma^2, iota^3, eta^4 of that mean.
struct MeanNoiseMoments {
  double variance = 0.0;  // s2 / m
  double third = 0.0;     // mu3 / m^2
  double fourth = 0.0;    // 3 sigma^4 + (kurtosis - 3) s2^2 / m^3
};
MeanNoiseMoments mean_noise_moments(double s2, std::size_t m, ShapeMoments shape);

}  // namespace vrlr
