#include "vrlr/noise.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

namespace vrlr {

namespace {

constexpr std::array<std::pair<NoiseKind, std::string_view>, 4> kKindNames = {{
    {NoiseKind::constant, "constant"},
    {NoiseKind::two_level, "two_level"},
    {NoiseKind::periodic_burst, "periodic_burst"},
    {NoiseKind::ramp, "ramp"},
}};

constexpr std::array<std::pair<NoiseShape, std::string_view>, 4> kShapeNames = {{
    {NoiseShape::gaussian, "gaussian"},
    {NoiseShape::uniform, "uniform"},
    {NoiseShape::laplace, "laplace"},
    {NoiseShape::centered_exponential, "centered_exponential"},
}};

constexpr std::array<std::pair<NoiseScaling, std::string_view>, 2> kScalingNames = {{
    {NoiseScaling::absolute, "absolute"},
    {NoiseScaling::relative, "relative"},
}};

template <typename Table, typename Value>
std::string_view name_of(const Table& table, Value value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

template <typename Value, typename Table>
std::optional<Value> value_of(const Table& table, std::string_view name) {
  for (const auto& [v, n] : table) {
    if (n == name) return v;
  }
  return std::nullopt;
}

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

// Uniform on (0, 1] from 64 random bits.
double open_closed(std::uint32_t lo, std::uint32_t hi) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>((bits >> 11) + 1) * kTwoPow53Inv;
}

}  // namespace

std::string_view to_string(NoiseKind kind) { return name_of(kKindNames, kind); }
std::optional<NoiseKind> parse_noise_kind(std::string_view name) {
  return value_of<NoiseKind>(kKindNames, name);
}
std::string_view to_string(NoiseShape shape) { return name_of(kShapeNames, shape); }
std::optional<NoiseShape> parse_noise_shape(std::string_view name) {
  return value_of<NoiseShape>(kShapeNames, name);
}
std::string_view to_string(NoiseScaling scaling) { return name_of(kScalingNames, scaling); }
std::optional<NoiseScaling> parse_noise_scaling(std::string_view name) {
  return value_of<NoiseScaling>(kScalingNames, name);
}

ShapeMoments shape_moments(NoiseShape shape) {
  switch (shape) {
    case NoiseShape::gaussian: return {0.0, 3.0};
    case NoiseShape::uniform: return {0.0, 1.8};
    case NoiseShape::laplace: return {0.0, 6.0};
    case NoiseShape::centered_exponential: return {2.0, 9.0};
  }
  return {};
}

double draw_unit(NoiseShape shape, RngStream& rng) noexcept {
  switch (shape) {
    case NoiseShape::gaussian:
      return rng.standard_normal();
    case NoiseShape::uniform:
      return std::numbers::sqrt3 * (2.0 * rng.uniform01() - 1.0);
    case NoiseShape::laplace: {
      // Difference of two unit exponentials has variance 2.
      const auto b = rng.next_block();
      const double e1 = -std::log(open_closed(b[0], b[1]));
      const double e2 = -std::log(open_closed(b[2], b[3]));
      return (e1 - e2) / std::numbers::sqrt2;
    }
    case NoiseShape::centered_exponential: {
      const auto b = rng.next_block();
      return -std::log(open_closed(b[0], b[1])) - 1.0;
    }
  }
  return 0.0;
}

NoiseSchedule NoiseSchedule::constant_variance(double variance, NoiseShape shape) {
  NoiseSchedule s;
  s.kind = NoiseKind::constant;
  s.low = variance;
  s.high = variance;
  s.shape = shape;
  return s;
}

NoiseSchedule NoiseSchedule::two_level_variance(double low, double high, std::uint64_t block,
                                                NoiseShape shape) {
  NoiseSchedule s;
  s.kind = NoiseKind::two_level;
  s.low = low;
  s.high = high;
  s.block = block;
  s.shape = shape;
  return s;
}

void NoiseSchedule::validate() const {
  if (!(low >= 0.0) || !std::isfinite(low)) throw ConfigError("noise.low", "must be finite and >= 0");
  if (kind != NoiseKind::constant && (!(high >= 0.0) || !std::isfinite(high))) {
    throw ConfigError("noise.high", "must be finite and >= 0");
  }
  if ((kind == NoiseKind::two_level || kind == NoiseKind::periodic_burst) && block == 0) {
    throw ConfigError("noise.block", "must be >= 1");
  }
  if (kind == NoiseKind::periodic_burst && (burst == 0 || burst > block)) {
    throw ConfigError("noise.burst", "must lie in [1, block]");
  }
  if (kind == NoiseKind::ramp && ramp_steps == 0) {
    throw ConfigError("noise.ramp_steps", "must be >= 1");
  }
}

double NoiseSchedule::variance_at(std::uint64_t t) const noexcept {
  switch (kind) {
    case NoiseKind::constant:
      return low;
    case NoiseKind::two_level:
      return (t / block) % 2 == 0 ? low : high;
    case NoiseKind::periodic_burst:
      return t % block < burst ? high : low;
    case NoiseKind::ramp: {
      if (t >= ramp_steps) return high;
      const double frac = static_cast<double>(t) / static_cast<double>(ramp_steps);
      return low + (high - low) * frac;
    }
  }
  return low;
}

double NoiseSchedule::draw(RngStream& rng, std::uint64_t t) const noexcept {
  const double variance = variance_at(t);
  if (variance == 0.0) return 0.0;
  return std::sqrt(variance) * draw_unit(shape, rng);
}

MeanNoiseMoments mean_noise_moments(double s2, std::size_t m, ShapeMoments shape) {
  if (m == 0) throw PreconditionError("mean_noise_moments: m must be >= 1");
  const double md = static_cast<double>(m);
  MeanNoiseMoments out;
  out.variance = s2 / md;
  out.third = shape.skewness * std::pow(s2, 1.5) / (md * md);
  out.fourth = 3.0 * out.variance * out.variance + (shape.kurtosis - 3.0) * s2 * s2 / (md * md * md);
  return out;
}

}  // namespace vrlr
