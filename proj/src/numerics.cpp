#include "vrlr/numerics.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace vrlr {

ShapeError::ShapeError(const std::string& context, std::size_t expected, std::size_t actual)
    : Error(context + ": length mismatch (expected " + std::to_string(expected) + ", got " +
            std::to_string(actual) + ")"),
      expected_(expected),
      actual_(actual) {}

NonFiniteError::NonFiniteError(const std::string& context, std::size_t index)
    : Error(context + ": non-finite value at coordinate " + std::to_string(index)), index_(index) {}

ParseError::ParseError(const std::string& message, std::size_t location)
    : Error(message), location_(location) {}

ConfigError::ConfigError(const std::string& field, const std::string& message)
    : Error(field + ": " + message), field_(field) {}

void ParamVector::fill(double value) {
  for (double& v : data_) v = value;
}

std::optional<std::size_t> ParamVector::first_non_finite() const noexcept {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) return i;
  }
  return std::nullopt;
}

double guarded_divide(double numerator, double denominator, double guard) {
  if (std::fabs(denominator) < guard) {
    denominator = std::signbit(denominator) && denominator != 0.0 ? -guard : guard;
  }
  return numerator / denominator;
}

void require_same_length(const ParamVector& a, const ParamVector& b, const char* context) {
  if (a.size() != b.size()) throw ShapeError(context, a.size(), b.size());
}

void require_finite(const ParamVector& a, const char* context) {
  if (auto bad = a.first_non_finite()) throw NonFiniteError(context, *bad);
}

namespace {

double apply(ElementwiseOp op, double a, double b) {
  switch (op) {
    case ElementwiseOp::add: return a + b;
    case ElementwiseOp::sub: return a - b;
    case ElementwiseOp::mul:
    case ElementwiseOp::scale: return a * b;
    case ElementwiseOp::div: return guarded_divide(a, b);
    case ElementwiseOp::square: return a * a;
    case ElementwiseOp::sqrt: return std::sqrt(a);
  }
  return a;
}

}  // namespace

ParamVector elementwise(ElementwiseOp op, const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b, "elementwise");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b[i]);
  require_finite(out, "elementwise");
  return out;
}

ParamVector elementwise(ElementwiseOp op, const ParamVector& a, double b) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b);
  require_finite(out, "elementwise");
  return out;
}

double reduce(ReduceOp op, const ParamVector& a) {
  if (a.empty()) throw PreconditionError("reduce: empty vector");
  switch (op) {
    case ReduceOp::sum: {
      double acc = 0.0;
      for (double v : a) acc += v;
      return acc;
    }
    case ReduceOp::mean: {
      double acc = 0.0;
      for (double v : a) acc += v;
      return acc / static_cast<double>(a.size());
    }
    case ReduceOp::max: {
      double best = a[0];
      for (double v : a) best = v > best ? v : best;
      return best;
    }
    case ReduceOp::l2norm: return std::sqrt(squared_norm(a));
  }
  return 0.0;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(const ParamVector& a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return acc;
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint64_t kMul0 = 0xD2511F53u;
  constexpr std::uint64_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = kMul0 * ctr[0];
    const std::uint64_t p1 = kMul1 * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::array<std::uint32_t, 4> RngStream::next_block() noexcept {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
      static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  ++counter_;
  return philox4x32(ctr, key);
}

namespace {

std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

}  // namespace

double RngStream::uniform01() noexcept {
  const auto block = next_block();
  return static_cast<double>(join(block[0], block[1]) >> 11) * kTwoPow53Inv;
}

double RngStream::standard_normal() noexcept {
  const auto block = next_block();
  // u1 in (0, 1] keeps the logarithm finite.
  const double u1 = static_cast<double>((join(block[0], block[1]) >> 11) + 1) * kTwoPow53Inv;
  const double u2 = static_cast<double>(join(block[2], block[3]) >> 11) * kTwoPow53Inv;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RngStream::index_uniform(std::size_t n) {
  if (n == 0) throw PreconditionError("index_uniform: n must be at least 1");
  const auto block = next_block();
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(join(block[0], block[1])) * static_cast<std::uint64_t>(n);
  return static_cast<std::size_t>(wide >> 64);
}

RngStream RngStream::fork(std::uint64_t salt) const noexcept {
  // splitmix64 finalizer over (stream_id, salt)
  std::uint64_t z = stream_id_ ^ (salt + 0x9E3779B97F4A7C15ull + (stream_id_ << 6) + (stream_id_ >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return RngStream(seed_, z);
}

void shuffle(std::span<std::size_t> items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.index_uniform(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace vrlr
