#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "vrlr/error.hpp"

namespace vrlr {

// Flat dense array of 64-bit floats. Holds parameters and every like-shaped
// quantity (gradients, per-coordinate statistics, regularizers). The length
// is fixed at construction; there is no resize.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  ParamVector(std::initializer_list<double> values) : data_(values) {}
  explicit ParamVector(std::vector<double> values) : data_(std::move(values)) {}
  explicit ParamVector(std::span<const double> values) : data_(values.begin(), values.end()) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  void fill(double value);

  bool all_finite() const noexcept { return !first_non_finite().has_value(); }
  std::optional<std::size_t> first_non_finite() const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> data_;
};

enum class ElementwiseOp { add, sub, mul, div, scale, square, sqrt };
enum class ReduceOp { sum, mean, max, l2norm };

// Denominators with |d| below this are clamped to sign(d) * kDivisionGuard,
// with the sign of zero taken as positive.
inline constexpr double kDivisionGuard = 1e-12;

double guarded_divide(double numerator, double denominator, double guard = kDivisionGuard);

// Binary ops (add, sub, mul, div) against another vector. Unary ops (square,
// sqrt) ignore `b` apart from the shape check. Throws ShapeError on length
// mismatch and NonFiniteError if any output coordinate is not finite.
ParamVector elementwise(ElementwiseOp op, const ParamVector& a, const ParamVector& b);

// Scalar right-hand side: add/sub/mul/div/scale by `b`; square and sqrt
// ignore it.
ParamVector elementwise(ElementwiseOp op, const ParamVector& a, double b);

// Left-to-right accumulation; the result is a pure function of the bits of `a`.
double reduce(ReduceOp op, const ParamVector& a);

double dot(const ParamVector& a, const ParamVector& b);
double squared_norm(const ParamVector& a);

void require_same_length(const ParamVector& a, const ParamVector& b, const char* context);

// Throws NonFiniteError naming the first bad coordinate.
void require_finite(const ParamVector& a, const char* context);

// Counter-based generator (Philox4x32-10). The key is the seed; the 128-bit
// counter is (stream_id, draw index). Every draw consumes exactly one block,
// so the stream position after k draws is k regardless of the distribution
// mix, and streams with distinct ids never overlap.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept;
  // Box-Muller on the two 64-bit halves of one block; the sine branch is dropped.
  double standard_normal() noexcept;
  // Uniform on {0, ..., n-1} via a 64x64->128 multiply-high (bias below n/2^64).
  std::size_t index_uniform(std::size_t n);

  // Raw block at the current counter, then advances.
  std::array<std::uint32_t, 4> next_block() noexcept;

  // Child stream with the same seed and a stream id derived from (stream_id, salt).
  RngStream fork(std::uint64_t salt) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
};

// Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

// In-place Fisher-Yates driven by `rng`.
void shuffle(std::span<std::size_t> items, RngStream& rng);

}  // namespace vrlr
