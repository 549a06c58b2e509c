#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vrlr/numerics.hpp"

namespace vrlr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-per-example feature matrix with one numeric label per row.
struct Dataset {
  RowMatrix features;
  std::vector<double> labels;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(features.cols()); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * width(), width()};
  }
};

// Two or more Gaussian clusters with unit covariance. With two classes the
// centers are +offset and -offset along the all-ones direction; with k > 2
// class c is centered at offset * e_{c mod dim}. Labels cycle 0, 1, ..., k-1.
Dataset make_blobs(std::size_t samples, std::size_t dim, std::size_t classes, double offset,
                   RngStream& rng);

// Divides every row by its L2 norm (rows with zero norm are left unchanged).
void normalize_rows_unit_l2(Dataset& data);

// A differentiable finite-sum objective f(x) = (1/N) sum_i f(x, z_i).
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t dim() const = 0;
  // N; synthetic testbeds report 1.
  virtual std::size_t sample_count() const = 0;
  virtual double sample_loss(const ParamVector& x, std::size_t i) const = 0;
  virtual ParamVector sample_grad(const ParamVector& x, std::size_t i) const = 0;
  virtual ParamVector initial_point() const = 0;

  // Per-sample gradients for a batch of indices, in index order.
  virtual std::vector<ParamVector> sample_grads(const ParamVector& x,
                                                std::span<const std::size_t> indices) const;

  // Full objective and its gradient (means over all samples).
  virtual double loss(const ParamVector& x) const;
  virtual ParamVector gradient(const ParamVector& x) const;

  // Mean loss over a subset of samples.
  double mean_loss(const ParamVector& x, std::span<const std::size_t> indices) const;

  // Fraction of correctly classified samples among `indices` (classifiers only).
  virtual std::optional<double> accuracy(const ParamVector& x,
                                         std::span<const std::size_t> indices) const;

  virtual std::optional<ParamVector> optimum() const { return std::nullopt; }
  virtual std::optional<double> optimal_value() const { return std::nullopt; }
  // Lipschitz constant of the full gradient.
  virtual std::optional<double> lipschitz() const { return std::nullopt; }
  virtual std::optional<double> strong_convexity() const { return std::nullopt; }
  virtual bool convex() const { return false; }
};

// f(x) = (l/2)|x|^2 with x* = 0, f* = 0, L = l. Noise is injected by the
// gradient stream, so the single "sample" carries the exact gradient.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(double curvature, std::size_t dim, double initial_value = 1.0);

  std::string_view name() const override { return "quadratic"; }
  std::size_t dim() const override { return dim_; }
  std::size_t sample_count() const override { return 1; }
  double sample_loss(const ParamVector& x, std::size_t i) const override;
  ParamVector sample_grad(const ParamVector& x, std::size_t i) const override;
  ParamVector initial_point() const override { return ParamVector(dim_, initial_value_); }
  double loss(const ParamVector& x) const override;
  ParamVector gradient(const ParamVector& x) const override;

  std::optional<ParamVector> optimum() const override { return ParamVector(dim_, 0.0); }
  std::optional<double> optimal_value() const override { return 0.0; }
  std::optional<double> lipschitz() const override { return curvature_; }
  std::optional<double> strong_convexity() const override { return curvature_; }
  bool convex() const override { return true; }

  double curvature() const noexcept { return curvature_; }

 private:
  double curvature_;
  std::size_t dim_;
  double initial_value_;
};

// Per-sample loss (1/2)(w.x_i - y_i)^2 + (ridge/2)|w|^2 / N.
class LinearRegressionProblem final : public Problem {
 public:
  LinearRegressionProblem(std::shared_ptr<const Dataset> data, double ridge = 0.0);

  std::string_view name() const override { return "linear_regression"; }
  std::size_t dim() const override { return data_->width(); }
  std::size_t sample_count() const override { return data_->rows(); }
  double sample_loss(const ParamVector& x, std::size_t i) const override;
  ParamVector sample_grad(const ParamVector& x, std::size_t i) const override;
  ParamVector initial_point() const override { return ParamVector(dim(), 0.0); }

  // Solution of the normal equations (X^T X + ridge I) w = X^T y.
  std::optional<ParamVector> optimum() const override { return optimum_; }
  std::optional<double> optimal_value() const override { return optimal_value_; }
  std::optional<double> lipschitz() const override { return lipschitz_; }
  std::optional<double> strong_convexity() const override { return strong_convexity_; }
  bool convex() const override { return true; }

 private:
  std::shared_ptr<const Dataset> data_;
  double ridge_;
  ParamVector optimum_;
  double optimal_value_ = 0.0;
  double lipschitz_ = 0.0;
  double strong_convexity_ = 0.0;
};

// Per-sample loss log(1 + exp(-(2y - 1) w.x)), labels in {0, 1}.
class LogisticRegressionProblem final : public Problem {
 public:
  explicit LogisticRegressionProblem(std::shared_ptr<const Dataset> data);

  std::string_view name() const override { return "logistic_regression"; }
  std::size_t dim() const override { return data_->width(); }
  std::size_t sample_count() const override { return data_->rows(); }
  double sample_loss(const ParamVector& x, std::size_t i) const override;
  ParamVector sample_grad(const ParamVector& x, std::size_t i) const override;
  ParamVector initial_point() const override { return ParamVector(dim(), 0.0); }
  std::optional<double> accuracy(const ParamVector& x,
                                 std::span<const std::size_t> indices) const override;

  // 0.25 * max_i |x_i|^2, widened by 1%.
  std::optional<double> lipschitz() const override { return lipschitz_; }
  bool convex() const override { return true; }

 private:
  std::shared_ptr<const Dataset> data_;
  double lipschitz_ = 0.0;
};

enum class Activation { tanh, relu };
std::string_view to_string(Activation activation);
std::optional<Activation> parse_activation(std::string_view name);

// Dense network with softmax cross-entropy. layer_sizes = {inputs, hidden...,
// classes}. Parameters are laid out layer by layer, each as the row-major
// weight matrix (out x in) followed by the bias (out).
class MlpProblem final : public Problem {
 public:
  MlpProblem(std::shared_ptr<const Dataset> data, std::vector<std::size_t> layer_sizes,
             Activation activation, std::uint64_t init_seed);

  std::string_view name() const override { return "mlp"; }
  std::size_t dim() const override { return dim_; }
  std::size_t sample_count() const override { return data_->rows(); }
  double sample_loss(const ParamVector& x, std::size_t i) const override;
  ParamVector sample_grad(const ParamVector& x, std::size_t i) const override;
  // Uniform on +-1/sqrt(fan_in) for weights and biases, from init_seed.
  ParamVector initial_point() const override { return initial_; }
  std::optional<double> accuracy(const ParamVector& x,
                                 std::span<const std::size_t> indices) const override;

  // Same per-sample gradients computed with one matrix pass over the batch.
  std::vector<ParamVector> batched_sample_grads(const ParamVector& x,
                                                std::span<const std::size_t> indices) const;

  // Loss and gradient for an explicit input row and class label.
  double loss_for(const ParamVector& x, std::span<const double> input, std::size_t label) const;
  ParamVector grad_for(const ParamVector& x, std::span<const double> input,
                       std::size_t label) const;

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }

 private:
  std::vector<double> logits(const ParamVector& x, std::span<const double> input) const;

  std::shared_ptr<const Dataset> data_;
  std::vector<std::size_t> sizes_;
  Activation activation_;
  std::size_t dim_ = 0;
  ParamVector initial_;
};

struct GradCheckResult {
  double relative_error = 0.0;  // |a - n| / max(|a|, |n|, floor), Euclidean norms
  double max_abs_error = 0.0;
  std::size_t worst_coordinate = 0;
};

// Central finite differences of sample_loss against sample_grad at x for
// sample i, with step h per coordinate.
GradCheckResult finite_difference_check(const Problem& problem, const ParamVector& x,
                                        std::size_t sample, double step = 1e-6,
                                        double floor = 1e-4);

}  // namespace vrlr
