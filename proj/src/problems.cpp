#include "vrlr/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace vrlr {

namespace {

void check_index(std::size_t i, std::size_t n, const char* context) {
  if (i >= n) {
    throw PreconditionError(std::string(context) + ": sample index " + std::to_string(i) +
                            " out of range (N = " + std::to_string(n) + ")");
  }
}

void check_dim(const ParamVector& x, std::size_t dim, const char* context) {
  if (x.size() != dim) throw ShapeError(context, dim, x.size());
}

void check_dataset(const std::shared_ptr<const Dataset>& data, const char* context) {
  if (!data || data->rows() == 0) throw PreconditionError(std::string(context) + ": empty dataset");
  if (data->labels.size() != data->rows()) {
    throw ShapeError(std::string(context) + " labels", data->rows(), data->labels.size());
  }
  if (data->width() == 0) throw PreconditionError(std::string(context) + ": zero feature width");
}

double dot_row(const ParamVector& w, std::span<const double> row) {
  double acc = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) acc += w[j] * row[j];
  return acc;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Dataset make_blobs(std::size_t samples, std::size_t dim, std::size_t classes, double offset,
                   RngStream& rng) {
  if (samples == 0 || dim == 0) throw PreconditionError("make_blobs: samples and dim must be >= 1");
  if (classes < 2) throw PreconditionError("make_blobs: need at least 2 classes");
  Dataset data;
  data.features = RowMatrix(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(dim));
  data.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t label = i % classes;
    data.labels[i] = static_cast<double>(label);
    for (std::size_t j = 0; j < dim; ++j) {
      double center = 0.0;
      if (classes == 2) {
        center = label == 0 ? -offset : offset;
      } else if (j == label % dim) {
        center = offset;
      }
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          center + rng.standard_normal();
    }
  }
  return data;
}

void normalize_rows_unit_l2(Dataset& data) {
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    const double norm = data.features.row(i).norm();
    if (norm > 0.0) data.features.row(i) /= norm;
  }
}

std::vector<ParamVector> Problem::sample_grads(const ParamVector& x,
                                               std::span<const std::size_t> indices) const {
  std::vector<ParamVector> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(sample_grad(x, i));
  return out;
}

double Problem::loss(const ParamVector& x) const {
  const std::size_t n = sample_count();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += sample_loss(x, i);
  return acc / static_cast<double>(n);
}

ParamVector Problem::gradient(const ParamVector& x) const {
  const std::size_t n = sample_count();
  ParamVector acc(dim(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const ParamVector g = sample_grad(x, i);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : acc) v *= inv;
  return acc;
}

double Problem::mean_loss(const ParamVector& x, std::span<const std::size_t> indices) const {
  if (indices.empty()) throw PreconditionError("mean_loss: empty index set");
  double acc = 0.0;
  for (std::size_t i : indices) acc += sample_loss(x, i);
  return acc / static_cast<double>(indices.size());
}

std::optional<double> Problem::accuracy(const ParamVector&, std::span<const std::size_t>) const {
  return std::nullopt;
}

// ---------------------------------------------------------------- quadratic

QuadraticProblem::QuadraticProblem(double curvature, std::size_t dim, double initial_value)
    : curvature_(curvature), dim_(dim), initial_value_(initial_value) {
  if (!(curvature > 0.0)) throw PreconditionError("quadratic: curvature l must be > 0");
  if (dim == 0) throw PreconditionError("quadratic: dim must be >= 1");
}

double QuadraticProblem::loss(const ParamVector& x) const {
  check_dim(x, dim_, "quadratic");
  return 0.5 * curvature_ * squared_norm(x);
}

ParamVector QuadraticProblem::gradient(const ParamVector& x) const {
  check_dim(x, dim_, "quadratic");
  ParamVector g(dim_);
  for (std::size_t j = 0; j < dim_; ++j) g[j] = curvature_ * x[j];
  return g;
}

double QuadraticProblem::sample_loss(const ParamVector& x, std::size_t i) const {
  check_index(i, 1, "quadratic");
  return loss(x);
}

ParamVector QuadraticProblem::sample_grad(const ParamVector& x, std::size_t i) const {
  check_index(i, 1, "quadratic");
  return gradient(x);
}

// -------------------------------------------------------- linear regression

LinearRegressionProblem::LinearRegressionProblem(std::shared_ptr<const Dataset> data, double ridge)
    : data_(std::move(data)), ridge_(ridge) {
  check_dataset(data_, "linear_regression");
  if (!(ridge >= 0.0)) throw PreconditionError("linear_regression: ridge must be >= 0");
  const auto& X = data_->features;
  const Eigen::Map<const Eigen::VectorXd> y(data_->labels.data(),
                                            static_cast<Eigen::Index>(data_->rows()));
  const double n = static_cast<double>(data_->rows());
  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += ridge_;
  const Eigen::VectorXd rhs = X.transpose() * y;
  const Eigen::VectorXd w = gram.ldlt().solve(rhs);
  optimum_ = ParamVector(std::vector<double>(w.data(), w.data() + w.size()));
  optimal_value_ = loss(optimum_);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram / n);
  lipschitz_ = eig.eigenvalues().maxCoeff();
  strong_convexity_ = std::max(eig.eigenvalues().minCoeff(), 0.0);
}

double LinearRegressionProblem::sample_loss(const ParamVector& x, std::size_t i) const {
  check_dim(x, dim(), "linear_regression");
  check_index(i, sample_count(), "linear_regression");
  const double r = dot_row(x, data_->row(i)) - data_->labels[i];
  return 0.5 * r * r + 0.5 * ridge_ * squared_norm(x) / static_cast<double>(sample_count());
}

ParamVector LinearRegressionProblem::sample_grad(const ParamVector& x, std::size_t i) const {
  check_dim(x, dim(), "linear_regression");
  check_index(i, sample_count(), "linear_regression");
  const auto row = data_->row(i);
  const double r = dot_row(x, row) - data_->labels[i];
  const double shrink = ridge_ / static_cast<double>(sample_count());
  ParamVector g(dim());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = r * row[j] + shrink * x[j];
  return g;
}

// ------------------------------------------------------ logistic regression

LogisticRegressionProblem::LogisticRegressionProblem(std::shared_ptr<const Dataset> data)
    : data_(std::move(data)) {
  check_dataset(data_, "logistic_regression");
  for (std::size_t i = 0; i < data_->rows(); ++i) {
    const double y = data_->labels[i];
    if (y != 0.0 && y != 1.0) {
      throw PreconditionError("logistic_regression: label at row " + std::to_string(i) +
                              " is not 0 or 1");
    }
  }
  const double max_sq = data_->features.rowwise().squaredNorm().maxCoeff();
  lipschitz_ = 0.25 * max_sq * 1.01;
}

double LogisticRegressionProblem::sample_loss(const ParamVector& x, std::size_t i) const {
  check_dim(x, dim(), "logistic_regression");
  check_index(i, sample_count(), "logistic_regression");
  const double sign = 2.0 * data_->labels[i] - 1.0;
  return softplus(-sign * dot_row(x, data_->row(i)));
}

ParamVector LogisticRegressionProblem::sample_grad(const ParamVector& x, std::size_t i) const {
  check_dim(x, dim(), "logistic_regression");
  check_index(i, sample_count(), "logistic_regression");
  const auto row = data_->row(i);
  const double sign = 2.0 * data_->labels[i] - 1.0;
  const double coef = -sign * logistic(-sign * dot_row(x, row));
  ParamVector g(dim());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = coef * row[j];
  return g;
}

std::optional<double> LogisticRegressionProblem::accuracy(
    const ParamVector& x, std::span<const std::size_t> indices) const {
  if (indices.empty()) return std::nullopt;
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    const double predicted = dot_row(x, data_->row(i)) > 0.0 ? 1.0 : 0.0;
    if (predicted == data_->labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

// ---------------------------------------------------------------------- MLP

std::string_view to_string(Activation activation) {
  return activation == Activation::tanh ? "tanh" : "relu";
}

std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  return std::nullopt;
}

namespace {

double activate(Activation a, double z) { return a == Activation::tanh ? std::tanh(z) : std::max(z, 0.0); }

// Derivative expressed through the pre-activation z.
double activate_slope(Activation a, double z) {
  if (a == Activation::tanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  return z > 0.0 ? 1.0 : 0.0;
}

std::size_t label_index(double label, std::size_t classes) {
  if (!(label >= 0.0) || label != std::floor(label) || label >= static_cast<double>(classes)) {
    throw PreconditionError("mlp: label " + std::to_string(label) + " is not a class index below " +
                            std::to_string(classes));
  }
  return static_cast<std::size_t>(label);
}

// Softmax cross-entropy on logits; returns the loss and leaves softmax - onehot in `grad`.
double softmax_xent(const std::vector<double>& logits, std::size_t label,
                    std::vector<double>* grad) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - top);
  const double lse = top + std::log(denom);
  if (grad) {
    grad->resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) (*grad)[k] = std::exp(logits[k] - lse);
    (*grad)[label] -= 1.0;
  }
  return lse - logits[label];
}

}  // namespace

MlpProblem::MlpProblem(std::shared_ptr<const Dataset> data, std::vector<std::size_t> layer_sizes,
                       Activation activation, std::uint64_t init_seed)
    : data_(std::move(data)), sizes_(std::move(layer_sizes)), activation_(activation) {
  check_dataset(data_, "mlp");
  if (sizes_.size() < 3) throw PreconditionError("mlp: need at least one hidden layer");
  for (std::size_t s : sizes_) {
    if (s == 0) throw PreconditionError("mlp: layer sizes must be positive");
  }
  if (sizes_.front() != data_->width()) throw ShapeError("mlp input layer", data_->width(), sizes_.front());
  for (std::size_t i = 0; i < data_->rows(); ++i) label_index(data_->labels[i], sizes_.back());

  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) dim_ += sizes_[k + 1] * (sizes_[k] + 1);
  initial_ = ParamVector(dim_);
  RngStream rng(init_seed, 0x6d6c7000ull);
  std::size_t off = 0;
  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[k]));
    const std::size_t count = sizes_[k + 1] * (sizes_[k] + 1);
    for (std::size_t p = 0; p < count; ++p) initial_[off + p] = bound * (2.0 * rng.uniform01() - 1.0);
    off += count;
  }
}

std::vector<double> MlpProblem::logits(const ParamVector& x, std::span<const double> input) const {
  std::vector<double> a(input.begin(), input.end());
  std::size_t off = 0;
  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
    const std::size_t in = sizes_[k];
    const std::size_t out = sizes_[k + 1];
    const bool last = k + 2 == sizes_.size();
    std::vector<double> z(out);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = x[off + in * out + r];
      for (std::size_t c = 0; c < in; ++c) acc += x[off + r * in + c] * a[c];
      z[r] = last ? acc : activate(activation_, acc);
    }
    a = std::move(z);
    off += out * (in + 1);
  }
  return a;
}

double MlpProblem::loss_for(const ParamVector& x, std::span<const double> input,
                            std::size_t label) const {
  check_dim(x, dim_, "mlp");
  if (input.size() != sizes_.front()) throw ShapeError("mlp input", sizes_.front(), input.size());
  return softmax_xent(logits(x, input), label, nullptr);
}

ParamVector MlpProblem::grad_for(const ParamVector& x, std::span<const double> input,
                                 std::size_t label) const {
  check_dim(x, dim_, "mlp");
  if (input.size() != sizes_.front()) throw ShapeError("mlp input", sizes_.front(), input.size());
  const std::size_t layers = sizes_.size() - 1;

  // Forward pass keeping every layer's input activation and pre-activation.
  std::vector<std::vector<double>> acts(layers + 1);
  std::vector<std::vector<double>> pre(layers);
  std::vector<std::size_t> offsets(layers);
  acts[0].assign(input.begin(), input.end());
  std::size_t off = 0;
  for (std::size_t k = 0; k < layers; ++k) {
    offsets[k] = off;
    const std::size_t in = sizes_[k];
    const std::size_t out = sizes_[k + 1];
    pre[k].resize(out);
    acts[k + 1].resize(out);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = x[off + in * out + r];
      for (std::size_t c = 0; c < in; ++c) acc += x[off + r * in + c] * acts[k][c];
      pre[k][r] = acc;
      acts[k + 1][r] = k + 1 == layers ? acc : activate(activation_, acc);
    }
    off += out * (in + 1);
  }

  std::vector<double> delta;
  softmax_xent(acts[layers], label, &delta);
  ParamVector g(dim_, 0.0);
  for (std::size_t k = layers; k-- > 0;) {
    const std::size_t in = sizes_[k];
    const std::size_t out = sizes_[k + 1];
    const std::size_t base = offsets[k];
    for (std::size_t r = 0; r < out; ++r) {
      for (std::size_t c = 0; c < in; ++c) g[base + r * in + c] = delta[r] * acts[k][c];
      g[base + in * out + r] = delta[r];
    }
    if (k == 0) break;
    std::vector<double> prev(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      for (std::size_t c = 0; c < in; ++c) prev[c] += x[base + r * in + c] * delta[r];
    }
    for (std::size_t c = 0; c < in; ++c) prev[c] *= activate_slope(activation_, pre[k - 1][c]);
    delta = std::move(prev);
  }
  return g;
}

double MlpProblem::sample_loss(const ParamVector& x, std::size_t i) const {
  check_index(i, sample_count(), "mlp");
  return loss_for(x, data_->row(i), label_index(data_->labels[i], sizes_.back()));
}

ParamVector MlpProblem::sample_grad(const ParamVector& x, std::size_t i) const {
  check_index(i, sample_count(), "mlp");
  return grad_for(x, data_->row(i), label_index(data_->labels[i], sizes_.back()));
}

std::vector<ParamVector> MlpProblem::batched_sample_grads(
    const ParamVector& x, std::span<const std::size_t> indices) const {
  check_dim(x, dim_, "mlp");
  using Eigen::Index;
  const Index batch = static_cast<Index>(indices.size());
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t i : indices) check_index(i, sample_count(), "mlp");

  std::vector<RowMatrix> acts(layers + 1);
  std::vector<RowMatrix> pre(layers);
  std::vector<std::size_t> offsets(layers);
  acts[0] = RowMatrix(batch, static_cast<Index>(sizes_[0]));
  for (Index b = 0; b < batch; ++b) {
    acts[0].row(b) = data_->features.row(static_cast<Index>(indices[static_cast<std::size_t>(b)]));
  }
  std::size_t off = 0;
  for (std::size_t k = 0; k < layers; ++k) {
    offsets[k] = off;
    const Index in = static_cast<Index>(sizes_[k]);
    const Index out = static_cast<Index>(sizes_[k + 1]);
    const Eigen::Map<const RowMatrix> W(x.data() + off, out, in);
    const Eigen::Map<const Eigen::RowVectorXd> bias(x.data() + off + in * out, out);
    pre[k] = (acts[k] * W.transpose()).rowwise() + bias;
    if (k + 1 == layers) {
      acts[k + 1] = pre[k];
    } else {
      acts[k + 1] = pre[k].unaryExpr([this](double z) { return activate(activation_, z); });
    }
    off += static_cast<std::size_t>(out * (in + 1));
  }

  // Softmax minus one-hot, row by row.
  RowMatrix delta = acts[layers];
  for (Index b = 0; b < batch; ++b) {
    const double top = delta.row(b).maxCoeff();
    delta.row(b) = (delta.row(b).array() - top).exp();
    delta.row(b) /= delta.row(b).sum();
    const std::size_t label =
        label_index(data_->labels[indices[static_cast<std::size_t>(b)]], sizes_.back());
    delta(b, static_cast<Index>(label)) -= 1.0;
  }

  std::vector<ParamVector> grads(indices.size(), ParamVector(dim_, 0.0));
  for (std::size_t k = layers; k-- > 0;) {
    const Index in = static_cast<Index>(sizes_[k]);
    const Index out = static_cast<Index>(sizes_[k + 1]);
    for (Index b = 0; b < batch; ++b) {
      ParamVector& g = grads[static_cast<std::size_t>(b)];
      Eigen::Map<RowMatrix> dW(g.data() + offsets[k], out, in);
      dW.noalias() = delta.row(b).transpose() * acts[k].row(b);
      Eigen::Map<Eigen::RowVectorXd>(g.data() + offsets[k] + in * out, out) = delta.row(b);
    }
    if (k == 0) break;
    const Eigen::Map<const RowMatrix> W(x.data() + offsets[k], out, in);
    RowMatrix prev = delta * W;
    prev.array() *=
        pre[k - 1].unaryExpr([this](double z) { return activate_slope(activation_, z); }).array();
    delta = std::move(prev);
  }
  return grads;
}

std::optional<double> MlpProblem::accuracy(const ParamVector& x,
                                           std::span<const std::size_t> indices) const {
  if (indices.empty()) return std::nullopt;
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    const std::vector<double> z = logits(x, data_->row(i));
    const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (static_cast<double>(best) == data_->labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

// ------------------------------------------------------------ gradient check

GradCheckResult finite_difference_check(const Problem& problem, const ParamVector& x,
                                        std::size_t sample, double step, double floor) {
  const ParamVector analytic = problem.sample_grad(x, sample);
  ParamVector probe = x;
  GradCheckResult result;
  double diff_sq = 0.0;
  double numeric_sq = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + step;
    const double up = problem.sample_loss(probe, sample);
    probe[j] = x[j] - step;
    const double down = problem.sample_loss(probe, sample);
    probe[j] = x[j];
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::fabs(numeric - analytic[j]);
    if (err > result.max_abs_error) {
      result.max_abs_error = err;
      result.worst_coordinate = j;
    }
    diff_sq += err * err;
    numeric_sq += numeric * numeric;
  }
  const double scale =
      std::max({std::sqrt(squared_norm(analytic)), std::sqrt(numeric_sq), floor});
  result.relative_error = std::sqrt(diff_sq) / scale;
  return result;
}

}  // namespace vrlr
