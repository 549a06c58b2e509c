#include "vrlr/stream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace vrlr {

GradientStream::GradientStream(const Problem& problem, StreamOptions options, RngStream rng,
                               std::vector<std::size_t> train_indices)
    : problem_(problem),
      options_(std::move(options)),
      shuffle_rng_(rng.fork(1)),
      noise_rng_(rng.fork(2)),
      train_(std::move(train_indices)),
      synthetic_(problem.sample_count() == 1) {
  if (options_.batch_size == 0) throw ConfigError("batch_size", "must be >= 1");
  options_.noise.validate();
  if (train_.empty()) {
    train_.resize(problem_.sample_count());
    std::iota(train_.begin(), train_.end(), std::size_t{0});
  }
  for (std::size_t i : train_) {
    if (i >= problem_.sample_count()) {
      throw PreconditionError("gradient stream: training index out of range");
    }
  }
  if (!synthetic_) reshuffle();
}

std::size_t GradientStream::batches_per_epoch() const noexcept {
  if (synthetic_) return 1;
  return std::max<std::size_t>(1, train_.size() / options_.batch_size);
}

void GradientStream::reshuffle() {
  order_ = train_;
  shuffle(order_, shuffle_rng_);
}

StreamBatch GradientStream::next(const ParamVector& x) {
  StreamBatch batch;
  batch.step = step_;
  batch.epoch = epoch_;
  batch.noise_variance = options_.noise.variance_at(step_);

  const std::size_t m = options_.batch_size;
  if (synthetic_) {
    const ParamVector g = problem_.sample_grad(x, 0);
    batch.per_sample.assign(m, g);
    batch.ends_epoch = true;
    if (options_.track_true_gradient) batch.true_gradient = g;
  } else {
    const std::size_t per_epoch = batches_per_epoch();
    const std::size_t begin = batch_in_epoch_ * std::min(m, order_.size());
    const bool last = batch_in_epoch_ + 1 == per_epoch;
    const std::size_t end = last ? order_.size() : begin + m;
    batch.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                         order_.begin() + static_cast<std::ptrdiff_t>(end));
    batch.per_sample = problem_.sample_grads(x, batch.indices);
    batch.ends_epoch = last;
    if (options_.track_true_gradient) batch.true_gradient = problem_.gradient(x);
  }

  const NoiseSchedule& noise = options_.noise;
  if (batch.noise_variance > 0.0) {
    const bool relative = noise.scaling == NoiseScaling::relative;
    for (ParamVector& sample : batch.per_sample) {
      for (double& v : sample) {
        const double e = noise.draw(noise_rng_, step_);
        v += relative ? e * std::fabs(v) : e;
      }
    }
  }

  ++step_;
  if (batch.ends_epoch) {
    ++epoch_;
    batch_in_epoch_ = 0;
    if (!synthetic_) reshuffle();
  } else {
    ++batch_in_epoch_;
  }
  return batch;
}

}  // namespace vrlr
