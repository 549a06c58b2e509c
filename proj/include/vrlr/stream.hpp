#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "vrlr/noise.hpp"
#include "vrlr/numerics.hpp"
#include "vrlr/problems.hpp"

namespace vrlr {

// Recorded in the config hash so that a change of scheme changes the hash.
inline constexpr const char* kSamplingScheme = "epoch_shuffle_without_replacement_merge_remainder";

struct StreamBatch {
  std::uint64_t step = 0;                // 0-based index of this batch
  std::uint64_t epoch = 0;               // 0-based epoch the batch belongs to
  bool ends_epoch = false;               // last batch of its epoch
  double noise_variance = 0.0;           // sigma0^2(step)
  std::vector<std::size_t> indices;      // dataset rows (empty for synthetic testbeds)
  std::vector<ParamVector> per_sample;   // per-sample increments, noise included
  std::optional<ParamVector> true_gradient;
};

struct StreamOptions {
  std::size_t batch_size = 1;
  NoiseSchedule noise;
  // Also return the full-objective gradient at x (costs one pass over the data
  // for dataset problems).
  bool track_true_gradient = false;
};

// Yields mini-batches of per-sample increments at the caller's iterate.
//
// Dataset problems: each epoch shuffles the training indices with a stream
// forked from `rng` and cuts them into floor(N / m) batches, merging the
// remainder into the last batch; if m > N an epoch is one batch of N.
// Synthetic testbeds (sample_count() == 1): every batch has m copies of the
// exact gradient and there is no epoch structure beyond one batch per epoch.
// Additive noise per coordinate follows the schedule at the batch's step.
class GradientStream {
 public:
  GradientStream(const Problem& problem, StreamOptions options, RngStream rng,
                 std::vector<std::size_t> train_indices = {});

  StreamBatch next(const ParamVector& x);

  std::uint64_t step() const noexcept { return step_; }
  std::uint64_t epoch() const noexcept { return epoch_; }
  std::size_t batches_per_epoch() const noexcept;
  const std::vector<std::size_t>& train_indices() const noexcept { return train_; }

 private:
  void reshuffle();

  const Problem& problem_;
  StreamOptions options_;
  RngStream shuffle_rng_;
  RngStream noise_rng_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> order_;
  bool synthetic_;
  std::uint64_t step_ = 0;
  std::uint64_t epoch_ = 0;
  std::size_t batch_in_epoch_ = 0;
};

}  // namespace vrlr
