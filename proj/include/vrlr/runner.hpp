#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vrlr/config.hpp"
#include "vrlr/problems.hpp"

namespace vrlr {

enum class RunStatus { converged, budget_exhausted, diverged };
std::string_view to_string(RunStatus status);
std::optional<RunStatus> parse_run_status(std::string_view name);

struct MetricRow {
  std::uint64_t step = 0;   // number of updates taken so far
  std::uint64_t epoch = 0;  // completed epochs
  double train_loss = 0.0;  // full objective over the training indices
  std::optional<double> eval_loss;
  std::optional<double> eval_accuracy;
  double lambda_mean = 1.0;
  double lambda_min = 1.0;
  double lambda_max = 1.0;
  double rho_mean = 0.0;
  double x_norm = 0.0;
  std::optional<double> r;  // |x - x*|^2 when x* is known
  double wall_time = 0.0;   // seconds since the run started; 0 when not recorded

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::budget_exhausted;
  std::uint64_t steps_taken = 0;
  std::vector<MetricRow> rows;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// Problem instance shared (read-only) by every seed of an experiment.
struct PreparedProblem {
  std::shared_ptr<const Dataset> data;
  std::unique_ptr<Problem> problem;
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

// Builds the dataset and problem. The train/eval split is drawn from the
// dataset seed, so every run seed sees the same split.
PreparedProblem prepare_problem(const ExperimentConfig& config);

// One seeded run. Rows are written every metric_cadence steps, at epoch ends
// when evaluation runs once per epoch, and at the final step.
RunRecord run_single(const ExperimentConfig& config, const PreparedProblem& prepared,
                     std::uint64_t seed);

// Runs every configured seed, in parallel up to `threads` workers (0 means
// VR_OPTIM_THREADS if set, otherwise the hardware concurrency). Records are
// returned in seed order.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, std::size_t threads = 0);

// Worker count from VR_OPTIM_THREADS (when set and positive) or the hardware.
std::size_t default_thread_count();

// Writes <dir>/seed_<seed>.csv and <dir>/seed_<seed>.json for every record,
// plus <dir>/config.toml.
void write_run_outputs(const ExperimentConfig& config, std::span<const RunRecord> records,
                       const std::filesystem::path& dir);

// CSV text for one record: header row, then one row per MetricRow with 17
// significant digits; missing optional values are empty cells.
std::string run_csv(const RunRecord& record);

// Parses run_csv output back into rows.
std::vector<MetricRow> parse_run_csv(std::string_view text);

// Reads every seed_<seed>.json manifest in `dir` together with its CSV.
std::vector<RunRecord> read_run_outputs(const std::filesystem::path& dir);

}  // namespace vrlr
