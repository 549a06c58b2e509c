#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vrlr/runner.hpp"

namespace vrlr {

// Metrics compare_report understands. Accuracy is higher-is-better; the rest
// are lower-is-better.
enum class CompareMetric { train_loss, eval_loss, eval_accuracy, r };
std::string_view to_string(CompareMetric metric);
std::optional<CompareMetric> parse_compare_metric(std::string_view name);

struct CompareRow {
  std::uint64_t step = 0;
  double median_a = 0.0, q25_a = 0.0, q75_a = 0.0;
  double median_b = 0.0, q25_b = 0.0, q75_b = 0.0;
  double median_difference = 0.0;  // median over seeds of (b - a)
  double win_rate_b = 0.0;         // share of seeds where b is better; ties count 1/2
};

struct CompareSummary {
  CompareMetric metric = CompareMetric::train_loss;
  std::size_t seeds = 0;
  // One row per step present in every record of both sets.
  std::vector<CompareRow> rows;
  // Last recorded value of each run.
  double final_median_a = 0.0, final_median_b = 0.0;
  double final_median_difference = 0.0;
  double final_win_rate_b = 0.0;
  // Mean of the metric over each run's rows.
  double average_median_a = 0.0, average_median_b = 0.0;
  double average_median_difference = 0.0;
  double average_win_rate_b = 0.0;
};

// Pairs runs by seed. Throws PreconditionError if the seed sets differ or a
// run lacks the metric.
CompareSummary compare_report(std::span<const RunRecord> a, std::span<const RunRecord> b,
                              CompareMetric metric);

// Quantile with linear interpolation between order statistics (type 7).
double quantile(std::vector<double> values, double q);

// CSV with columns step, median_a, q25_a, q75_a, median_b, q25_b, q75_b,
// median_difference, win_rate_b.
std::string compare_csv(const CompareSummary& summary);

// Short human-readable summary.
std::string compare_text(const CompareSummary& summary);

}  // namespace vrlr
