#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vrlr/datasets.hpp"
#include "vrlr/noise.hpp"
#include "vrlr/optim.hpp"
#include "vrlr/problems.hpp"

namespace vrlr {

enum class ProblemKind { quadratic, linear_regression, logistic_regression, mlp };
std::string_view to_string(ProblemKind kind);
std::optional<ProblemKind> parse_problem_kind(std::string_view name);

enum class DatasetKind { none, csv, idx, blobs };
std::string_view to_string(DatasetKind kind);
std::optional<DatasetKind> parse_dataset_kind(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::none;
  // csv
  std::string path;
  std::string label_column = "label";
  // idx
  std::string images;
  std::string labels;
  std::size_t limit = 0;  // 0 keeps every example
  IdxNormalize normalize = IdxNormalize::none;
  // blobs
  std::size_t samples = 500;
  std::size_t dim = 2;
  std::size_t classes = 2;
  double offset = 1.0;
  // blob generation and the train/eval split
  std::uint64_t seed = 0;
};

struct ProblemSpec {
  ProblemKind kind = ProblemKind::quadratic;
  // quadratic
  std::size_t dim = 10;
  double curvature = 1.0;
  double initial_value = 1.0;
  // linear regression
  double ridge = 0.0;
  // mlp
  std::vector<std::size_t> hidden = {16};
  Activation activation = Activation::tanh;
  std::uint64_t init_seed = 0;
  DatasetSpec dataset;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds = {0};
  std::uint64_t steps = 0;   // exactly one of steps / epochs is positive
  std::uint64_t epochs = 0;
  std::size_t batch_size = 100;
  std::uint64_t metric_cadence = 1;
  std::string output_dir = "runs";
  bool record_wall_time = true;
  bool stop_on_convergence = true;
  std::uint64_t convergence_window = 50;
  double convergence_tolerance = 1e-8;
  double eval_fraction = 0.0;
  std::uint64_t eval_every = 0;  // 0 evaluates at the end of every epoch
  ProblemSpec problem;
  NoiseSchedule noise;
  OptimizerConfig optimizer;
  // Directory that relative dataset paths resolve against.
  std::filesystem::path base_dir = ".";
};

// Parses TOML text. Unknown keys raise ConfigError listing every one of them;
// type and range problems raise ConfigError naming the field path.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<string>");

// Reads and parses a file; base_dir becomes the file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& config);

// TOML text that parses back to the same configuration.
std::string to_toml(const ExperimentConfig& config);

// Canonical JSON (sorted keys) of every semantic field plus the sampling scheme.
nlohmann::json to_json(const ExperimentConfig& config);

// FNV-1a 64 of the canonical JSON, as 16 lowercase hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace vrlr
