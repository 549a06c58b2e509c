#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vrlr {

// One verified property with a short human-readable account of the numbers.
struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
  bool informational = false;  // reported but never fails the suite
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckLine> checks;
  double seconds = 0.0;
  double budget_seconds = 0.0;  // 0 means no runtime budget

  bool within_budget() const noexcept { return budget_seconds <= 0.0 || seconds <= budget_seconds; }
  bool passed() const noexcept;
};

struct SuiteOptions {
  std::size_t seeds = 0;       // 0 keeps the suite's default replica count
  std::uint64_t base_seed = 1;
};

// Suites that need no files: regularizer, theorem3, lemma1, theorem1,
// theorem2, lyapunov, strong_convexity, vr_adam, consistency, cochran,
// gradcheck, convergence.
const std::vector<std::string>& suite_names();

// The subset run by `verify-theory` with no --suite.
const std::vector<std::string>& theory_suite_names();

// Throws PreconditionError for an unknown suite name.
SuiteResult run_suite(std::string_view name, const SuiteOptions& options = {});

// Runs the fixture config twice and compares both records with each other and
// with the committed seed_<n>.csv / seed_<n>.json files in `golden_dir`.
SuiteResult determinism_suite(const std::filesystem::path& fixture_config,
                              const std::filesystem::path& golden_dir);

// Fixed-width table, one line per check, then a suite verdict line.
std::string format_suite(const SuiteResult& result);

}  // namespace vrlr
