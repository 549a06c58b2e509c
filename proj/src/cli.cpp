#include "vrlr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vrlr/audits.hpp"
#include "vrlr/config.hpp"
#include "vrlr/error.hpp"
#include "vrlr/optim.hpp"
#include "vrlr/report.hpp"
#include "vrlr/runner.hpp"
#include "vrlr/stream.hpp"

#ifndef VRLR_BUILD_FLAGS
#define VRLR_BUILD_FLAGS ""
#endif
#ifndef VRLR_BUILD_TYPE
#define VRLR_BUILD_TYPE ""
#endif

namespace vrlr {

namespace {

struct RunArgs {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> steps;
  std::string out_dir;
  std::string mode;
  std::optional<double> impact;
  std::string optimizer;
};

struct CompareArgs {
  std::string a, b;
  std::string metric = "train_loss";
  std::string csv;
};

struct VerifyArgs {
  std::vector<std::string> suites;
  std::size_t seeds = 0;
  std::uint64_t base_seed = 1;
};

struct GradcheckArgs {
  std::string config;
  std::size_t points = 100;
  std::uint64_t seed = 1;
};

std::vector<std::string> names_of(auto values) {
  std::vector<std::string> out;
  for (auto v : values) out.emplace_back(to_string(v));
  return out;
}

int do_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  if (!std::filesystem::exists(args.config)) {
    err << fmt::format("error: config file '{}' does not exist\n", args.config);
    return kExitUsage;
  }
  ExperimentConfig config;
  try {
    config = load_config(args.config);
    if (!args.seeds.empty()) config.seeds = args.seeds;
    if (args.steps) {
      config.steps = *args.steps;
      config.epochs = 0;
    }
    if (!args.mode.empty()) config.optimizer.vr_mode = *parse_normalization_mode(args.mode);
    if (args.impact) config.optimizer.impact = *args.impact;
    if (!args.optimizer.empty()) config.optimizer.kind = *parse_optimizer_kind(args.optimizer);
    validate(config);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::filesystem::path dir =
      args.out_dir.empty() ? std::filesystem::path(config.output_dir) / config.name
                           : std::filesystem::path(args.out_dir);
  const std::vector<RunRecord> records = run_experiment(config);
  write_run_outputs(config, records, dir);
  out << fmt::format("config {} ({}), {} seed(s), optimizer {}\n", config.name, config_hash(config),
                     records.size(), to_string(config.optimizer.kind));
  for (const RunRecord& r : records) {
    const double final_loss = r.rows.empty() ? 0.0 : r.rows.back().train_loss;
    out << fmt::format("  seed {:>6}  {:<16} steps {:>8}  final train loss {:.6g}\n", r.seed,
                       to_string(r.status), r.steps_taken, final_loss);
  }
  out << fmt::format("wrote {}\n", dir.string());
  return kExitOk;
}

int do_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
  const std::optional<CompareMetric> metric = parse_compare_metric(args.metric);
  if (!metric) {
    err << fmt::format("error: unknown metric '{}'\n", args.metric);
    return kExitUsage;
  }
  for (const std::string& dir : {args.a, args.b}) {
    if (!std::filesystem::is_directory(dir)) {
      err << fmt::format("error: run directory '{}' does not exist\n", dir);
      return kExitUsage;
    }
  }
  const std::vector<RunRecord> a = read_run_outputs(args.a);
  const std::vector<RunRecord> b = read_run_outputs(args.b);
  const CompareSummary summary = compare_report(a, b, *metric);
  out << compare_text(summary);
  if (!args.csv.empty()) {
    std::ofstream file(args.csv, std::ios::binary);
    if (!file) throw Error(fmt::format("cannot write {}", args.csv));
    file << compare_csv(summary);
    out << fmt::format("wrote {}\n", args.csv);
  }
  return kExitOk;
}

int do_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> suites;
  for (const std::string& s : args.suites) {
    if (s == "all") {
      suites.insert(suites.end(), theory_suite_names().begin(), theory_suite_names().end());
    } else if (std::find(suite_names().begin(), suite_names().end(), s) != suite_names().end()) {
      suites.push_back(s);
    } else {
      err << fmt::format("error: unknown suite '{}'; choose from all, {}\n", s,
                         fmt::join(suite_names(), ", "));
      return kExitUsage;
    }
  }
  if (suites.empty()) suites = theory_suite_names();

  SuiteOptions options;
  options.seeds = args.seeds;
  options.base_seed = args.base_seed;
  bool all_passed = true;
  for (const std::string& name : suites) {
    const SuiteResult r = run_suite(name, options);
    out << fmt::format("suite {}\n", name) << format_suite(r);
    out.flush();
    all_passed = all_passed && r.passed();
  }
  out << (all_passed ? "all checks passed\n" : "some checks FAILED\n");
  return all_passed ? kExitOk : kExitFailure;
}

int do_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  if (args.config.empty()) {
    SuiteOptions options;
    options.seeds = args.points;
    options.base_seed = args.seed;
    const SuiteResult r = run_suite("gradcheck", options);
    out << format_suite(r);
    return r.passed() ? kExitOk : kExitFailure;
  }
  if (!std::filesystem::exists(args.config)) {
    err << fmt::format("error: config file '{}' does not exist\n", args.config);
    return kExitUsage;
  }
  ExperimentConfig config;
  try {
    config = load_config(args.config);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const PreparedProblem prepared = prepare_problem(config);
  const Problem& problem = *prepared.problem;
  const double tolerance = config.problem.kind == ProblemKind::mlp ? 1e-4 : 1e-5;
  RngStream rng(args.seed, 0x9c);
  double worst = 0.0;
  for (std::size_t p = 0; p < args.points; ++p) {
    ParamVector x = problem.initial_point();
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += 0.5 * rng.standard_normal();
    const std::size_t sample = rng.index_uniform(problem.sample_count());
    worst = std::max(worst, finite_difference_check(problem, x, sample).relative_error);
  }
  const bool ok = worst < tolerance;
  out << fmt::format("  [{}] {} ({} params): {} points, max rel err {:.3e} (tol {:.0e})\n",
                     ok ? "PASS" : "FAIL", problem.name(), problem.dim(), args.points, worst,
                     tolerance);
  return ok ? kExitOk : kExitFailure;
}

int do_info(std::ostream& out) {
  out << fmt::format("vrlr {}\n", VRLR_VERSION);
  out << fmt::format("build type: {}\n", VRLR_BUILD_TYPE);
  out << fmt::format("determinism flags: {}\n", VRLR_BUILD_FLAGS);
  out << fmt::format("compiler: {}\n", __VERSION__);
  out << fmt::format("rng: philox4x32-10\n");
  out << fmt::format("sampling: {}\n", kSamplingScheme);
  out << fmt::format("seed threads: {} (VR_OPTIM_THREADS caps this)\n", default_thread_count());
  out << fmt::format("suites: {}\n", fmt::join(suite_names(), ", "));
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variance-regularized learning rates: runs, comparisons and theory audits", "vrlr"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Run an experiment config over its seeds");
  run->add_option("--config", run_args.config, "Experiment TOML file")->required();
  run->add_option("--seed", run_args.seeds, "Comma-separated seeds overriding the config")
      ->delimiter(',');
  run->add_option("--steps", run_args.steps, "Step budget overriding the config");
  run->add_option("--out", run_args.out_dir, "Output directory (default <output_dir>/<name>)");
  run->add_option("--mode", run_args.mode, "Regularizer normalization")
      ->check(CLI::IsMember({"mean_normalized", "algorithm_literal"}));
  run->add_option("--s", run_args.impact, "Impact factor s")->check(CLI::PositiveNumber);
  run->add_option("--optimizer", run_args.optimizer, "Optimizer kind")
      ->check(CLI::IsMember(names_of(std::vector{OptimizerKind::sgd, OptimizerKind::vr_sgd,
                                                 OptimizerKind::momentum, OptimizerKind::adam,
                                                 OptimizerKind::vr_adam})));

  CompareArgs cmp_args;
  CLI::App* compare = app.add_subcommand("compare", "Paired comparison of two run directories");
  compare->add_option("a", cmp_args.a, "Baseline run directory")->required();
  compare->add_option("b", cmp_args.b, "Candidate run directory")->required();
  compare->add_option("--metric", cmp_args.metric, "train_loss, eval_loss, eval_accuracy or r");
  compare->add_option("--csv", cmp_args.csv, "Write the per-step comparison CSV here");

  VerifyArgs verify_args;
  CLI::App* verify = app.add_subcommand("verify-theory", "Run theory audit suites");
  verify->add_option("--suite", verify_args.suites, "Suite name (repeatable, or 'all')")
      ->delimiter(',');
  verify->add_option("--seeds", verify_args.seeds, "Replica count overriding the suite default");
  verify->add_option("--base-seed", verify_args.base_seed, "First seed");

  GradcheckArgs grad_args;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient validation");
  gradcheck->add_option("--config", grad_args.config, "Check only this config's problem");
  gradcheck->add_option("--points", grad_args.points, "Random points per problem")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", grad_args.seed, "Seed for the random points");

  CLI::App* info = app.add_subcommand("info", "Print version and build settings");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (run->parsed()) return do_run(run_args, out, err);
    if (compare->parsed()) return do_compare(cmp_args, out, err);
    if (verify->parsed()) return do_verify(verify_args, out, err);
    if (gradcheck->parsed()) return do_gradcheck(grad_args, out, err);
    if (info->parsed()) return do_info(out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace vrlr
