#include "vrlr/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "vrlr/datasets.hpp"
#include "vrlr/optim.hpp"
#include "vrlr/stream.hpp"

namespace vrlr {

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::converged: return "converged";
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::diverged: return "diverged";
  }
  return "?";
}

std::optional<RunStatus> parse_run_status(std::string_view name) {
  if (name == "converged") return RunStatus::converged;
  if (name == "budget_exhausted") return RunStatus::budget_exhausted;
  if (name == "diverged") return RunStatus::diverged;
  return std::nullopt;
}

namespace {

std::filesystem::path resolve(const ExperimentConfig& config, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : config.base_dir / p;
}

std::shared_ptr<const Dataset> build_dataset(const ExperimentConfig& config) {
  const DatasetSpec& d = config.problem.dataset;
  switch (d.kind) {
    case DatasetKind::none:
      return nullptr;
    case DatasetKind::csv:
      return std::make_shared<const Dataset>(load_csv_dataset(resolve(config, d.path), d.label_column));
    case DatasetKind::idx:
      return std::make_shared<const Dataset>(
          load_idx_dataset(resolve(config, d.images), resolve(config, d.labels), d.limit, d.normalize));
    case DatasetKind::blobs: {
      RngStream rng(d.seed, 0xb10b5ull);
      return std::make_shared<const Dataset>(make_blobs(d.samples, d.dim, d.classes, d.offset, rng));
    }
  }
  return nullptr;
}

std::size_t class_count(const Dataset& data) {
  double top = 0.0;
  for (double y : data.labels) top = std::max(top, y);
  return static_cast<std::size_t>(top) + 1;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

PreparedProblem prepare_problem(const ExperimentConfig& config) {
  validate(config);
  PreparedProblem out;
  out.data = build_dataset(config);
  const ProblemSpec& p = config.problem;
  switch (p.kind) {
    case ProblemKind::quadratic:
      out.problem = std::make_unique<QuadraticProblem>(p.curvature, p.dim, p.initial_value);
      break;
    case ProblemKind::linear_regression:
      out.problem = std::make_unique<LinearRegressionProblem>(out.data, p.ridge);
      break;
    case ProblemKind::logistic_regression:
      out.problem = std::make_unique<LogisticRegressionProblem>(out.data);
      break;
    case ProblemKind::mlp: {
      std::vector<std::size_t> sizes = {out.data->width()};
      sizes.insert(sizes.end(), p.hidden.begin(), p.hidden.end());
      sizes.push_back(class_count(*out.data));
      out.problem = std::make_unique<MlpProblem>(out.data, sizes, p.activation, p.init_seed);
      break;
    }
  }

  const std::size_t n = out.problem->sample_count();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (config.eval_fraction > 0.0) {
    RngStream rng(p.dataset.seed, 0x5e1175ull);
    shuffle(all, rng);
    const auto eval_count = static_cast<std::size_t>(std::llround(config.eval_fraction * static_cast<double>(n)));
    if (eval_count == 0 || eval_count >= n) {
      throw ConfigError("eval_fraction", "leaves an empty train or eval split");
    }
    out.eval.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(eval_count));
    out.train.assign(all.begin() + static_cast<std::ptrdiff_t>(eval_count), all.end());
    std::sort(out.eval.begin(), out.eval.end());
    std::sort(out.train.begin(), out.train.end());
  } else {
    out.train = std::move(all);
  }
  return out;
}

RunRecord run_single(const ExperimentConfig& config, const PreparedProblem& prepared,
                     std::uint64_t seed) {
  const Problem& problem = *prepared.problem;
  const auto start = std::chrono::steady_clock::now();
  RunRecord record;
  record.config_hash = config_hash(config);
  record.seed = seed;

  Optimizer optimizer(config.optimizer, problem.initial_point());
  StreamOptions options;
  options.batch_size = config.batch_size;
  options.noise = config.noise;
  GradientStream stream(problem, options, RngStream(seed, 0), prepared.train);
  const std::uint64_t total =
      config.steps > 0 ? config.steps : config.epochs * stream.batches_per_epoch();
  const std::optional<ParamVector> x_star = problem.optimum();
  const bool synthetic = problem.sample_count() == 1;

  auto train_loss = [&](const ParamVector& x) {
    return synthetic ? problem.loss(x) : problem.mean_loss(x, prepared.train);
  };

  for (std::uint64_t step = 1; step <= total; ++step) {
    const StreamBatch batch = stream.next(optimizer.params());
    StepReport report;
    bool diverged = false;
    try {
      report = optimizer.step(batch.per_sample);
      diverged = report.diverged;
    } catch (const NonFiniteError&) {
      diverged = true;
    }
    record.steps_taken = step;
    if (diverged) {
      record.status = RunStatus::diverged;
      break;
    }

    const bool evaluate =
        !prepared.eval.empty() &&
        (config.eval_every > 0 ? step % config.eval_every == 0 : batch.ends_epoch);
    const bool tick = step % config.metric_cadence == 0 || step == total || evaluate;
    if (!tick) continue;

    const ParamVector& x = optimizer.params();
    MetricRow row;
    row.step = step;
    row.epoch = stream.epoch();
    row.train_loss = train_loss(x);
    if (evaluate) {
      row.eval_loss = problem.mean_loss(x, prepared.eval);
      row.eval_accuracy = problem.accuracy(x, prepared.eval);
    }
    row.lambda_mean = reduce(ReduceOp::mean, report.lambda);
    row.lambda_min = *std::min_element(report.lambda.begin(), report.lambda.end());
    row.lambda_max = reduce(ReduceOp::max, report.lambda);
    row.rho_mean = report.mean_rho;
    row.x_norm = std::sqrt(squared_norm(x));
    if (x_star) {
      double r = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) r += (x[j] - (*x_star)[j]) * (x[j] - (*x_star)[j]);
      row.r = r;
    }
    row.wall_time = config.record_wall_time ? elapsed_seconds(start) : 0.0;
    if (!std::isfinite(row.train_loss)) {
      record.rows.push_back(row);
      record.status = RunStatus::diverged;
      break;
    }

    // Converged when the loss moved by less than the tolerance (relative)
    // since the latest row at least `convergence_window` steps back.
    bool converged = false;
    if (config.stop_on_convergence) {
      for (auto it = record.rows.rbegin(); it != record.rows.rend(); ++it) {
        if (it->step + config.convergence_window <= step) {
          const double change = std::fabs(row.train_loss - it->train_loss);
          converged = change <= config.convergence_tolerance * std::fabs(it->train_loss);
          break;
        }
      }
    }
    record.rows.push_back(row);
    if (converged) {
      record.status = RunStatus::converged;
      break;
    }
  }
  return record;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("VR_OPTIM_THREADS")) {
    std::size_t value = 0;
    const std::string_view text(env);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc() && ptr == text.data() + text.size() && value > 0) return value;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, std::size_t threads) {
  const PreparedProblem prepared = prepare_problem(config);
  const std::size_t n = config.seeds.size();
  std::vector<RunRecord> records(n);
  const std::size_t workers = std::min(n, threads > 0 ? threads : default_thread_count());
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) records[i] = run_single(config, prepared, config.seeds[i]);
    return records;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          records[i] = run_single(config, prepared, config.seeds[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

namespace {

constexpr std::string_view kCsvHeader =
    "step,epoch,train_loss,eval_loss,eval_accuracy,lambda_mean,lambda_min,lambda_max,rho_mean,"
    "x_norm,r,wall_time";

std::string num(double v) { return fmt::format("{:.17g}", v); }
std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::optional<double> parse_optional(std::string_view cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError(fmt::format("run csv line {}: '{}' is not a number", line, cell), line);
  }
  return v;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string run_csv(const RunRecord& record) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const MetricRow& r : record.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.step, r.epoch, num(r.train_loss),
                       opt_num(r.eval_loss), opt_num(r.eval_accuracy), num(r.lambda_mean),
                       num(r.lambda_min), num(r.lambda_max), num(r.rho_mean), num(r.x_norm),
                       opt_num(r.r), num(r.wall_time));
  }
  return out;
}

std::vector<MetricRow> parse_run_csv(std::string_view text) {
  std::vector<MetricRow> rows;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? nl : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kCsvHeader) throw ParseError("run csv: unexpected header", 1);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t cs = 0;
    while (true) {
      const std::size_t comma = line.find(',', cs);
      cells.push_back(line.substr(cs, comma == std::string_view::npos ? comma : comma - cs));
      if (comma == std::string_view::npos) break;
      cs = comma + 1;
    }
    if (cells.size() != 12) {
      throw ParseError(fmt::format("run csv line {}: expected 12 cells", line_no), line_no);
    }
    auto required = [&](std::size_t i) {
      auto v = parse_optional(cells[i], line_no);
      if (!v) throw ParseError(fmt::format("run csv line {}: empty required cell", line_no), line_no);
      return *v;
    };
    MetricRow r;
    r.step = static_cast<std::uint64_t>(required(0));
    r.epoch = static_cast<std::uint64_t>(required(1));
    r.train_loss = required(2);
    r.eval_loss = parse_optional(cells[3], line_no);
    r.eval_accuracy = parse_optional(cells[4], line_no);
    r.lambda_mean = required(5);
    r.lambda_min = required(6);
    r.lambda_max = required(7);
    r.rho_mean = required(8);
    r.x_norm = required(9);
    r.r = parse_optional(cells[10], line_no);
    r.wall_time = required(11);
    rows.push_back(r);
  }
  return rows;
}

void write_run_outputs(const ExperimentConfig& config, std::span<const RunRecord> records,
                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.toml", to_toml(config));
  for (const RunRecord& rec : records) {
    const std::string stem = fmt::format("seed_{}", rec.seed);
    write_text(dir / (stem + ".csv"), run_csv(rec));
    const nlohmann::json manifest = {
        {"name", config.name},
        {"config_hash", rec.config_hash},
        {"seed", rec.seed},
        {"status", std::string(to_string(rec.status))},
        {"steps_taken", rec.steps_taken},
        {"rows", rec.rows.size()},
        {"metrics_csv", stem + ".csv"},
        {"sampling", kSamplingScheme},
        {"version", VRLR_VERSION},
        {"config", to_json(config)},
    };
    write_text(dir / (stem + ".json"), manifest.dump(2) + "\n");
  }
}

std::vector<RunRecord> read_run_outputs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ParseError("not a directory: " + dir.string(), 0);
  std::vector<RunRecord> records;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& path = entry.path();
    if (path.extension() != ".json" || path.stem().string().rfind("seed_", 0) != 0) continue;
    const nlohmann::json manifest = nlohmann::json::parse(read_text(path));
    RunRecord rec;
    rec.config_hash = manifest.at("config_hash").get<std::string>();
    rec.seed = manifest.at("seed").get<std::uint64_t>();
    rec.steps_taken = manifest.at("steps_taken").get<std::uint64_t>();
    const auto status = parse_run_status(manifest.at("status").get<std::string>());
    if (!status) throw ParseError("bad status in " + path.string(), 0);
    rec.status = *status;
    rec.rows = parse_run_csv(read_text(dir / manifest.at("metrics_csv").get<std::string>()));
    records.push_back(std::move(rec));
  }
  std::sort(records.begin(), records.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
  return records;
}

}  // namespace vrlr
