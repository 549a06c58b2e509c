#include "vrlr/config.hpp"

#include <algorithm>
#include <concepts>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "vrlr/stream.hpp"

namespace vrlr {

namespace {

template <typename Value, std::size_t N>
using NameTable = std::array<std::pair<Value, std::string_view>, N>;

constexpr NameTable<ProblemKind, 4> kProblemNames = {{
    {ProblemKind::quadratic, "quadratic"},
    {ProblemKind::linear_regression, "linear_regression"},
    {ProblemKind::logistic_regression, "logistic_regression"},
    {ProblemKind::mlp, "mlp"},
}};

constexpr NameTable<DatasetKind, 4> kDatasetNames = {{
    {DatasetKind::none, "none"},
    {DatasetKind::csv, "csv"},
    {DatasetKind::idx, "idx"},
    {DatasetKind::blobs, "blobs"},
}};

template <typename Table, typename Value>
std::string_view name_in(const Table& table, Value value) {
  for (const auto& [v, n] : table) {
    if (v == value) return n;
  }
  return "?";
}

template <typename Value, typename Table>
std::optional<Value> value_in(const Table& table, std::string_view name) {
  for (const auto& [v, n] : table) {
    if (n == name) return v;
  }
  return std::nullopt;
}

// Reads typed fields from one TOML table, remembering which keys were used so
// that the leftovers can be reported as unknown.
class TableReader {
 public:
  TableReader(const toml::table* table, std::string prefix, std::vector<std::string>& unknown)
      : table_(table), prefix_(std::move(prefix)), unknown_(unknown) {}

  std::string path(std::string_view key) const {
    return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
  }

  const toml::node* find(std::string_view key) {
    used_.insert(std::string(key));
    if (!table_) return nullptr;
    return table_->get(key);
  }

  const toml::table* subtable(std::string_view key) {
    const toml::node* node = find(key);
    if (!node) return nullptr;
    if (!node->is_table()) throw ConfigError(path(key), "expected a table");
    return node->as_table();
  }

  void read(std::string_view key, double& out) {
    if (const toml::node* node = find(key)) {
      if (auto v = node->value_exact<double>()) {
        out = *v;
      } else if (auto i = node->value_exact<std::int64_t>()) {
        out = static_cast<double>(*i);
      } else {
        throw ConfigError(path(key), "expected a number");
      }
    }
  }

  template <std::unsigned_integral U>
  void read(std::string_view key, U& out) {
    if (const toml::node* node = find(key)) {
      auto i = node->value_exact<std::int64_t>();
      if (!i) throw ConfigError(path(key), "expected an integer");
      if (*i < 0) throw ConfigError(path(key), "must be >= 0");
      out = static_cast<U>(*i);
    }
  }

  void read(std::string_view key, bool& out) {
    if (const toml::node* node = find(key)) {
      auto b = node->value_exact<bool>();
      if (!b) throw ConfigError(path(key), "expected true or false");
      out = *b;
    }
  }

  void read(std::string_view key, std::string& out) {
    if (const toml::node* node = find(key)) {
      auto s = node->value_exact<std::string>();
      if (!s) throw ConfigError(path(key), "expected a string");
      out = *s;
    }
  }

  template <std::unsigned_integral U>
  void read(std::string_view key, std::vector<U>& out) {
    const toml::node* node = find(key);
    if (!node) return;
    if (auto i = node->value_exact<std::int64_t>()) {
      if (*i < 0) throw ConfigError(path(key), "must be >= 0");
      out = {static_cast<U>(*i)};
      return;
    }
    const toml::array* arr = node->as_array();
    if (!arr) throw ConfigError(path(key), "expected an integer or an array of integers");
    out.clear();
    for (const auto& item : *arr) {
      auto i = item.value_exact<std::int64_t>();
      if (!i || *i < 0) throw ConfigError(path(key), "expected non-negative integers");
      out.push_back(static_cast<U>(*i));
    }
  }

  template <typename Enum, typename Parser>
  void read_enum(std::string_view key, Enum& out, Parser parse) {
    std::string text;
    if (!find(key)) return;
    read(key, text);
    auto v = parse(text);
    if (!v) throw ConfigError(path(key), "unrecognized value '" + text + "'");
    out = *v;
  }

  void finish() {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!used_.count(std::string(k.str()))) unknown_.push_back(path(k.str()));
    }
  }

 private:
  const toml::table* table_;
  std::string prefix_;
  std::vector<std::string>& unknown_;
  std::set<std::string> used_;
};

void read_dataset(TableReader& parent, DatasetSpec& d, std::vector<std::string>& unknown) {
  const toml::table* table = parent.subtable("dataset");
  if (!table) return;
  TableReader r(table, parent.path("dataset"), unknown);
  r.read_enum("kind", d.kind, parse_dataset_kind);
  r.read("path", d.path);
  r.read("label_column", d.label_column);
  r.read("images", d.images);
  r.read("labels", d.labels);
  r.read("limit", d.limit);
  r.read_enum("normalize", d.normalize, parse_idx_normalize);
  r.read("samples", d.samples);
  r.read("dim", d.dim);
  r.read("classes", d.classes);
  r.read("offset", d.offset);
  r.read("seed", d.seed);
  r.finish();
}

}  // namespace

std::string_view to_string(ProblemKind kind) { return name_in(kProblemNames, kind); }
std::optional<ProblemKind> parse_problem_kind(std::string_view name) {
  return value_in<ProblemKind>(kProblemNames, name);
}
std::string_view to_string(DatasetKind kind) { return name_in(kDatasetNames, kind); }
std::optional<DatasetKind> parse_dataset_kind(std::string_view name) {
  return value_in<DatasetKind>(kDatasetNames, name);
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ParseError(fmt::format("{}:{}:{}: {}", source, where.line, where.column,
                                 e.description()),
                     static_cast<std::size_t>(where.line));
  }

  ExperimentConfig c;
  std::vector<std::string> unknown;
  TableReader top(&root, "", unknown);
  top.read("name", c.name);
  top.read("seeds", c.seeds);
  top.read("steps", c.steps);
  top.read("epochs", c.epochs);
  top.read("batch_size", c.batch_size);
  top.read("metric_cadence", c.metric_cadence);
  top.read("output_dir", c.output_dir);
  top.read("record_wall_time", c.record_wall_time);
  top.read("stop_on_convergence", c.stop_on_convergence);
  top.read("convergence_window", c.convergence_window);
  top.read("convergence_tolerance", c.convergence_tolerance);
  top.read("eval_fraction", c.eval_fraction);
  top.read("eval_every", c.eval_every);

  const toml::table* problem = top.subtable("problem");
  if (!problem) throw ConfigError("problem", "missing [problem] table");
  {
    TableReader r(problem, "problem", unknown);
    if (!r.find("kind")) throw ConfigError("problem.kind", "missing");
    r.read_enum("kind", c.problem.kind, parse_problem_kind);
    r.read("dim", c.problem.dim);
    r.read("curvature", c.problem.curvature);
    r.read("initial_value", c.problem.initial_value);
    r.read("ridge", c.problem.ridge);
    r.read("hidden", c.problem.hidden);
    r.read_enum("activation", c.problem.activation, parse_activation);
    r.read("init_seed", c.problem.init_seed);
    read_dataset(r, c.problem.dataset, unknown);
    r.finish();
  }

  if (const toml::table* noise = top.subtable("noise")) {
    TableReader r(noise, "noise", unknown);
    r.read_enum("kind", c.noise.kind, parse_noise_kind);
    r.read("low", c.noise.low);
    r.read("high", c.noise.high);
    r.read("block", c.noise.block);
    r.read("burst", c.noise.burst);
    r.read("ramp_steps", c.noise.ramp_steps);
    r.read_enum("shape", c.noise.shape, parse_noise_shape);
    r.read_enum("scaling", c.noise.scaling, parse_noise_scaling);
    r.finish();
    if (c.noise.kind == NoiseKind::constant) c.noise.high = c.noise.low;
  }

  const toml::table* optimizer = top.subtable("optimizer");
  if (!optimizer) throw ConfigError("optimizer", "missing [optimizer] table");
  {
    TableReader r(optimizer, "optimizer", unknown);
    if (!r.find("kind")) throw ConfigError("optimizer.kind", "missing");
    OptimizerConfig& o = c.optimizer;
    r.read_enum("kind", o.kind, parse_optimizer_kind);
    r.read("learning_rate", o.learning_rate);
    r.read("impact", o.impact);
    r.read("beta1", o.beta1);
    r.read("beta2", o.beta2);
    r.read("adam_epsilon", o.adam_epsilon);
    r.read("bias_correction", o.bias_correction);
    r.read_enum("mode", o.vr_mode, parse_normalization_mode);
    r.read_enum("granularity", o.granularity, parse_granularity);
    r.read("guard", o.guard);
    r.finish();
  }
  top.finish();

  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("config", "unknown keys: " + list);
  }
  if (c.steps == 0 && c.epochs == 0) {
    c.steps = 1000;
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig c = parse_config(buffer.str(), path.string());
  c.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.name.empty()) throw ConfigError("name", "must not be empty");
  if (c.seeds.empty()) throw ConfigError("seeds", "must not be empty");
  {
    std::set<std::uint64_t> distinct(c.seeds.begin(), c.seeds.end());
    if (distinct.size() != c.seeds.size()) throw ConfigError("seeds", "must be distinct");
  }
  if (c.steps > 0 && c.epochs > 0) throw ConfigError("steps", "set either steps or epochs, not both");
  if (c.steps == 0 && c.epochs == 0) throw ConfigError("steps", "must be >= 1");
  if (c.batch_size == 0) throw ConfigError("batch_size", "must be >= 1");
  if (c.metric_cadence == 0) throw ConfigError("metric_cadence", "must be >= 1");
  if (c.convergence_window == 0) throw ConfigError("convergence_window", "must be >= 1");
  if (!(c.convergence_tolerance >= 0.0)) throw ConfigError("convergence_tolerance", "must be >= 0");
  if (!(c.eval_fraction >= 0.0 && c.eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction", "must lie in [0, 1)");
  }

  const ProblemSpec& p = c.problem;
  const DatasetSpec& d = p.dataset;
  if (p.kind == ProblemKind::quadratic) {
    if (p.dim == 0) throw ConfigError("problem.dim", "must be >= 1");
    if (!(p.curvature > 0.0)) throw ConfigError("problem.curvature", "must be > 0");
    if (d.kind != DatasetKind::none) throw ConfigError("problem.dataset", "quadratic takes no dataset");
    if (c.eval_fraction > 0.0) throw ConfigError("eval_fraction", "quadratic has no dataset to split");
  } else {
    if (d.kind == DatasetKind::none) throw ConfigError("problem.dataset.kind", "a dataset is required");
    if (d.kind == DatasetKind::csv && d.path.empty()) throw ConfigError("problem.dataset.path", "missing");
    if (d.kind == DatasetKind::idx && (d.images.empty() || d.labels.empty())) {
      throw ConfigError("problem.dataset.images", "idx needs both images and labels paths");
    }
    if (d.kind == DatasetKind::blobs) {
      if (d.samples == 0) throw ConfigError("problem.dataset.samples", "must be >= 1");
      if (d.dim == 0) throw ConfigError("problem.dataset.dim", "must be >= 1");
      if (d.classes < 2) throw ConfigError("problem.dataset.classes", "must be >= 2");
    }
  }
  if (!(p.ridge >= 0.0)) throw ConfigError("problem.ridge", "must be >= 0");
  if (p.kind == ProblemKind::mlp) {
    if (p.hidden.empty()) throw ConfigError("problem.hidden", "needs at least one hidden layer");
    for (std::size_t h : p.hidden) {
      if (h == 0) throw ConfigError("problem.hidden", "layer sizes must be positive");
    }
  }

  c.noise.validate();
  c.optimizer.validate();
  if (c.optimizer.kind == OptimizerKind::vr_adam && c.batch_size < 2) {
    throw ConfigError("batch_size", "vr_adam needs batch_size >= 2");
  }
}

std::string to_toml(const ExperimentConfig& c) {
  toml::table root;
  root.insert("name", c.name);
  toml::array seeds;
  for (auto s : c.seeds) seeds.push_back(static_cast<std::int64_t>(s));
  root.insert("seeds", seeds);
  if (c.steps > 0) root.insert("steps", static_cast<std::int64_t>(c.steps));
  if (c.epochs > 0) root.insert("epochs", static_cast<std::int64_t>(c.epochs));
  root.insert("batch_size", static_cast<std::int64_t>(c.batch_size));
  root.insert("metric_cadence", static_cast<std::int64_t>(c.metric_cadence));
  root.insert("output_dir", c.output_dir);
  root.insert("record_wall_time", c.record_wall_time);
  root.insert("stop_on_convergence", c.stop_on_convergence);
  root.insert("convergence_window", static_cast<std::int64_t>(c.convergence_window));
  root.insert("convergence_tolerance", c.convergence_tolerance);
  root.insert("eval_fraction", c.eval_fraction);
  root.insert("eval_every", static_cast<std::int64_t>(c.eval_every));

  const ProblemSpec& p = c.problem;
  toml::table problem;
  problem.insert("kind", std::string(to_string(p.kind)));
  problem.insert("dim", static_cast<std::int64_t>(p.dim));
  problem.insert("curvature", p.curvature);
  problem.insert("initial_value", p.initial_value);
  problem.insert("ridge", p.ridge);
  toml::array hidden;
  for (auto h : p.hidden) hidden.push_back(static_cast<std::int64_t>(h));
  problem.insert("hidden", hidden);
  problem.insert("activation", std::string(to_string(p.activation)));
  problem.insert("init_seed", static_cast<std::int64_t>(p.init_seed));
  if (p.dataset.kind != DatasetKind::none) {
    const DatasetSpec& d = p.dataset;
    toml::table dataset;
    dataset.insert("kind", std::string(to_string(d.kind)));
    dataset.insert("path", d.path);
    dataset.insert("label_column", d.label_column);
    dataset.insert("images", d.images);
    dataset.insert("labels", d.labels);
    dataset.insert("limit", static_cast<std::int64_t>(d.limit));
    dataset.insert("normalize", std::string(to_string(d.normalize)));
    dataset.insert("samples", static_cast<std::int64_t>(d.samples));
    dataset.insert("dim", static_cast<std::int64_t>(d.dim));
    dataset.insert("classes", static_cast<std::int64_t>(d.classes));
    dataset.insert("offset", d.offset);
    dataset.insert("seed", static_cast<std::int64_t>(d.seed));
    problem.insert("dataset", dataset);
  }
  root.insert("problem", problem);

  toml::table noise;
  noise.insert("kind", std::string(to_string(c.noise.kind)));
  noise.insert("low", c.noise.low);
  noise.insert("high", c.noise.high);
  noise.insert("block", static_cast<std::int64_t>(c.noise.block));
  noise.insert("burst", static_cast<std::int64_t>(c.noise.burst));
  noise.insert("ramp_steps", static_cast<std::int64_t>(c.noise.ramp_steps));
  noise.insert("shape", std::string(to_string(c.noise.shape)));
  noise.insert("scaling", std::string(to_string(c.noise.scaling)));
  root.insert("noise", noise);

  const OptimizerConfig& o = c.optimizer;
  toml::table opt;
  opt.insert("kind", std::string(to_string(o.kind)));
  opt.insert("learning_rate", o.learning_rate);
  opt.insert("impact", o.impact);
  opt.insert("beta1", o.beta1);
  opt.insert("beta2", o.beta2);
  opt.insert("adam_epsilon", o.adam_epsilon);
  opt.insert("bias_correction", o.bias_correction);
  opt.insert("mode", std::string(to_string(o.vr_mode)));
  opt.insert("granularity", std::string(to_string(o.granularity)));
  opt.insert("guard", o.guard);
  root.insert("optimizer", opt);

  std::ostringstream out;
  out << root << "\n";
  return out.str();
}

nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  const ProblemSpec& p = c.problem;
  const DatasetSpec& d = p.dataset;
  json problem = {
      {"kind", to_string(p.kind)},       {"dim", p.dim},
      {"curvature", p.curvature},        {"initial_value", p.initial_value},
      {"ridge", p.ridge},                {"hidden", p.hidden},
      {"activation", to_string(p.activation)}, {"init_seed", p.init_seed},
  };
  if (d.kind != DatasetKind::none) {
    problem["dataset"] = {
        {"kind", to_string(d.kind)},   {"path", d.path},       {"label_column", d.label_column},
        {"images", d.images},          {"labels", d.labels},   {"limit", d.limit},
        {"normalize", to_string(d.normalize)}, {"samples", d.samples}, {"dim", d.dim},
        {"classes", d.classes},        {"offset", d.offset},   {"seed", d.seed},
    };
  }
  const OptimizerConfig& o = c.optimizer;
  return json{
      {"name", c.name},
      {"seeds", c.seeds},
      {"steps", c.steps},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"metric_cadence", c.metric_cadence},
      {"stop_on_convergence", c.stop_on_convergence},
      {"convergence_window", c.convergence_window},
      {"convergence_tolerance", c.convergence_tolerance},
      {"eval_fraction", c.eval_fraction},
      {"eval_every", c.eval_every},
      {"sampling", kSamplingScheme},
      {"problem", problem},
      {"noise",
       {{"kind", to_string(c.noise.kind)},
        {"low", c.noise.low},
        {"high", c.noise.high},
        {"block", c.noise.block},
        {"burst", c.noise.burst},
        {"ramp_steps", c.noise.ramp_steps},
        {"shape", to_string(c.noise.shape)},
        {"scaling", to_string(c.noise.scaling)}}},
      {"optimizer",
       {{"kind", to_string(o.kind)},
        {"learning_rate", o.learning_rate},
        {"impact", o.impact},
        {"beta1", o.beta1},
        {"beta2", o.beta2},
        {"adam_epsilon", o.adam_epsilon},
        {"bias_correction", o.bias_correction},
        {"mode", to_string(o.vr_mode)},
        {"granularity", to_string(o.granularity)},
        {"guard", o.guard}}},
  };
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string canonical = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace vrlr
