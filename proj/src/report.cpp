#include "vrlr/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

namespace vrlr {

std::string_view to_string(CompareMetric metric) {
  switch (metric) {
    case CompareMetric::train_loss: return "train_loss";
    case CompareMetric::eval_loss: return "eval_loss";
    case CompareMetric::eval_accuracy: return "eval_accuracy";
    case CompareMetric::r: return "r";
  }
  return "?";
}

std::optional<CompareMetric> parse_compare_metric(std::string_view name) {
  if (name == "train_loss") return CompareMetric::train_loss;
  if (name == "eval_loss") return CompareMetric::eval_loss;
  if (name == "eval_accuracy") return CompareMetric::eval_accuracy;
  if (name == "r") return CompareMetric::r;
  return std::nullopt;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw PreconditionError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::optional<double> metric_value(const MetricRow& row, CompareMetric metric) {
  switch (metric) {
    case CompareMetric::train_loss: return row.train_loss;
    case CompareMetric::eval_loss: return row.eval_loss;
    case CompareMetric::eval_accuracy: return row.eval_accuracy;
    case CompareMetric::r: return row.r;
  }
  return std::nullopt;
}

// step -> value for the rows that carry the metric.
std::map<std::uint64_t, double> series(const RunRecord& rec, CompareMetric metric) {
  std::map<std::uint64_t, double> out;
  for (const MetricRow& row : rec.rows) {
    if (auto v = metric_value(row, metric)) out[row.step] = *v;
  }
  if (out.empty()) {
    throw PreconditionError(fmt::format("compare_report: seed {} has no {} values", rec.seed,
                                        to_string(metric)));
  }
  return out;
}

double score_b(double a, double b, bool lower_is_better) {
  if (a == b) return 0.5;
  return (lower_is_better ? b < a : b > a) ? 1.0 : 0.0;
}

struct PairedStats {
  double median_a, median_b, median_difference, win_rate_b;
};

PairedStats paired(const std::vector<double>& a, const std::vector<double>& b, bool lower_is_better) {
  std::vector<double> diff(a.size());
  double wins = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff[i] = b[i] - a[i];
    wins += score_b(a[i], b[i], lower_is_better);
  }
  return {quantile(a, 0.5), quantile(b, 0.5), quantile(diff, 0.5),
          wins / static_cast<double>(a.size())};
}

}  // namespace

CompareSummary compare_report(std::span<const RunRecord> a, std::span<const RunRecord> b,
                              CompareMetric metric) {
  if (a.empty() || b.empty()) throw PreconditionError("compare_report: empty record set");
  std::map<std::uint64_t, const RunRecord*> by_seed_a, by_seed_b;
  for (const auto& r : a) by_seed_a[r.seed] = &r;
  for (const auto& r : b) by_seed_b[r.seed] = &r;
  std::set<std::uint64_t> seeds_a, seeds_b;
  for (const auto& [s, _] : by_seed_a) seeds_a.insert(s);
  for (const auto& [s, _] : by_seed_b) seeds_b.insert(s);
  if (seeds_a != seeds_b || by_seed_a.size() != a.size() || by_seed_b.size() != b.size()) {
    throw PreconditionError("compare_report: the two record sets do not have matching seeds");
  }

  const bool lower = metric != CompareMetric::eval_accuracy;
  std::vector<std::map<std::uint64_t, double>> sa, sb;
  for (std::uint64_t s : seeds_a) {
    sa.push_back(series(*by_seed_a[s], metric));
    sb.push_back(series(*by_seed_b[s], metric));
  }

  CompareSummary out;
  out.metric = metric;
  out.seeds = sa.size();

  // Steps present in every series.
  std::set<std::uint64_t> common;
  for (const auto& [step, _] : sa.front()) common.insert(step);
  auto intersect = [&common](const std::map<std::uint64_t, double>& s) {
    std::set<std::uint64_t> kept;
    for (std::uint64_t step : common) {
      if (s.count(step)) kept.insert(step);
    }
    common = std::move(kept);
  };
  for (const auto& s : sa) intersect(s);
  for (const auto& s : sb) intersect(s);

  const std::size_t n = sa.size();
  std::vector<double> va(n), vb(n);
  for (std::uint64_t step : common) {
    for (std::size_t i = 0; i < n; ++i) {
      va[i] = sa[i].at(step);
      vb[i] = sb[i].at(step);
    }
    const PairedStats p = paired(va, vb, lower);
    out.rows.push_back({step, p.median_a, quantile(va, 0.25), quantile(va, 0.75), p.median_b,
                        quantile(vb, 0.25), quantile(vb, 0.75), p.median_difference, p.win_rate_b});
  }

  for (std::size_t i = 0; i < n; ++i) {
    va[i] = sa[i].rbegin()->second;
    vb[i] = sb[i].rbegin()->second;
  }
  const PairedStats fin = paired(va, vb, lower);
  out.final_median_a = fin.median_a;
  out.final_median_b = fin.median_b;
  out.final_median_difference = fin.median_difference;
  out.final_win_rate_b = fin.win_rate_b;

  auto mean_of = [](const std::map<std::uint64_t, double>& s) {
    double acc = 0.0;
    for (const auto& [_, v] : s) acc += v;
    return acc / static_cast<double>(s.size());
  };
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = mean_of(sa[i]);
    vb[i] = mean_of(sb[i]);
  }
  const PairedStats avg = paired(va, vb, lower);
  out.average_median_a = avg.median_a;
  out.average_median_b = avg.median_b;
  out.average_median_difference = avg.median_difference;
  out.average_win_rate_b = avg.win_rate_b;
  return out;
}

std::string compare_csv(const CompareSummary& s) {
  std::string out =
      "step,median_a,q25_a,q75_a,median_b,q25_b,q75_b,median_difference,win_rate_b\n";
  for (const CompareRow& r : s.rows) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.step,
                       r.median_a, r.q25_a, r.q75_a, r.median_b, r.q25_b, r.q75_b,
                       r.median_difference, r.win_rate_b);
  }
  return out;
}

std::string compare_text(const CompareSummary& s) {
  return fmt::format(
      "metric {} over {} paired seeds\n"
      "  final:   median a {:.6g}  median b {:.6g}  median (b - a) {:.6g}  win-rate b {:.3f}\n"
      "  average: median a {:.6g}  median b {:.6g}  median (b - a) {:.6g}  win-rate b {:.3f}\n",
      to_string(s.metric), s.seeds, s.final_median_a, s.final_median_b, s.final_median_difference,
      s.final_win_rate_b, s.average_median_a, s.average_median_b, s.average_median_difference,
      s.average_win_rate_b);
}

}  // namespace vrlr
