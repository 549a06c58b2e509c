#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "vrlr/audits.hpp"

namespace {

struct Criterion {
  int number;
  std::string title;
  std::vector<std::string> suites;
  double budget_seconds;  // 0 defers to each suite's own budget
};

bool report(int number, const std::string& title, const std::vector<vrlr::SuiteResult>& results,
            double budget_seconds) {
  bool passed = true;
  double seconds = 0.0;
  for (const vrlr::SuiteResult& r : results) {
    std::fputs(vrlr::format_suite(r).c_str(), stdout);
    passed = passed && r.passed();
    seconds += r.seconds;
  }
  if (budget_seconds > 0.0 && seconds > budget_seconds) passed = false;
  std::printf("criterion %d: %s %s (%.1f s)\n", number, passed ? "PASS" : "FAIL", title.c_str(), seconds);
  std::fflush(stdout);
  return passed;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "regularizer range, identity and monotonicity", {"regularizer"}, 0.0},
      {2, "optimal impact closed form", {"theorem3"}, 0.0},
      {3, "per-step descent inequality", {"lemma1"}, 0.0},
      {4, "nonconvex and convex rate bounds", {"theorem1", "theorem2"}, 300.0},
      {5, "Lyapunov drift and strong-convexity rate", {"lyapunov", "strong_convexity"}, 300.0},
      {6, "adaptive-moment variance recursions", {"vr_adam"}, 0.0},
      {7, "finite-difference gradients", {"gradcheck"}, 0.0},
      {8, "heteroskedastic convergence advantage", {"convergence"}, 0.0},
  };

  bool all = true;
  for (const Criterion& c : criteria) {
    std::vector<vrlr::SuiteResult> results;
    try {
      for (const std::string& s : c.suites) results.push_back(vrlr::run_suite(s));
      all = report(c.number, c.title, results, c.budget_seconds) && all;
    } catch (const std::exception& e) {
      std::printf("criterion %d: FAIL %s (error: %s)\n", c.number, c.title.c_str(), e.what());
      all = false;
    }
  }

  try {
    const vrlr::SuiteResult r =
        vrlr::determinism_suite(VRLR_FIXTURE_DIR "/golden_run.toml", VRLR_FIXTURE_DIR "/golden");
    all = report(9, "bit-identical reruns and golden outputs", {r}, 0.0) && all;
  } catch (const std::exception& e) {
    std::printf("criterion 9: FAIL bit-identical reruns and golden outputs (error: %s)\n", e.what());
    all = false;
  }
  return all ? 0 : 1;
}
