#pragma once

#include <functional>
#include <string>
#include <vector>

namespace polydepth {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0;
  double time_limit_s = 0;
  /// Deterministic text (CSV or JSON) the criterion produced; no timings.
  std::string artifact;
};

struct SelftestOptions {
  /// Criteria to run (1..8); empty runs all.
  std::vector<int> criteria;
  /// Grid threads for the training criterion (0: POLYDEPTH_THREADS or hardware).
  std::size_t threads = 0;
};

/// Runs the acceptance criteria in order. Criterion 8 repeats the selected
/// criteria among 1..7 (all of them when none is selected) and compares the
/// artifacts byte for byte.
std::vector<CriterionResult> run_selftest(const SelftestOptions& options,
                                          const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS  3  epsilon approximation  ...  (0.9 s)"
std::string format_result(const CriterionResult& r);

}  // namespace polydepth
