#pragma once

// The invariant battery behind `smhd selftest`: one result per criterion.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace smhd {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  /// Human-readable measured values and thresholds.
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  std::uint64_t seed = 1;
  /// Main ensemble size; the doubling check runs a second batch of the same size.
  int paths = 200;
  int threads = 0;
  /// Criteria to run (empty: all of 1..9).
  std::vector<int> only;
};

/// Runs the battery; `on_result` is called as each criterion finishes.
std::vector<CriterionResult> run_selftest(
    const SelftestOptions& opts,
    const std::function<void(const CriterionResult&)>& on_result = {});

/// "[ 3] PASS energy identity: ...".
std::string format_result(const CriterionResult& r);
/// JSON array with one object per criterion.
std::string results_json(const std::vector<CriterionResult>& results);

}  // namespace smhd
