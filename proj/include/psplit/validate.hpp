#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace psplit {

struct ValidateOptions {
  /// Empty = every suite.
  std::string suite;
  /// Samples / iterations per check; 0 = the suite default.
  int iters = 0;
  std::uint64_t seed = 0;
};

struct CheckResult {
  std::string suite;
  std::string check;
  /// Worst observed violation.
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// moreau, partial-inverse, reduction, confinement, step-size, conservation,
/// lifted, operators
const std::vector<std::string>& validate_suites();

/// Runs the selected property suites with seeded sampling. Throws
/// std::invalid_argument for an unknown suite name.
std::vector<CheckResult> run_validation(const ValidateOptions& opts);

void print_check_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace psplit
