#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace psplit::cli {

/// Fully resolved command configuration (per-command defaults already applied).
struct RunConfig {
  std::string command;
  // bench-random
  std::vector<std::int64_t> n{400};
  std::vector<std::int64_t> k{200};
  std::vector<double> kappa{0.1};
  int reps = 20;
  bool save_instances = false;
  // bench-ct
  int size = 32;
  int angles = 60;
  int detectors = 48;
  std::string geometry = "parallel";
  double sod = 800.0;
  double sid = 1200.0;
  double span = 180.0;
  double peak_counts = 1000.0;
  // shared
  std::vector<std::string> algos;
  double tol = 1e-6;
  int max_iters = 50000;
  double alpha1 = 5.0;
  double alpha2 = 0.5;
  double gamma = 0.0;
  bool force = false;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::vector<std::string> trace;
  bool no_timing = false;
  std::string out;
  // validate
  std::string suite;
  int iters = 0;
};

std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& text);

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace psplit::cli
