#pragma once

#include "psplit/tomography.hpp"

#include <filesystem>
#include <iosfwd>

namespace psplit {

struct BenchCell {
  Eigen::Index n = 400;
  Eigen::Index k = 200;
  double kappa = 0.1;
};

struct BenchRun {
  std::size_t cell = 0;
  int rep = 0;
  BenchCell params;
  std::uint64_t instance_seed = 0;
  RunReport report;
  bool failed = false;
  std::string error;
  std::optional<SolverTrace> trace;
};

struct BenchConfig {
  std::vector<BenchCell> cells;
  int reps = 20;
  std::vector<std::string> algorithms;
  double tol = 1e-6;
  int max_iters = 50000;
  /// Non-positive = per-algorithm auto step size.
  double gamma = 0.0;
  bool force = false;
  double alpha1 = 5.0;
  double alpha2 = 0.5;
  std::uint64_t seed = 0;
  /// 0 = hardware concurrency.
  int jobs = 0;
  bool keep_traces = false;
  /// Called (serialized, in completion order) as each run finishes.
  std::function<void(const BenchRun&)> on_run;
};

/// splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t x);
/// Instance seed of (cell, rep) under a master seed.
std::uint64_t cell_seed(std::uint64_t master, std::size_t cell, int rep);

/// Runs every (cell, rep, algorithm); instances are shared across algorithms.
/// Output order is (cell, rep, algorithm) regardless of scheduling. Failures
/// are recorded, never thrown.
std::vector<BenchRun> run_benchmark(const BenchConfig& cfg);

struct AggregateRow {
  std::string algo;
  Eigen::Index n = 0;
  Eigen::Index k = 0;
  double kappa = 0.0;
  int reps = 0;
  double avg_iters = 0.0;
  double avg_time_s = 0.0;
  double avg_objective = 0.0;
  /// Runs that errored or hit the iteration cap.
  int failures = 0;
};
/// Averages over runs that completed without error.
std::vector<AggregateRow> aggregate(const std::vector<BenchRun>& runs);

struct CtRun {
  RunReport report;
  bool failed = false;
  std::string error;
  Vec image;
  std::optional<SolverTrace> trace;
};
std::vector<CtRun> run_ct(const TomoInstance& inst, const std::vector<std::string>& algorithms,
                          const SolverConfig& cfg, bool keep_traces = false, int jobs = 1);

// -- output -------------------------------------------------------------------

inline constexpr int kSchemaVersion = 1;

void write_runs_csv(std::ostream& out, const std::vector<BenchRun>& runs, bool zero_timing);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows, bool zero_timing);
/// {"schema_version", "aggregate": [...], "runs": [...]} as text.
std::string aggregate_json(const std::vector<AggregateRow>& rows, const std::vector<BenchRun>& runs,
                           bool zero_timing);
void write_ct_csv(std::ostream& out, const std::vector<CtRun>& runs, bool zero_timing);
std::string ct_json(const std::vector<CtRun>& runs, const TomoInstance& inst, bool zero_timing);

/// Binary 16-bit PGM (P5, maxval 65535); values are clamped to [lo, hi] and scaled.
void write_pgm16(const std::filesystem::path& path, const Vec& image, int h, int w, double lo = 0.0, double hi = 1.0);
/// Reads back a file written by write_pgm16 as raw 16-bit levels.
std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path, int& h, int& w);

/// `<base>.json` descriptor plus `<base>.bin` holding M column-major
/// (magic "PSMAT", uint32 version, uint64 rows, uint64 cols, little-endian doubles).
void save_instance(const std::filesystem::path& base, const FusedLassoInstance& inst);
FusedLassoInstance load_instance(const std::filesystem::path& json_path);

}  // namespace psplit
