#include "cli.hpp"

#include "psplit/harness.hpp"
#include "psplit/validate.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace psplit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kRandomAlgos = {"mtpd", "cmtpd", "fhrb", "condat-vu"};
const std::vector<std::string> kCtAlgos = {"mtpd", "cmtpd", "fhrb"};

void setup_logging() {
  auto logger = spdlog::get("psplit");
  if (!logger) logger = spdlog::stderr_color_mt("psplit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("SPLITTING_LOG")) {
    const std::string name = env;
    const auto level = spdlog::level::from_str(name);
    if (level == spdlog::level::off && name != "off")
      spdlog::warn("SPLITTING_LOG='{}' is not a log level; using info", name);
    else
      spdlog::set_level(level);
  }
}

std::string iso_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                   std::chrono::system_clock::now())));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

template <class Fn>
void write_stream(const fs::path& path, Fn fn) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  fn(out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> canonical_list(const std::vector<std::string>& algos) {
  std::vector<std::string> out;
  for (const auto& a : algos) {
    try {
      out.push_back(canonical_algorithm(a));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return out;
}

bool wants_trace(const RunConfig& cfg, const std::string& algo) {
  for (const auto& t : cfg.trace)
    if (t == "all" || t == algo || (!t.empty() && canonical_algorithm(t) == algo)) return true;
  return false;
}

void check_trace_names(const RunConfig& cfg) {
  for (const auto& t : cfg.trace)
    if (t != "all") canonical_list({t});
}

std::vector<BenchCell> expand_cells(const RunConfig& cfg) {
  const auto& n = cfg.n;
  const auto& k = cfg.k;
  if (n.empty() || k.empty() || cfg.kappa.empty()) throw UsageError("--N, --K and --kappa need at least one value");
  if (n.size() != k.size() && n.size() != 1 && k.size() != 1)
    throw UsageError("--N and --K must have equal lengths or one of them a single value");
  const std::size_t pairs = std::max(n.size(), k.size());
  std::vector<BenchCell> cells;
  for (std::size_t i = 0; i < pairs; ++i)
    for (double kappa : cfg.kappa) {
      BenchCell c{n[n.size() == 1 ? 0 : i], k[k.size() == 1 ? 0 : i], kappa};
      if (c.n < 2 || c.k < 2) throw UsageError("--N and --K must be >= 2");
      if (!(kappa > 0.0)) throw UsageError("--kappa must be > 0");
      cells.push_back(c);
    }
  return cells;
}

void check_common(const RunConfig& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  if (!(cfg.tol > 0.0)) throw UsageError("--tol must be > 0");
  if (cfg.max_iters < 1) throw UsageError("--max-iters must be >= 1");
  if (cfg.jobs < 0) throw UsageError("--jobs must be >= 0");
  if (!(cfg.alpha1 > 0.0) || !(cfg.alpha2 >= 0.0)) throw UsageError("--alpha1 must be > 0 and --alpha2 >= 0");
  check_trace_names(cfg);
}

/// Rejects an explicit --gamma outside an algorithm's admissible region before any work starts.
void preflight_gamma(const RunConfig& cfg, const FusedLassoInstance& inst, const std::vector<std::string>& algos) {
  if (!(cfg.gamma > 0.0) || cfg.force) return;
  SolverConfig sc;
  sc.gamma = cfg.gamma;
  sc.max_iters = 1;
  for (const auto& a : algos) {
    try {
      solve_fused(inst, a, sc);
    } catch (const StepSizeError& e) {
      throw UsageError(fmt::format("--gamma {} rejected for {}: {} (use --force to run anyway)", cfg.gamma, a,
                                   e.what()));
    }
  }
}

struct Metadata {
  std::string started = iso_now();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  std::vector<std::string> argv;

  void write(const fs::path& dir) const {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json j{{"started", started}, {"finished", iso_now()}, {"wall_seconds", wall}, {"argv", argv}};
    write_text(dir / "metadata.json", j.dump(2) + "\n");
  }
};

std::string strip_header(const std::string& csv) { return csv.substr(csv.find('\n') + 1); }

int cmd_bench_random(const RunConfig& cfg, const Metadata& meta) {
  check_common(cfg);
  if (cfg.reps < 1) throw UsageError("--reps must be >= 1");
  const auto cells = expand_cells(cfg);
  const auto algos = canonical_list(cfg.algos);
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  write_text(dir / "config.json", config_to_json(cfg));

  if (!algos.empty())
    preflight_gamma(cfg,
                    gen_fused_lasso(cells[0].n, cells[0].k, cells[0].kappa, cell_seed(cfg.seed, 0, 0), cfg.alpha1,
                                    cfg.alpha2),
                    algos);

  BenchConfig bc;
  bc.cells = cells;
  bc.reps = cfg.reps;
  bc.algorithms = algos;
  bc.tol = cfg.tol;
  bc.max_iters = cfg.max_iters;
  bc.gamma = cfg.gamma;
  bc.force = cfg.force;
  bc.alpha1 = cfg.alpha1;
  bc.alpha2 = cfg.alpha2;
  bc.seed = cfg.seed;
  bc.jobs = cfg.jobs;
  bc.keep_traces = !cfg.trace.empty();

  // Rows land here as they finish so an interrupted run keeps what it has.
  const fs::path partial = dir / "runs.partial.csv";
  std::ofstream partial_out(partial);
  partial_out << "cell,rep,algo,N,K,kappa,seed,iterations,time_s,objective,rel_error,gamma,status,error\n"
              << std::flush;
  bc.on_run = [&](const BenchRun& r) {
    std::ostringstream row;
    write_runs_csv(row, {r}, cfg.no_timing);
    partial_out << strip_header(row.str()) << std::flush;
  };

  const auto runs = run_benchmark(bc);
  const auto rows = aggregate(runs);
  partial_out.close();

  write_stream(dir / "runs.csv", [&](std::ostream& o) { write_runs_csv(o, runs, cfg.no_timing); });
  write_stream(dir / "aggregate.csv", [&](std::ostream& o) { write_aggregate_csv(o, rows, cfg.no_timing); });
  write_text(dir / "aggregate.json", aggregate_json(rows, runs, cfg.no_timing));
  fs::remove(partial);

  if (!cfg.trace.empty()) {
    fs::create_directories(dir / "traces");
    for (const auto& r : runs)
      if (r.trace && wants_trace(cfg, r.report.algorithm))
        write_stream(dir / "traces" / fmt::format("{}-c{}-r{}.csv", r.report.algorithm, r.cell, r.rep),
                     [&](std::ostream& o) { write_trace_csv(o, *r.trace, cfg.no_timing); });
  }
  if (cfg.save_instances) {
    fs::create_directories(dir / "instances");
    for (std::size_t c = 0; c < cells.size(); ++c)
      for (int rep = 0; rep < cfg.reps; ++rep)
        save_instance(dir / "instances" / fmt::format("c{}-r{}", c, rep),
                      gen_fused_lasso(cells[c].n, cells[c].k, cells[c].kappa, cell_seed(cfg.seed, c, rep),
                                      cfg.alpha1, cfg.alpha2));
  }
  meta.write(dir);

  for (const auto& r : rows)
    spdlog::info("{} N={} K={} kappa={}: avg iters {:.1f}, avg time {:.3f} s, failures {}/{}", r.algo, r.n, r.k,
                 r.kappa, r.avg_iters, r.avg_time_s, r.failures, r.reps);
  return 0;
}

int cmd_bench_ct(const RunConfig& cfg, const Metadata& meta) {
  check_common(cfg);
  if (cfg.size < 2) throw UsageError("--size must be >= 2");
  if (cfg.angles < 1 || cfg.detectors < 1) throw UsageError("--angles and --detectors must be >= 1");
  if (cfg.geometry != "parallel" && cfg.geometry != "fan") throw UsageError("--geometry must be parallel or fan");
  const auto algos = canonical_list(cfg.algos);

  TomoOptions opts;
  opts.size = cfg.size;
  opts.geometry.beam = cfg.geometry == "fan" ? BeamGeometry::fan : BeamGeometry::parallel;
  opts.geometry.angles = cfg.angles;
  opts.geometry.detectors = cfg.detectors;
  opts.geometry.span_deg = cfg.span;
  opts.geometry.sod = cfg.sod;
  opts.geometry.sid = cfg.sid;
  opts.alpha1 = cfg.alpha1;
  opts.alpha2 = cfg.alpha2;
  opts.peak_counts = cfg.peak_counts;
  std::optional<TomoInstance> inst;
  try {
    inst = make_tomo_instance(opts, cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  write_text(dir / "config.json", config_to_json(cfg));
  preflight_gamma(cfg, inst->problem, algos);

  SolverConfig sc;
  sc.gamma = cfg.gamma;
  sc.force = cfg.force;
  sc.tol = cfg.tol;
  sc.max_iters = cfg.max_iters;
  sc.seed = cfg.seed;
  const auto runs = run_ct(*inst, algos, sc, !cfg.trace.empty(), cfg.jobs);

  write_stream(dir / "runs.csv", [&](std::ostream& o) { write_ct_csv(o, runs, cfg.no_timing); });
  write_text(dir / "report.json", ct_json(runs, *inst, cfg.no_timing));
  write_pgm16(dir / "truth.pgm", inst->truth, cfg.size, cfg.size);
  for (const auto& r : runs) {
    if (!r.failed) write_pgm16(dir / (r.report.algorithm + ".pgm"), r.image, cfg.size, cfg.size);
    if (r.trace && wants_trace(cfg, r.report.algorithm)) {
      fs::create_directories(dir / "traces");
      write_stream(dir / "traces" / (r.report.algorithm + ".csv"),
                   [&](std::ostream& o) { write_trace_csv(o, *r.trace, cfg.no_timing); });
    }
  }
  meta.write(dir);
  return 0;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  ValidateOptions vo;
  vo.suite = cfg.suite;
  vo.iters = cfg.iters;
  vo.seed = cfg.seed;
  if (cfg.iters < 0) throw UsageError("--iters must be >= 0");
  std::vector<CheckResult> results;
  try {
    results = run_validation(vo);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string(e.what()) + "; suites: " + fmt::format("{}", fmt::join(validate_suites(), ", ")));
  }
  print_check_table(out, results);
  if (!cfg.out.empty()) {
    json rows = json::array();
    for (const auto& r : results)
      rows.push_back({{"suite", r.suite},
                      {"check", r.check},
                      {"value", r.value},
                      {"tolerance", r.tolerance},
                      {"passed", r.passed}});
    fs::create_directories(cfg.out);
    write_text(fs::path(cfg.out) / "validate.json",
               json{{"schema_version", kSchemaVersion}, {"seed", cfg.seed}, {"checks", rows}}.dump(2) + "\n");
  }
  for (const auto& r : results)
    if (!r.passed) return 1;
  return 0;
}

}  // namespace

std::string config_to_json(const RunConfig& c) {
  json j{{"schema_version", kSchemaVersion},
         {"command", c.command},
         {"N", c.n},
         {"K", c.k},
         {"kappa", c.kappa},
         {"reps", c.reps},
         {"save_instances", c.save_instances},
         {"size", c.size},
         {"angles", c.angles},
         {"detectors", c.detectors},
         {"geometry", c.geometry},
         {"sod", c.sod},
         {"sid", c.sid},
         {"span", c.span},
         {"peak_counts", c.peak_counts},
         {"algos", c.algos},
         {"tol", c.tol},
         {"max_iters", c.max_iters},
         {"alpha1", c.alpha1},
         {"alpha2", c.alpha2},
         {"gamma", c.gamma},
         {"force", c.force},
         {"seed", c.seed},
         {"jobs", c.jobs},
         {"trace", c.trace},
         {"no_timing", c.no_timing},
         {"out", c.out},
         {"suite", c.suite},
         {"iters", c.iters}};
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("schema_version", 0) != kSchemaVersion) throw std::runtime_error("config: unsupported schema_version");
  RunConfig c;
  j.at("command").get_to(c.command);
  j.at("N").get_to(c.n);
  j.at("K").get_to(c.k);
  j.at("kappa").get_to(c.kappa);
  j.at("reps").get_to(c.reps);
  j.at("save_instances").get_to(c.save_instances);
  j.at("size").get_to(c.size);
  j.at("angles").get_to(c.angles);
  j.at("detectors").get_to(c.detectors);
  j.at("geometry").get_to(c.geometry);
  j.at("sod").get_to(c.sod);
  j.at("sid").get_to(c.sid);
  j.at("span").get_to(c.span);
  j.at("peak_counts").get_to(c.peak_counts);
  j.at("algos").get_to(c.algos);
  j.at("tol").get_to(c.tol);
  j.at("max_iters").get_to(c.max_iters);
  j.at("alpha1").get_to(c.alpha1);
  j.at("alpha2").get_to(c.alpha2);
  j.at("gamma").get_to(c.gamma);
  j.at("force").get_to(c.force);
  j.at("seed").get_to(c.seed);
  j.at("jobs").get_to(c.jobs);
  j.at("trace").get_to(c.trace);
  j.at("no_timing").get_to(c.no_timing);
  j.at("out").get_to(c.out);
  j.at("suite").get_to(c.suite);
  j.at("iters").get_to(c.iters);
  return c;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  setup_logging();
  Metadata meta;
  meta.argv.assign(argv, argv + argc);

  CLI::App app{"Partial-inverse operator splitting: fused-lasso and tomography benchmarks"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_shared = [&cfg](CLI::App* s) {
    s->add_option("--algos", cfg.algos, "Comma-separated algorithm ids")->delimiter(',');
    s->add_option("--tol", cfg.tol, "Relative-change tolerance");
    s->add_option("--max-iters", cfg.max_iters, "Iteration cap");
    s->add_option("--alpha1", cfg.alpha1, "Data-fidelity weight");
    s->add_option("--alpha2", cfg.alpha2, "Total-variation weight");
    s->add_option("--gamma", cfg.gamma, "Step size override (validated unless --force)");
    s->add_flag("--force", cfg.force, "Run even with an inadmissible --gamma");
    s->add_option("--seed", cfg.seed, "Master seed");
    s->add_option("--jobs", cfg.jobs, "Worker threads (0 = all cores)");
    s->add_option("--trace", cfg.trace, "Write per-iteration traces for these algorithms (or 'all')")
        ->delimiter(',');
    s->add_flag("--no-timing", cfg.no_timing, "Zero all timing columns (byte-reproducible outputs)");
    s->add_option("--out", cfg.out, "Output directory");
  };

  auto* random = app.add_subcommand("bench-random", "Random constrained fused-lasso benchmark");
  random->add_option("--N", cfg.n, "Signal lengths")->delimiter(',');
  random->add_option("--K", cfg.k, "Measurement counts")->delimiter(',');
  random->add_option("--kappa", cfg.kappa, "Matrix scales")->delimiter(',');
  random->add_option("--reps", cfg.reps, "Instances per cell");
  random->add_flag("--save-instances", cfg.save_instances, "Write every generated instance to <out>/instances");
  add_shared(random);

  auto* ct = app.add_subcommand("bench-ct", "Tomographic reconstruction benchmark");
  ct->add_option("--size", cfg.size, "Image side in pixels");
  ct->add_option("--angles", cfg.angles, "Projection angles");
  ct->add_option("--detectors", cfg.detectors, "Detector cells");
  ct->add_option("--geometry", cfg.geometry, "parallel or fan");
  ct->add_option("--sod", cfg.sod, "Source-object distance (fan)");
  ct->add_option("--sid", cfg.sid, "Source-image distance (fan)");
  ct->add_option("--span", cfg.span, "Angular span in degrees");
  ct->add_option("--peak-counts", cfg.peak_counts, "Expected counts at the sinogram maximum");
  add_shared(ct);

  auto* validate = app.add_subcommand("validate", "Run the property suites");
  validate->add_option("--suite", cfg.suite, "Run a single suite");
  validate->add_option("--iters", cfg.iters, "Samples or iterations per check (0 = suite default)");
  validate->add_option("--seed", cfg.seed, "Sampling seed");
  validate->add_option("--out", cfg.out, "Also write validate.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (random->parsed()) {
      cfg.command = "bench-random";
      if (random->count("--algos") == 0) cfg.algos = kRandomAlgos;
      return cmd_bench_random(cfg, meta);
    }
    if (ct->parsed()) {
      cfg.command = "bench-ct";
      if (ct->count("--algos") == 0) cfg.algos = kCtAlgos;
      if (ct->count("--tol") == 0) cfg.tol = 1e-8;
      if (ct->count("--max-iters") == 0) cfg.max_iters = 10000;
      if (ct->count("--alpha1") == 0) cfg.alpha1 = 1.0;
      if (ct->count("--alpha2") == 0) cfg.alpha2 = 0.01;
      return cmd_bench_ct(cfg, meta);
    }
    cfg.command = "validate";
    return cmd_validate(cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace psplit::cli
