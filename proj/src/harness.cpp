#include "psplit/harness.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace psplit {

using nlohmann::json;

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t cell_seed(std::uint64_t master, std::size_t cell, int rep) {
  return mix_seed(mix_seed(master) ^ mix_seed((static_cast<std::uint64_t>(cell) << 32) | static_cast<std::uint32_t>(rep)));
}

namespace {

int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn fn) {
  const int workers = std::min<int>(resolve_jobs(jobs), static_cast<int>(std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<BenchRun> run_benchmark(const BenchConfig& cfg) {
  if (cfg.reps < 1) throw std::invalid_argument("run_benchmark: reps must be >= 1");
  std::vector<std::string> algos;
  for (const auto& a : cfg.algorithms) algos.push_back(canonical_algorithm(a));
  const std::size_t A = algos.size();
  const std::size_t units = cfg.cells.size() * static_cast<std::size_t>(cfg.reps);
  std::vector<BenchRun> runs(units * A);
  if (A == 0) return {};
  std::mutex report_mutex;

  parallel_for(units, cfg.jobs, [&](std::size_t unit) {
    const std::size_t cell = unit / static_cast<std::size_t>(cfg.reps);
    const int rep = static_cast<int>(unit % static_cast<std::size_t>(cfg.reps));
    const BenchCell& p = cfg.cells[cell];
    const std::uint64_t seed = cell_seed(cfg.seed, cell, rep);
    std::optional<FusedLassoInstance> inst;
    std::string inst_error;
    try {
      inst = gen_fused_lasso(p.n, p.k, p.kappa, seed, cfg.alpha1, cfg.alpha2);
    } catch (const std::exception& e) {
      inst_error = e.what();
    }
    for (std::size_t a = 0; a < A; ++a) {
      BenchRun& r = runs[unit * A + a];
      r.cell = cell;
      r.rep = rep;
      r.params = p;
      r.instance_seed = seed;
      r.report.algorithm = algos[a];
      r.report.seed = seed;
      if (!inst) {
        r.failed = true;
        r.error = inst_error;
        std::lock_guard lock(report_mutex);
        if (cfg.on_run) cfg.on_run(r);
        continue;
      }
      SolverConfig sc;
      sc.gamma = cfg.gamma;
      sc.force = cfg.force;
      sc.tol = cfg.tol;
      sc.max_iters = cfg.max_iters;
      sc.seed = seed;
      if (cfg.keep_traces) sc.objective = [&inst](const Vec& x) { return objective(*inst, x); };
      try {
        auto res = solve_fused(*inst, algos[a], sc);
        r.report = res.report;
        if (cfg.keep_traces) r.trace = std::move(res.trace);
      } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
      }
      std::lock_guard lock(report_mutex);
      spdlog::info("cell {} rep {} {}: {} iterations, {:.3f} s{}", cell, rep, algos[a], r.report.iterations,
                   r.report.elapsed_s, r.failed ? " FAILED: " + r.error : "");
      if (cfg.on_run) cfg.on_run(r);
    }
  });
  return runs;
}

std::vector<AggregateRow> aggregate(const std::vector<BenchRun>& runs) {
  std::map<std::pair<std::size_t, std::string>, std::vector<const BenchRun*>> groups;
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& r : runs) {
    auto key = std::make_pair(r.cell, r.report.algorithm);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (const auto& key : order) {
    const auto& g = groups[key];
    AggregateRow row;
    row.algo = key.second;
    row.n = g.front()->params.n;
    row.k = g.front()->params.k;
    row.kappa = g.front()->params.kappa;
    row.reps = static_cast<int>(g.size());
    int ok = 0;
    for (const auto* r : g) {
      if (r->failed || r->report.status != RunStatus::converged) ++row.failures;
      if (r->failed) continue;
      ++ok;
      row.avg_iters += r->report.iterations;
      row.avg_time_s += r->report.elapsed_s;
      row.avg_objective += r->report.objective;
    }
    if (ok > 0) {
      row.avg_iters /= ok;
      row.avg_time_s /= ok;
      row.avg_objective /= ok;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<CtRun> run_ct(const TomoInstance& inst, const std::vector<std::string>& algorithms, const SolverConfig& cfg,
                          bool keep_traces, int jobs) {
  std::vector<std::string> algos;
  for (const auto& a : algorithms) algos.push_back(canonical_algorithm(a));
  std::vector<CtRun> runs(algos.size());
  parallel_for(algos.size(), jobs, [&](std::size_t a) {
    CtRun& r = runs[a];
    r.report.algorithm = algos[a];
    SolverConfig sc = cfg;
    if (keep_traces) sc.objective = [&inst](const Vec& x) { return objective(inst.problem, x); };
    try {
      auto res = solve_fused(inst.problem, algos[a], sc);
      r.report = res.report;
      r.report.psnr = psnr(res.x, inst.truth);
      r.image = std::move(res.x);
      if (keep_traces) r.trace = std::move(res.trace);
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
    spdlog::info("ct {}: {} iterations, {:.3f} s, PSNR {:.2f} dB{}", algos[a], r.report.iterations, r.report.elapsed_s,
                 r.report.psnr.value_or(0.0), r.failed ? " FAILED: " + r.error : "");
  });
  return runs;
}

// -- output -------------------------------------------------------------------

void write_runs_csv(std::ostream& out, const std::vector<BenchRun>& runs, bool zero_timing) {
  out << "cell,rep,algo,N,K,kappa,seed,iterations,time_s,objective,rel_error,gamma,status,error\n";
  for (const auto& r : runs) {
    out << r.cell << ',' << r.rep << ',' << r.report.algorithm << ',' << r.params.n << ',' << r.params.k << ','
        << fmt_double(r.params.kappa) << ',' << r.instance_seed << ',' << r.report.iterations << ','
        << fmt_double(zero_timing ? 0.0 : r.report.elapsed_s) << ',' << fmt_double(r.report.objective) << ','
        << fmt_double(r.report.rel_error) << ',' << fmt_double(r.report.gamma) << ','
        << (r.failed ? "error" : to_string(r.report.status)) << ',';
    std::string e = r.error;
    for (char& c : e)
      if (c == ',' || c == '\n') c = ';';
    out << e << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows, bool zero_timing) {
  out << "algo,N,K,kappa,reps,avg_iters,avg_time_s,avg_objective,failures\n";
  for (const auto& r : rows)
    out << r.algo << ',' << r.n << ',' << r.k << ',' << fmt_double(r.kappa) << ',' << r.reps << ','
        << fmt_double(r.avg_iters) << ',' << fmt_double(zero_timing ? 0.0 : r.avg_time_s) << ','
        << fmt_double(r.avg_objective) << ',' << r.failures << '\n';
}

namespace {

json report_json(const RunReport& r, bool zero_timing) {
  json j{{"algorithm", r.algorithm},
         {"iterations", r.iterations},
         {"elapsed_s", zero_timing ? 0.0 : r.elapsed_s},
         {"objective", r.objective},
         {"rel_error", r.rel_error},
         {"gamma", r.gamma},
         {"seed", r.seed},
         {"status", std::string(to_string(r.status))}};
  if (r.psnr) j["psnr"] = std::isfinite(*r.psnr) ? json(*r.psnr) : json("inf");
  return j;
}

}  // namespace

std::string aggregate_json(const std::vector<AggregateRow>& rows, const std::vector<BenchRun>& runs,
                           bool zero_timing) {
  json agg = json::array();
  for (const auto& r : rows)
    agg.push_back({{"algo", r.algo},
                   {"N", r.n},
                   {"K", r.k},
                   {"kappa", r.kappa},
                   {"reps", r.reps},
                   {"avg_iters", r.avg_iters},
                   {"avg_time_s", zero_timing ? 0.0 : r.avg_time_s},
                   {"avg_objective", r.avg_objective},
                   {"failures", r.failures}});
  json rs = json::array();
  for (const auto& r : runs) {
    json j = report_json(r.report, zero_timing);
    j["cell"] = r.cell;
    j["rep"] = r.rep;
    j["N"] = r.params.n;
    j["K"] = r.params.k;
    j["kappa"] = r.params.kappa;
    if (r.failed) j["error"] = r.error;
    rs.push_back(std::move(j));
  }
  return json{{"schema_version", kSchemaVersion}, {"aggregate", agg}, {"runs", rs}}.dump(2) + "\n";
}

void write_ct_csv(std::ostream& out, const std::vector<CtRun>& runs, bool zero_timing) {
  out << "algo,iterations,time_s,objective,rel_error,psnr,gamma,status,error\n";
  for (const auto& r : runs) {
    out << r.report.algorithm << ',' << r.report.iterations << ','
        << fmt_double(zero_timing ? 0.0 : r.report.elapsed_s) << ',' << fmt_double(r.report.objective) << ','
        << fmt_double(r.report.rel_error) << ',' << (r.report.psnr ? fmt_double(*r.report.psnr) : "") << ','
        << fmt_double(r.report.gamma) << ',' << (r.failed ? "error" : to_string(r.report.status)) << ',';
    std::string e = r.error;
    for (char& c : e)
      if (c == ',' || c == '\n') c = ';';
    out << e << '\n';
  }
}

std::string ct_json(const std::vector<CtRun>& runs, const TomoInstance& inst, bool zero_timing) {
  json rs = json::array();
  for (const auto& r : runs) {
    json j = report_json(r.report, zero_timing);
    if (r.failed) j["error"] = r.error;
    rs.push_back(std::move(j));
  }
  const auto& g = inst.geometry;
  json geo{{"beam", g.beam == BeamGeometry::fan ? "fan" : "parallel"},
           {"angles", g.angles},
           {"detectors", g.detectors},
           {"span_deg", g.span_deg},
           {"sod", g.sod},
           {"sid", g.sid}};
  return json{{"schema_version", kSchemaVersion},
              {"size", inst.size},
              {"geometry", geo},
              {"alpha1", inst.problem.alpha1},
              {"alpha2", inst.problem.alpha2},
              {"runs", rs}}
             .dump(2) +
         "\n";
}

void write_pgm16(const std::filesystem::path& path, const Vec& image, int h, int w, double lo, double hi) {
  if (image.size() != static_cast<Eigen::Index>(h) * w) throw DimensionError("write_pgm16: size mismatch");
  if (!(hi > lo)) throw std::invalid_argument("write_pgm16: hi must exceed lo");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm16: cannot open " + path.string());
  out << "P5\n" << w << ' ' << h << "\n65535\n";
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const double t = std::clamp((image[i] - lo) / (hi - lo), 0.0, 1.0);
    const auto v = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) throw std::runtime_error("write_pgm16: write failed for " + path.string());
}

std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path, int& h, int& w) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P5" || maxval != 65535) throw std::runtime_error("read_pgm16: not a 16-bit PGM");
  in.get();
  std::vector<std::uint16_t> px(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (auto& v : px) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    v = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  if (!in) throw std::runtime_error("read_pgm16: truncated file");
  return px;
}

// -- instance files -----------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'P', 'S', 'M', 'A', 'T'};
constexpr std::uint32_t kBlobVersion = 1;

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!in) throw std::runtime_error("instance blob truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_instance(const std::filesystem::path& base, const FusedLassoInstance& inst) {
  inst.check();
  auto blob_path = base;
  blob_path += ".bin";
  auto json_path = base;
  json_path += ".json";
  const Mat m = inst.m.materialize();
  {
    std::ofstream out(blob_path, std::ios::binary);
    if (!out) throw std::runtime_error("save_instance: cannot open " + blob_path.string());
    out.write(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, kBlobVersion);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) put_le<double>(out, m(i, j));
    if (!out) throw std::runtime_error("save_instance: write failed");
  }
  json j{{"format", "psplit-fused-lasso"},
         {"version", 1},
         {"N", inst.n()},
         {"K", inst.k()},
         {"kappa", inst.kappa},
         {"seed", inst.seed},
         {"alpha1", inst.alpha1},
         {"alpha2", inst.alpha2},
         {"norm_m", inst.norm_m},
         {"gradient", "1d"},
         {"matrix", blob_path.filename().string()},
         {"z", vec_json(inst.z)},
         {"lo", vec_json(inst.lo)},
         {"hi", vec_json(inst.hi)}};
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("save_instance: cannot open " + json_path.string());
  out << j.dump(2) << '\n';
}

FusedLassoInstance load_instance(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("load_instance: cannot open " + json_path.string());
  const json j = json::parse(in);
  if (j.value("format", "") != "psplit-fused-lasso") throw std::runtime_error("load_instance: unknown format");
  if (j.value("version", 0) != 1) throw std::runtime_error("load_instance: unsupported version");
  const auto blob_path = json_path.parent_path() / j.at("matrix").get<std::string>();
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw std::runtime_error("load_instance: cannot open " + blob_path.string());
  char magic[5];
  bin.read(magic, 5);
  if (!bin || std::memcmp(magic, kMagic, 5) != 0) throw std::runtime_error("load_instance: bad blob magic");
  if (get_le<std::uint32_t>(bin) != kBlobVersion) throw std::runtime_error("load_instance: unsupported blob version");
  const auto rows = static_cast<Eigen::Index>(get_le<std::uint64_t>(bin));
  const auto cols = static_cast<Eigen::Index>(get_le<std::uint64_t>(bin));
  if (rows != j.at("K").get<Eigen::Index>() || cols != j.at("N").get<Eigen::Index>())
    throw std::runtime_error("load_instance: blob shape disagrees with descriptor");
  Mat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = get_le<double>(bin);
  FusedLassoInstance inst{LinearMap::dense(std::move(m)),
                          json_vec(j.at("z")),
                          json_vec(j.at("lo")),
                          json_vec(j.at("hi")),
                          j.at("alpha1").get<double>(),
                          j.at("alpha2").get<double>(),
                          discrete_gradient_1d(cols)};
  inst.norm_m = j.at("norm_m").get<double>();
  inst.kappa = j.at("kappa").get<double>();
  inst.seed = j.at("seed").get<std::uint64_t>();
  inst.check();
  return inst;
}

}  // namespace psplit
