#include "psplit/harness.hpp"
#include "psplit/validate.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <random>

using namespace psplit;

namespace {

struct Verdict {
  bool pass = true;
  void expect(bool ok, const std::string& what) {
    std::printf("  [%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Vec randn(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> d;
  Vec v(n);
  for (auto& e : v) e = d(rng);
  return v;
}

Mat randm(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> d;
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
  return m;
}

/// Runs validate suites and reports the worst check.
void validate_suites_into(Verdict& v, std::initializer_list<const char*> suites, std::uint64_t seed = 0) {
  for (const char* s : suites) {
    ValidateOptions opts;
    opts.suite = s;
    opts.seed = seed;
    const auto results = run_validation(opts);
    int failed = 0;
    for (const auto& r : results)
      if (!r.passed) {
        ++failed;
        std::printf("    %s / %s: %.3e > %.1e\n", r.suite.c_str(), r.check.c_str(), r.value, r.tolerance);
      }
    v.expect(failed == 0, fmt::format("suite {}: {} checks, {} failed", s, results.size(), failed));
  }
}

bool c1() {
  Verdict v;
  validate_suites_into(v, {"reduction"});
  return v.pass;
}

bool c2() {
  Verdict v;
  validate_suites_into(v, {"partial-inverse"});
  return v.pass;
}

bool c3() {
  Verdict v;
  const double frpib = step_size_frpib_max(2, 5);
  v.expect(frpib == 2.0 / 13.0, fmt::format("frpib supremum (2,5) = {:.6f}, 2/13 = {:.6f}", frpib, 2.0 / 13.0));
  v.expect(std::abs(frpib - 0.1538) < 5e-5, "frpib supremum ≈ 0.1538");
  const double root = step_size_fsdr_max(2, 5);
  v.expect(std::abs(root - 0.0732) <= 5e-4, fmt::format("fsdr root (2,5) = {:.6f}, target 0.0732 ± 0.0005", root));

  auto cubic = [](double beta, double zeta, double l) {
    return 2.0 / 3.0 - (2 * beta + zeta) * l - beta * beta * zeta * l * l * l;
  };
  int grid = 0, safe_ok = 0, big_beta = 0, big_beta_ok = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double beta = std::pow(10.0, -1.0 + 2.0 * i / 9.0);
      const double zeta = std::pow(10.0, -1.0 + 2.0 * j / 9.0);
      ++grid;
      if (cubic(beta, zeta, 2.0 / (9 * beta + 3 * zeta)) > 0.0) ++safe_ok;
      if (beta > zeta) {
        ++big_beta;
        const double val = cubic(beta, zeta, 0.999 * 2.0 / (5.0 * beta));
        worst = std::min(worst, val);
        if (val > 0.0) ++big_beta_ok;
      }
    }
  v.expect(safe_ok == grid, fmt::format("λ = 2/(9β+3ζ) satisfies the cubic on {}/{} grid points", safe_ok, grid));
  v.expect(big_beta_ok == big_beta,
           fmt::format("β > ζ: λ = 0.999·2/(5β) satisfies the cubic on {}/{} grid points (min value {:.4f})",
                       big_beta_ok, big_beta, worst));
  return v.pass;
}

bool c4() {
  Verdict v;
  SolverConfig cfg;
  cfg.tol = 1e-8;
  cfg.max_iters = 200000;
  double worst_obj = 0.0, worst_kkt = 0.0;
  bool all_converged = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = gen_fused_lasso(100, 50, 0.1, seed);
    const double scale = 1.0 + (inst.alpha1 * inst.m.apply_adjoint(inst.z)).norm();
    std::vector<double> objs;
    for (const auto& algo : fused_algorithms()) {
      const auto r = solve_fused(inst, algo, cfg);
      all_converged = all_converged && r.report.status == RunStatus::converged;
      objs.push_back(r.report.objective);
      worst_kkt = std::max(worst_kkt, kkt_residual(inst, r.x) / scale);
    }
    const double best = *std::min_element(objs.begin(), objs.end());
    for (double o : objs) worst_obj = std::max(worst_obj, (o - best) / std::max(std::abs(best), 1e-12));
  }
  v.expect(all_converged, "every solver converged on every instance");
  v.expect(worst_obj <= 1e-5, fmt::format("worst relative objective gap {:.3e} ≤ 1e-5", worst_obj));
  v.expect(worst_kkt <= 1e-4, fmt::format("worst scaled optimality residual {:.3e} ≤ 1e-4", worst_kkt));
  return v.pass;
}

bool c5() {
  Verdict v;
  BenchConfig bc;
  bc.cells = {{400, 200, 0.1}};
  bc.reps = 5;
  bc.algorithms = {"mtpd", "fhrb"};
  bc.tol = 1e-6;
  bc.max_iters = 200000;
  bc.jobs = 0;
  const auto rows = aggregate(run_benchmark(bc));
  const auto& m = rows[0];
  const auto& f = rows[1];
  std::printf("  mtpd avg %.1f iterations, fhrb avg %.1f iterations, ratio %.4f\n", m.avg_iters, f.avg_iters,
              m.avg_iters / f.avg_iters);
  v.expect(m.failures == 0 && f.failures == 0, "all runs converged");
  v.expect(m.avg_iters <= f.avg_iters / 5.0, "mtpd iterations ≤ fhrb iterations / 5");
  return v.pass;
}

bool c6() {
  Verdict v;
  validate_suites_into(v, {"conservation"});

  // consensus iterates against the weighted product-space method
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (int K : {2, 3, 5}) {
      std::mt19937_64 rng(seed * 31 + static_cast<std::uint64_t>(K));
      const Eigen::Index n = 4;
      ConsensusSpec cs;
      std::uniform_real_distribution<double> unif(0.1, 1.0);
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        const Mat g = randm(rng, n, n);
        cs.a.push_back(affine_resolvent(g * g.transpose() / n + 0.5 * (g - g.transpose()), randn(rng, n)));
        cs.weights.push_back(unif(rng));
        total += cs.weights.back();
      }
      for (auto& w : cs.weights) w /= total;
      const Mat gb = randm(rng, n, n), gc = randm(rng, n, n);
      const Mat sb = 0.5 * (gb - gb.transpose()), sc = gc * gc.transpose() / n;
      const Vec bb = randn(rng, n), bc = randn(rng, n);
      cs.b = affine_forward(sb, bb);
      cs.c = affine_forward(sc, bc);
      const auto w = cs.weights;
      const auto Ks = static_cast<Eigen::Index>(K);

      ResolventOp prod_a{[&cs, w, n](double g, const Vec& v) {
                           Vec out(v.size());
                           for (std::size_t k = 0; k < w.size(); ++k) {
                             const auto at = static_cast<Eigen::Index>(k) * n;
                             out.segment(at, n) = cs.a[k](g / w[k], v.segment(at, n));
                           }
                           return out;
                         },
                         "product"};
      Mat kb = Mat::Zero(n * Ks, n * Ks), kc = Mat::Zero(n * Ks, n * Ks);
      for (Eigen::Index k = 0; k < Ks; ++k) kb.block(k * n, k * n, n, n) = sb, kc.block(k * n, k * n, n, n) = sc;
      SubspaceProjector diag{[w, n](const Vec& v) {
                               Vec avg = Vec::Zero(n);
                               for (std::size_t k = 0; k < w.size(); ++k)
                                 avg += w[k] * v.segment(static_cast<Eigen::Index>(k) * n, n);
                               return Vec(avg.replicate(static_cast<Eigen::Index>(w.size()), 1));
                             },
                             "diagonal"};
      ProblemSpec product{prod_a, affine_forward(kb, bb.replicate(Ks, 1)), affine_forward(kc, bc.replicate(Ks, 1)),
                          diag};

      const Vec x0 = randn(rng, n);
      const double gamma = 0.9 * step_size_fsdr_max(cs.b.lipschitz, cs.c.cocoercivity_inverse);
      for (int flavor = 0; flavor < 2; ++flavor) {
        std::vector<Vec> a, b;
        SolverConfig ca;
        ca.gamma = gamma;
        ca.max_iters = 500;
        ca.tol = std::numeric_limits<double>::min();
        SolverConfig cb = ca;
        ca.observer = [&a](int, const Vec& x, const Vec&) { a.push_back(x); };
        cb.observer = [&b](int, const Vec& x, const Vec&) { b.push_back(x); };
        const Vec xs = x0.replicate(Ks, 1);
        if (flavor == 0) {
          consensus_frpib_solve(cs, ca, x0, x0);
          frpib_solve(product, cb, xs, xs, Vec::Zero(n * Ks));
        } else {
          consensus_fpisdr_solve(cs, ca, x0, x0);
          fpisdr_solve(product, cb, xs, xs, Vec::Zero(n * Ks));
        }
        // a run that lands exactly on a fixed point stops early and is held at its limit
        for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
          const Vec& ai = a[std::min(i, a.size() - 1)];
          const Vec& bi = b[std::min(i, b.size() - 1)];
          worst = std::max(worst, (ai - bi.head(n)).norm() / (1.0 + ai.norm()));
        }
      }
    }
  v.expect(worst <= 1e-12, fmt::format("consensus vs product space: worst per-iterate gap {:.3e} ≤ 1e-12", worst));
  return v.pass;
}

bool c7() {
  Verdict v;
  validate_suites_into(v, {"lifted"});
  return v.pass;
}

bool c8() {
  Verdict v;
  TomoOptions opts;
  const auto inst = make_tomo_instance(opts, 0);
  SolverConfig cfg;
  cfg.tol = 1e-8;
  cfg.max_iters = 10000;
  const auto runs = run_ct(inst, {"mtpd", "cmtpd", "fhrb"}, cfg, false, 0);
  for (const auto& r : runs)
    std::printf("  %-6s %6d iterations  %-16s PSNR %.2f dB\n", r.report.algorithm.c_str(), r.report.iterations,
                std::string(to_string(r.report.status)).c_str(), r.report.psnr.value_or(0.0));
  const double fhrb = runs[2].report.psnr.value_or(0.0);
  for (int a = 0; a < 2; ++a) {
    const auto& r = runs[static_cast<std::size_t>(a)];
    v.expect(!r.failed && r.report.status == RunStatus::converged,
             fmt::format("{} converges before the cap", r.report.algorithm));
    v.expect(r.report.psnr.value_or(0.0) >= fhrb + 3.0,
             fmt::format("{} PSNR {:.2f} ≥ fhrb PSNR {:.2f} + 3 dB", r.report.algorithm,
                         r.report.psnr.value_or(0.0), fhrb));
  }
  // context: fhrb stopped at the iteration count each partial-inverse method needed
  for (int a = 0; a < 2; ++a) {
    SolverConfig same = cfg;
    same.max_iters = std::max(1, runs[static_cast<std::size_t>(a)].report.iterations);
    const auto r = solve_fused(inst.problem, "fhrb", same);
    std::printf("  (info) fhrb at %d iterations: PSNR %.2f dB\n", same.max_iters, psnr(r.x, inst.truth));
  }
  return v.pass;
}

bool c9() {
  Verdict v;
  validate_suites_into(v, {"moreau", "operators"});
  return v.pass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int criterion = 0;
  app.add_option("--criterion", criterion, "Criterion to run (0 = all)")->check(CLI::Range(0, 9));
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::err);

  using Check = bool (*)();
  const Check checks[] = {c1, c2, c3, c4, c5, c6, c7, c8, c9};
  const double limits[] = {1, 5, 1, 60, 600, 30, 30, 300, 30};
  bool all = true;
  for (int c = 1; c <= 9; ++c) {
    if (criterion != 0 && criterion != c) continue;
    std::printf("criterion %d\n", c);
    const auto t0 = Clock::now();
    bool ok = checks[c - 1]();
    const double secs = seconds_since(t0);
    const bool in_time = secs < limits[c - 1];
    std::printf("  [%s] runtime %.2f s < %.0f s\n", in_time ? "ok" : "FAIL", secs, limits[c - 1]);
    ok = ok && in_time;
    std::printf("criterion %d: %s\n", c, ok ? "PASS" : "FAIL");
    all = all && ok;
  }
  return all ? 0 : 1;
}
