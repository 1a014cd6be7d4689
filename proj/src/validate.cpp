#include "psplit/validate.hpp"

#include "psplit/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <tuple>

namespace psplit {

namespace {

using Rng = std::mt19937_64;

std::uint64_t mix(std::uint64_t seed, int stream) {
  return mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(stream)));
}

Vec randn(Rng& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (auto& e : v) e = d(rng);
  return v;
}

Mat randm(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> d;
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
  return m;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Mat random_psd(Rng& rng, Eigen::Index n) {
  const Mat g = randm(rng, n, n);
  return g * g.transpose() / static_cast<double>(n);
}

Mat random_skew(Rng& rng, Eigen::Index n) {
  const Mat g = randm(rng, n, n);
  return 0.5 * (g - g.transpose());
}

ResolventOp random_resolvent(Rng& rng, Eigen::Index n, int kind) {
  switch (kind % 3) {
    case 0:
      return l1_resolvent(uniform(rng, 0.1, 1.0));
    case 1: {
      Vec lo = -Vec::Constant(n, 0.2) - randn(rng, n).cwiseAbs();
      Vec hi = Vec::Constant(n, 0.2) + randn(rng, n).cwiseAbs();
      return box_resolvent(std::move(lo), std::move(hi));
    }
    default:
      return affine_resolvent(random_psd(rng, n) + random_skew(rng, n), randn(rng, n));
  }
}

ProblemSpec random_problem(Rng& rng, Eigen::Index n, int kind) {
  ProblemSpec p;
  p.a = random_resolvent(rng, n, kind);
  p.b = affine_forward(random_skew(rng, n), randn(rng, n));
  p.c = affine_forward(random_psd(rng, n), randn(rng, n));
  return p;
}

SubspaceProjector random_subspace(Rng& rng, Eigen::Index n) {
  return span_projector(randm(rng, n, uniform_int(rng, 1, static_cast<int>(n) - 1)));
}

struct Collector {
  std::vector<CheckResult>& out;
  std::string suite;

  void add(std::string check, double value, double tol) {
    out.push_back({suite, std::move(check), value, tol, std::isfinite(value) && value <= tol});
  }
  /// Passes when `ok`; value is reported as-is.
  void add_flag(std::string check, double value, bool ok) {
    out.push_back({suite, std::move(check), value, 0.0, ok});
  }
};

int iters_or(const ValidateOptions& o, int fallback) { return o.iters > 0 ? o.iters : fallback; }

void suite_moreau(const ValidateOptions& o, Collector& c) {
  const int samples = iters_or(o, 100);
  const Eigen::Index dim = 10;
  for (const auto& pair : shipped_prox_pairs(dim))
    for (double g : {0.1, 1.0, 10.0})
      c.add(fmt::format("{} gamma={}", pair.name, g),
            moreau_identity_violation(pair.f, pair.conjugate, dim, g, samples, o.seed), 1e-10);
}

void suite_partial_inverse(const ValidateOptions& o, Collector& c) {
  const int samples = iters_or(o, 1000);
  const Eigen::Index n = 10;
  const char* names[] = {"l1", "box", "affine"};
  Rng rng(mix(o.seed, 1));
  for (int kind = 0; kind < 3; ++kind) {
    const ResolventOp a = random_resolvent(rng, n, kind);
    double identity = 0.0, whole = 0.0, origin = 0.0;
    for (int s = 0; s < samples; ++s) {
      const SubspaceProjector v = random_subspace(rng, n);
      const double g = std::exp(uniform(rng, std::log(0.1), std::log(10.0)));
      const Vec u = randn(rng, n, 3.0);
      const Vec r = partial_inverse_resolvent(a, v, g, u);
      // (x, y) with x + y = u lies in the graph of γA iff J_{γA}u = x
      const Vec x = v(r) + (u - r) - v(u - r);
      identity = std::max(identity, (a(g, u) - x).norm() / (1.0 + u.norm()));
      whole = std::max(whole, (partial_inverse_resolvent(a, whole_space_projector(), g, u) - a(g, u)).norm());
      const ResolventOp scaled{[&](double t, const Vec& w) { return a(t * g, w); }, "scaled"};
      origin = std::max(origin, (partial_inverse_resolvent(a, zero_subspace_projector(), g, u) -
                                 resolvent_of_inverse(scaled, 1.0, u))
                                    .norm() /
                                    (1.0 + u.norm()));
    }
    c.add(fmt::format("{} graph identity", names[kind]), identity, 1e-10);
    c.add(fmt::format("{} V=H gives J", names[kind]), whole, 1e-14);
    c.add(fmt::format("{} V={{0}} gives inverse resolvent", names[kind]), origin, 1e-10);
  }
}

double iterate_gap(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double gap = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) gap = std::max(gap, (a[k] - b[k]).norm() / (1.0 + b[k].norm()));
  return gap;
}

SolverConfig fixed_run(int iters, std::vector<Vec>& sink) {
  SolverConfig cfg;
  cfg.max_iters = iters;
  cfg.tol = std::numeric_limits<double>::min();
  cfg.observer = [&sink](int, const Vec& x, const Vec&) { sink.push_back(x); };
  return cfg;
}

void suite_reduction(const ValidateOptions& o, Collector& c) {
  const int iters = iters_or(o, 100);
  const Eigen::Index n = 8;
  double frpib = 0.0, fpisdr = 0.0;
  for (int k = 0; k < 10; ++k) {
    Rng rng(mix(o.seed, 100 + k));
    const ProblemSpec p = random_problem(rng, n, k);
    const Vec x0 = randn(rng, n, 2.0);
    const Vec xm = randn(rng, n, 2.0);
    const Vec y0 = Vec::Zero(n);
    std::vector<Vec> a, b;
    frpib_solve(p, fixed_run(iters, a), x0, xm, y0);
    fhrb_solve(p, fixed_run(iters, b), x0, xm);
    frpib = std::max(frpib, iterate_gap(a, b));
    a.clear();
    b.clear();
    fpisdr_solve(p, fixed_run(iters, a), x0, xm, y0);
    fsdr_solve(p, fixed_run(iters, b), x0, xm);
    fpisdr = std::max(fpisdr, iterate_gap(a, b));
  }
  c.add("frpib(V=H) = fhrb", frpib, 1e-14);
  c.add("fpisdr(V=H) = fsdr", fpisdr, 1e-14);
}

void suite_confinement(const ValidateOptions& o, Collector& c) {
  const int iters = iters_or(o, 200);
  const Eigen::Index n = 10;
  double worst_frpib = 0.0, worst_fpisdr = 0.0;
  for (int k = 0; k < 5; ++k) {
    Rng rng(mix(o.seed, 200 + k));
    ProblemSpec p = random_problem(rng, n, k);
    p.v = random_subspace(rng, n);
    const Vec x0 = p.v(randn(rng, n, 2.0));
    for (int algo = 0; algo < 2; ++algo) {
      double& worst = algo == 0 ? worst_frpib : worst_fpisdr;
      SolverConfig cfg;
      cfg.max_iters = iters;
      cfg.tol = std::numeric_limits<double>::min();
      cfg.observer = [&](int, const Vec& x, const Vec& y) {
        worst = std::max({worst, p.v.complement(x).norm(), p.v(y).norm()});
      };
      if (algo == 0)
        frpib_solve(p, cfg, x0);
      else
        fpisdr_solve(p, cfg, x0);
    }
  }
  c.add("frpib x in V, y in V-perp", worst_frpib, 1e-10);
  c.add("fpisdr x in V, y in V-perp", worst_fpisdr, 1e-10);
}

double sdr_cubic(double beta, double zeta, double g) {
  return 2.0 / 3.0 - (2.0 * beta + zeta) * g - beta * beta * zeta * g * g * g;
}

void suite_step_size(const ValidateOptions&, Collector& c) {
  c.add("frpib sup(2,5) = 2/13", std::abs(step_size_frpib_max(2.0, 5.0) - 2.0 / 13.0), 1e-15);
  c.add("fsdr root(2,5) near 0.0732", std::abs(step_size_fsdr_max(2.0, 5.0) - 0.0732), 5e-4);
  c.add("cubic vanishes at root(2,5)", std::abs(sdr_cubic(2.0, 5.0, step_size_fsdr_max(2.0, 5.0))), 1e-12);

  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(0.1 * std::pow(100.0, i / 9.0));
  double lower_bound = -std::numeric_limits<double>::infinity();
  double zeta_zero = 0.0;
  int region_errors = 0;
  for (double beta : grid) {
    zeta_zero = std::max(zeta_zero, std::abs(step_size_fsdr_max(beta, 0.0) * 3.0 * beta - 1.0));
    for (double zeta : grid) {
      lower_bound = std::max(lower_bound, -sdr_cubic(beta, zeta, 2.0 / (9.0 * beta + 3.0 * zeta)));
      for (auto rule : {StepRule::reflected, StepRule::sdr}) {
        const double sup = step_size_max(rule, beta, zeta);
        region_errors += !validate_step_size(rule, beta, zeta, kStepSafety * sup).accepted;
        region_errors += validate_step_size(rule, beta, zeta, sup).accepted;
        region_errors += validate_step_size(rule, beta, zeta, 1.001 * sup).accepted;
      }
    }
  }
  c.add_flag("cubic > 0 at 2/(9b+3z) on grid", -lower_bound, lower_bound < 0.0);
  c.add("fsdr root with zeta=0 is 1/(3b)", zeta_zero, 1e-14);
  c.add("region membership on grid", region_errors, 0.0);
}

void suite_conservation(const ValidateOptions& o, Collector& c) {
  const int iters = iters_or(o, 500);
  const Eigen::Index n = 6;
  for (int parts : {2, 3, 5}) {
    Rng rng(mix(o.seed, 300 + parts));
    ConsensusSpec spec;
    std::vector<double> w;
    for (int k = 0; k < parts; ++k) {
      spec.a.push_back(random_resolvent(rng, n, k));
      w.push_back(uniform(rng, 0.2, 1.0));
    }
    double total = 0.0;
    for (double x : w) total += x;
    for (double& x : w) x /= total;
    spec.weights = w;
    spec.b = affine_forward(random_skew(rng, n), randn(rng, n));
    spec.c = affine_forward(random_psd(rng, n), randn(rng, n));
    const Vec x0 = randn(rng, n, 2.0);
    for (int algo = 0; algo < 2; ++algo) {
      double worst = 0.0;
      SolverConfig cfg;
      cfg.max_iters = iters;
      cfg.tol = std::numeric_limits<double>::min();
      cfg.observer = [&](int, const Vec&, const Vec& y) {
        worst = std::max(worst, weighted_dual_sum(y, spec.resolved_weights()).norm());
      };
      if (algo == 0)
        consensus_frpib_solve(spec, cfg, x0, x0);
      else
        consensus_fpisdr_solve(spec, cfg, x0, x0);
      c.add(fmt::format("{} K={}", algo == 0 ? "consensus-frpib" : "consensus-fpisdr", parts), worst, 1e-10);
    }
  }
}

void suite_lifted(const ValidateOptions& o, Collector& c) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20; ++k) {
    Rng rng(mix(o.seed, 400 + k));
    MultiProblemSpec spec;
    const int I = uniform_int(rng, 1, 3);
    const int J = uniform_int(rng, 1, 3);
    for (int i = 0; i < I; ++i) {
      spec.primal_dims.push_back(uniform_int(rng, 2, 5));
      spec.a.push_back(zero_resolvent());
    }
    for (int j = 0; j < J; ++j) {
      spec.dual_dims.push_back(uniform_int(rng, 2, 5));
      spec.m.push_back(zero_resolvent());
    }
    const Eigen::Index rows = spec.dual_size(), cols = spec.primal_size();
    Mat stacked = Mat::Zero(rows, cols);
    spec.l.assign(static_cast<std::size_t>(I), std::vector<std::optional<LinearMap>>(static_cast<std::size_t>(J)));
    Eigen::Index c0 = 0;
    for (int i = 0; i < I; ++i) {
      Eigen::Index r0 = 0;
      for (int j = 0; j < J; ++j) {
        const auto ni = spec.primal_dims[static_cast<std::size_t>(i)];
        const auto nj = spec.dual_dims[static_cast<std::size_t>(j)];
        if (uniform(rng, 0.0, 1.0) < 0.7) {
          const Mat block = randm(rng, nj, ni);
          stacked.block(r0, c0, nj, ni) = block;
          spec.l[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = LinearMap::dense(block);
        }
        r0 += nj;
      }
      c0 += spec.primal_dims[static_cast<std::size_t>(i)];
    }
    const double bound = std::sqrt(lifted_constants(spec, o.seed).ell);
    const double norm = operator_norm_estimate(LinearMap::dense(stacked), 200, o.seed);
    worst = std::max(worst, norm - bound);
  }
  c.add("power-iteration norm - sqrt(ell)", worst, 1e-6);
}

void suite_operators(const ValidateOptions& o, Collector& c) {
  const int samples = iters_or(o, 100);
  Rng rng(mix(o.seed, 500));

  TomoGeometry fan;
  fan.beam = BeamGeometry::fan;
  fan.angles = 10;
  fan.detectors = 12;
  fan.sod = 20.0;
  fan.sid = 30.0;
  TomoGeometry par;
  par.angles = 10;
  par.detectors = 12;
  const LinearMap dense = LinearMap::dense(randm(rng, 7, 12));
  const std::vector<std::pair<std::string, LinearMap>> maps = {
      {"gradient-1d", discrete_gradient_1d(40)},
      {"gradient-2d", discrete_gradient_2d(7, 9)},
      {"radon-parallel", radon_projector(8, 8, par)},
      {"radon-fan", radon_projector(8, 8, fan)},
      {"dense", dense},
      {"composite", discrete_gradient_1d(7).compose(dense)},
  };
  for (const auto& [name, map] : maps) {
    c.add("adjoint " + name, adjoint_mismatch(map, samples, o.seed), 1e-8);
    const Mat m = map.materialize();
    const double oracle = Eigen::JacobiSVD<Mat>(m).singularValues()(0);
    c.add("norm estimate <= oracle " + name, operator_norm_estimate(map, 200, o.seed) - oracle, 1e-8);
    if (auto b = map.norm_bound()) c.add("norm bound >= oracle " + name, oracle - *b, 1e-12);
  }
  for (const auto& [name, map] : maps)
    if (name.rfind("radon", 0) == 0) {
      const Mat m = map.materialize();
      c.add_flag("weights nonnegative " + name, m.minCoeff(), m.minCoeff() >= 0.0);
    }

  const auto m_wide = std::make_shared<const SpdSolveCache>(LinearMap::dense(randm(rng, 6, 10)));
  const auto m_tall = std::make_shared<const SpdSolveCache>(LinearMap::dense(randm(rng, 10, 6)));
  const std::vector<std::tuple<std::string, SubspaceProjector, Eigen::Index>> projectors = {
      {"whole", whole_space_projector(), 10},
      {"zero", zero_subspace_projector(), 10},
      {"span", span_projector(randm(rng, 10, 4)), 10},
      {"kernel", kernel_projector(LinearMap::dense(randm(rng, 3, 10))), 10},
      {"kernel-rank-deficient", kernel_projector(LinearMap::dense(randm(rng, 4, 2) * randm(rng, 2, 10))), 10},
      {"graph-kernel-wide", graph_kernel_projector(m_wide), 16},
      {"graph-kernel-tall", graph_kernel_projector(m_tall), 16},
  };
  for (const auto& [name, proj, dim] : projectors) {
    const auto v = projector_violations(proj, dim, samples, o.seed);
    c.add("idempotent " + name, v.idempotence, 1e-10);
    c.add("self-adjoint " + name, v.self_adjointness, 1e-10);
    c.add("linear " + name, v.linearity, 1e-10);
  }
  for (const auto& cache : {m_wide, m_tall}) {
    double worst = 0.0;
    const auto& map = cache->source();
    for (int s = 0; s < 20; ++s) {
      const Vec v = randn(rng, map.cols());
      const Vec r = spd_solve(*cache, v);
      worst = std::max(worst, (r + map.apply_adjoint(map.apply(r)) - v).norm() / v.norm());
    }
    c.add(cache->uses_woodbury() ? "spd_solve residual (woodbury)" : "spd_solve residual (direct)", worst, 1e-10);
  }

  const Eigen::Index n = 10;
  std::vector<std::pair<std::string, ResolventOp>> resolvents;
  for (const char* key : {"zero", "l1:0.5", "nonneg", "interval:-1:2", "point:0.3", "scale:2", "shift:0.5",
                          "quadratic:1.5:-0.2"})
    resolvents.emplace_back(key, resolvent_from_descriptor(key, n));
  resolvents.emplace_back("box", random_resolvent(rng, n, 1));
  resolvents.emplace_back("affine", random_resolvent(rng, n, 2));
  const SubspaceProjector v = random_subspace(rng, n);
  const ResolventOp inner = random_resolvent(rng, n, 0);
  resolvents.emplace_back("partial-inverse(l1)",
                          ResolventOp{[=](double g, const Vec& u) { return partial_inverse_resolvent(inner, v, g, u); },
                                      "partial"});
  for (const auto& [name, res] : resolvents)
    for (double g : {0.1, 1.0, 10.0})
      c.add(fmt::format("firmly nonexpansive {} gamma={}", name, g),
            firm_nonexpansiveness_violation(res, n, g, samples, o.seed), 1e-10);
}

}  // namespace

const std::vector<std::string>& validate_suites() {
  static const std::vector<std::string> names = {"moreau",       "partial-inverse", "reduction", "confinement",
                                                 "step-size",    "conservation",    "lifted",    "operators"};
  return names;
}

std::vector<CheckResult> run_validation(const ValidateOptions& opts) {
  const auto& names = validate_suites();
  if (!opts.suite.empty() && std::find(names.begin(), names.end(), opts.suite) == names.end())
    throw std::invalid_argument("unknown suite '" + opts.suite + "'");
  std::vector<CheckResult> out;
  for (const auto& name : names) {
    if (!opts.suite.empty() && opts.suite != name) continue;
    Collector c{out, name};
    if (name == "moreau") suite_moreau(opts, c);
    if (name == "partial-inverse") suite_partial_inverse(opts, c);
    if (name == "reduction") suite_reduction(opts, c);
    if (name == "confinement") suite_confinement(opts, c);
    if (name == "step-size") suite_step_size(opts, c);
    if (name == "conservation") suite_conservation(opts, c);
    if (name == "lifted") suite_lifted(opts, c);
    if (name == "operators") suite_operators(opts, c);
  }
  return out;
}

void print_check_table(std::ostream& out, const std::vector<CheckResult>& results) {
  std::size_t w_suite = 5, w_check = 5;
  for (const auto& r : results) {
    w_suite = std::max(w_suite, r.suite.size());
    w_check = std::max(w_check, r.check.size());
  }
  out << fmt::format("{:<{}}  {:<{}}  {:>12}  {:>9}  {}\n", "suite", w_suite, "check", w_check, "value", "tol",
                     "result");
  int failed = 0;
  for (const auto& r : results) {
    out << fmt::format("{:<{}}  {:<{}}  {:>12.3e}  {:>9.1e}  {}\n", r.suite, w_suite, r.check, w_check, r.value,
                       r.tolerance, r.passed ? "pass" : "FAIL");
    failed += !r.passed;
  }
  out << fmt::format("{} checks, {} failed\n", results.size(), failed);
}

}  // namespace psplit
