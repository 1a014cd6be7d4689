#include "psplit/fused_lasso.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <random>

namespace psplit {

void FusedLassoInstance::check() const {
  if (z.size() != m.rows()) throw DimensionError("FusedLassoInstance: z must have K entries");
  if (lo.size() != m.cols() || hi.size() != m.cols()) throw DimensionError("FusedLassoInstance: bounds need N entries");
  if (l.cols() != m.cols()) throw DimensionError("FusedLassoInstance: gradient must act on ℝᴺ");
  if ((lo.array() > hi.array()).any()) throw std::invalid_argument("FusedLassoInstance: lo > hi");
  if (!(alpha1 > 0.0) || !(alpha2 >= 0.0)) throw std::invalid_argument("FusedLassoInstance: α₁ > 0, α₂ ≥ 0 required");
}

FusedLassoInstance gen_fused_lasso(Eigen::Index n, Eigen::Index k, double kappa, std::uint64_t seed, double alpha1,
                                   double alpha2) {
  if (n < 2 || k < 2) throw DimensionError("gen_fused_lasso: N, K must be >= 2");
  if (!(kappa > 0.0)) throw std::invalid_argument("gen_fused_lasso: κ must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(k, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < k; ++i) m(i, j) = kappa * unif(rng);
  Vec lo(n), hi(n), z(k);
  for (auto& v : lo) v = -1.5 * unif(rng);
  for (auto& v : hi) v = 1.5 * unif(rng);
  for (auto& v : z) v = normal(rng);
  FusedLassoInstance inst{LinearMap::dense(std::move(m)), std::move(z), std::move(lo), std::move(hi), alpha1, alpha2,
                          discrete_gradient_1d(n)};
  inst.norm_m = operator_norm_estimate(inst.m, 200, seed);
  inst.kappa = kappa;
  inst.seed = seed;
  return inst;
}

double objective(const FusedLassoInstance& inst, const Vec& x) {
  return 0.5 * inst.alpha1 * (inst.m.apply(x) - inst.z).squaredNorm() + inst.alpha2 * inst.l.apply(x).lpNorm<1>();
}

CompositeProblem mtpd_problem(const FusedLassoInstance& inst, std::shared_ptr<const SpdSolveCache> cache) {
  const Eigen::Index n = inst.n();
  const Eigen::Index k = inst.k();
  const Vec lo = inst.lo;
  const Vec hi = inst.hi;
  const Vec z = inst.z;
  const double a1 = inst.alpha1;
  const LinearMap grad = inst.l;
  ResolventOp f{[n, lo, hi](double, const Vec& v) -> Vec {
                  Vec out = v;
                  out.head(n) = box_project(v.head(n), lo, hi);
                  return out;
                },
                "box(x)"};
  ForwardOp h{[n, k, z, a1](const Vec& v) -> Vec {
                Vec out = Vec::Zero(n + k);
                out.tail(k) = a1 * (v.tail(k) - z);
                return out;
              },
              a1, a1, "data(w)"};
  LinearMap lifted(
      grad.rows(), n + k, [grad, n](const Vec& v) -> Vec { return grad.apply(v.head(n)); },
      [grad, n, k](const Vec& u) -> Vec {
        Vec out = Vec::Zero(n + k);
        out.head(n) = grad.apply_adjoint(u);
        return out;
      });
  if (auto b = grad.norm_bound()) lifted = lifted.with_norm_bound(*b);
  return {std::move(f), l1_resolvent(inst.alpha2), std::move(h), std::move(lifted),
          graph_kernel_projector(std::move(cache))};
}

CompositeProblem direct_problem(const FusedLassoInstance& inst) {
  return {box_resolvent(inst.lo, inst.hi), l1_resolvent(inst.alpha2),
          least_squares_gradient(inst.m, inst.z, inst.alpha1, inst.norm_m), inst.l, whole_space_projector()};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double grad_norm(const FusedLassoInstance& inst) {
  return inst.l.norm_bound() ? *inst.l.norm_bound() : operator_norm_estimate(inst.l, 200, inst.seed);
}

// The caller's objective, when present, is evaluated on the box-projected x-block.
SolverConfig wrap_objective(const FusedLassoInstance& inst, const SolverConfig& cfg) {
  SolverConfig out = cfg;
  if (cfg.objective) {
    const Eigen::Index n = inst.n();
    out.objective = [&inst, n, obj = cfg.objective](const Vec& v) {
      return obj(box_project(v.head(n), inst.lo, inst.hi));
    };
  }
  return out;
}

FusedSolve finish(const FusedLassoInstance& inst, std::string algo, SolverTrace trace, Clock::time_point t0,
                  const SolverConfig& cfg) {
  FusedSolve out;
  out.x = box_project(trace.x.head(inst.n()), inst.lo, inst.hi);
  out.report.algorithm = std::move(algo);
  out.report.iterations = trace.iterations();
  out.report.elapsed_s = seconds_since(t0);
  out.report.objective = objective(inst, out.x);
  out.report.rel_error = trace.last_residual();
  out.report.gamma = trace.gamma;
  out.report.seed = cfg.seed;
  out.report.status = trace.status;
  out.trace = std::move(trace);
  return out;
}

SolverTrace mtpd_optimized(const FusedLassoInstance& inst, const SpdSolveCache& cache, const SolverConfig& cfg) {
  const Eigen::Index n = inst.n();
  const Eigen::Index k = inst.k();
  const LinearMap& m = inst.m;
  const LinearMap& grad = inst.l;
  const double a1 = inst.alpha1;
  const double a2 = inst.alpha2;
  const double g = resolve_step_size(StepRule::reflected, grad_norm(inst), a1, cfg);

  Vec X = Vec::Zero(n + k);
  Vec Y = Vec::Zero(n + k);
  Vec u = Vec::Zero(grad.rows());
  Vec w1_prev = grad.apply_adjoint(u);
  Vec w2_prev = -grad.apply(X.head(n));
  Vec P(n + k);
  Vec X_next(n + k);
  IterationLog log(cfg);
  for (int it = 0;; ++it) {
    const Vec w1 = grad.apply_adjoint(u);
    const Vec w2 = -grad.apply(X.head(n));
    // P_V of (2w¹ − w¹₋, α₁(ω − z))
    const Vec xt = cache.solve(2.0 * w1 - w1_prev + m.apply_adjoint(a1 * (X.tail(k) - inst.z)));
    P.head(n) = box_project(X.head(n) + g * Y.head(n) - g * xt, inst.lo, inst.hi);
    P.tail(k) = X.tail(k) + g * Y.tail(k) - g * m.apply(xt);
    const Vec u_prev = u;
    u = (u - g * (2.0 * w2 - w2_prev)).cwiseMax(-a2).cwiseMin(a2);
    X_next.head(n) = cache.solve(P.head(n) + m.apply_adjoint(P.tail(k)));
    X_next.tail(k) = m.apply(X_next.head(n));
    Y -= (P - X_next) / g;
    w1_prev = w1;
    w2_prev = w2;
    const bool stop = log.step(it, X, X_next, u_prev, u, Y);
    X.swap(X_next);
    if (stop) break;
  }
  auto t = log.finish(std::move(X), std::move(Y), g);
  t.dual = std::move(u);
  return t;
}

}  // namespace

FusedSolve mtpd_solve(const FusedLassoInstance& inst, const SolverConfig& cfg, MtpdPath path) {
  inst.check();
  const auto t0 = Clock::now();
  auto cache = std::make_shared<const SpdSolveCache>(inst.m);
  const SolverConfig c = wrap_objective(inst, cfg);
  SolverTrace trace;
  if (path == MtpdPath::optimized) {
    trace = mtpd_optimized(inst, *cache, c);
  } else {
    const auto prob = mtpd_problem(inst, cache);
    trace = composite_frpib(prob, c, Vec::Zero(inst.n() + inst.k()), Vec::Zero(inst.l.rows()));
  }
  return finish(inst, "mtpd", std::move(trace), t0, cfg);
}

FusedSolve cmtpd_solve(const FusedLassoInstance& inst, const SolverConfig& cfg) {
  inst.check();
  const auto t0 = Clock::now();
  auto cache = std::make_shared<const SpdSolveCache>(inst.m);
  const auto prob = mtpd_problem(inst, cache);
  auto trace = composite_fpisdr(prob, wrap_objective(inst, cfg), Vec::Zero(inst.n() + inst.k()),
                                Vec::Zero(inst.l.rows()));
  return finish(inst, "cmtpd", std::move(trace), t0, cfg);
}

FusedSolve fhrb_fused_solve(const FusedLassoInstance& inst, const SolverConfig& cfg) {
  inst.check();
  const auto t0 = Clock::now();
  auto trace = composite_frpib(direct_problem(inst), wrap_objective(inst, cfg), Vec::Zero(inst.n()),
                               Vec::Zero(inst.l.rows()));
  return finish(inst, "fhrb", std::move(trace), t0, cfg);
}

FusedSolve condat_vu_fused_solve(const FusedLassoInstance& inst, const SolverConfig& cfg) {
  inst.check();
  const auto t0 = Clock::now();
  CondatVuSteps steps;
  if (cfg.gamma > 0.0) steps = {cfg.gamma, cfg.gamma};
  auto trace = condat_vu_solve(direct_problem(inst), wrap_objective(inst, cfg), steps, Vec::Zero(inst.n()),
                               Vec::Zero(inst.l.rows()));
  return finish(inst, "condat-vu", std::move(trace), t0, cfg);
}

const std::vector<std::string>& fused_algorithms() {
  static const std::vector<std::string> ids{"mtpd", "cmtpd", "fhrb", "condat-vu"};
  return ids;
}

std::string canonical_algorithm(std::string_view algorithm) {
  if (algorithm == "fhrb-fused") return "fhrb";
  if (algorithm == "condat_vu" || algorithm == "cv") return "condat-vu";
  for (const auto& id : fused_algorithms())
    if (algorithm == id) return id;
  throw std::invalid_argument("unknown algorithm '" + std::string(algorithm) + "'");
}

FusedSolve solve_fused(const FusedLassoInstance& inst, std::string_view algorithm, const SolverConfig& cfg) {
  const auto id = canonical_algorithm(algorithm);
  if (id == "mtpd") return mtpd_solve(inst, cfg);
  if (id == "cmtpd") return cmtpd_solve(inst, cfg);
  if (id == "fhrb") return fhrb_fused_solve(inst, cfg);
  return condat_vu_fused_solve(inst, cfg);
}

double fused_default_step(const FusedLassoInstance& inst, std::string_view algorithm) {
  const auto id = canonical_algorithm(algorithm);
  const double nl = grad_norm(inst);
  if (id == "mtpd") return kStepSafety * step_size_frpib_max(nl, inst.alpha1);
  if (id == "cmtpd") return kStepSafety * step_size_fsdr_max(nl, inst.alpha1);
  if (id == "fhrb") return kStepSafety * step_size_frpib_max(nl, inst.alpha1 * inst.norm_m * inst.norm_m);
  return condat_vu_default_steps(nl, inst.alpha1 * inst.norm_m * inst.norm_m).tau;
}

double kkt_residual(const FusedLassoInstance& inst, const Vec& x, double zero_tol, double active_tol) {
  inst.check();
  if (x.size() != inst.n()) throw DimensionError("kkt_residual: dimension mismatch");
  if ((x.array() < inst.lo.array() - 1e-8).any() || (x.array() > inst.hi.array() + 1e-8).any())
    throw std::domain_error("kkt_residual: x violates the box constraints");
  const Vec grad = inst.alpha1 * inst.m.apply_adjoint(inst.m.apply(x) - inst.z);
  const Vec lx = inst.l.apply(x);
  const Eigen::Index m = lx.size();
  std::vector<bool> free(static_cast<std::size_t>(m));
  Vec s(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    free[static_cast<std::size_t>(i)] = std::abs(lx[i]) <= zero_tol;
    s[i] = free[static_cast<std::size_t>(i)] ? 0.0 : (lx[i] > 0.0 ? 1.0 : -1.0);
  }
  const Eigen::ArrayXd at_lo = (x.array() <= inst.lo.array() + active_tol).cast<double>();
  const Eigen::ArrayXd at_hi = (x.array() >= inst.hi.array() - active_tol).cast<double>();
  // residual left after the best normal-cone element
  auto excess = [&](const Vec& r) -> Vec {
    Vec e(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (at_lo[i] > 0 && at_hi[i] > 0)
        e[i] = 0.0;
      else if (at_lo[i] > 0)
        e[i] = std::min(r[i], 0.0);
      else if (at_hi[i] > 0)
        e[i] = std::max(r[i], 0.0);
      else
        e[i] = r[i];
    }
    return e;
  };
  auto project_s = [&](Vec& v) {
    for (Eigen::Index i = 0; i < m; ++i)
      v[i] = free[static_cast<std::size_t>(i)] ? std::clamp(v[i], -1.0, 1.0) : s[i];
  };
  const double a2 = inst.alpha2;
  const double nl = grad_norm(inst);
  const double lip = std::max(a2 * a2 * nl * nl, 1e-300);
  auto value = [&](const Vec& sv) {
    Vec e = excess(grad + a2 * inst.l.apply_adjoint(sv));
    return std::make_pair(e.squaredNorm(), std::move(e));
  };

  Vec cur = s;
  Vec mom = s;
  double t = 1.0;
  auto [best, e0] = value(cur);
  double prev_val = best;
  if (a2 == 0.0 || best == 0.0) return std::sqrt(best);
  for (int it = 0; it < 50000 && best > 1e-28; ++it) {
    auto [val_m, e_m] = value(mom);
    Vec next = mom - (a2 / lip) * inst.l.apply(e_m);
    project_s(next);
    const double val = value(next).first;
    best = std::min(best, val);
    if (val > prev_val) {
      // restart momentum
      t = 1.0;
      mom = cur;
      prev_val = value(cur).first;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    mom = next + ((t - 1.0) / t_next) * (next - cur);
    cur = std::move(next);
    t = t_next;
    prev_val = val;
  }
  return std::sqrt(best);
}

}  // namespace psplit
