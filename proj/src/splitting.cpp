#include "psplit/splitting.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <ostream>

namespace psplit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_constants(double beta, double zeta) {
  if (!(beta >= 0.0) || !(zeta >= 0.0)) throw std::invalid_argument("step size: β and ζ must be >= 0");
}

Vec project_in(const SubspaceProjector& proj, const Vec& v, const char* what) {
  Vec pv = proj(v);
  if ((pv - v).norm() > 1e-12 * (1.0 + v.norm())) spdlog::warn("{} is outside V; projected onto V", what);
  return pv;
}

Vec project_out(const SubspaceProjector& proj, const Vec& v, const char* what) {
  Vec qv = proj.complement(v);
  if ((qv - v).norm() > 1e-12 * (1.0 + v.norm())) spdlog::warn("{} is outside V⊥; projected onto V⊥", what);
  return qv;
}

void require_same_size(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) throw DimensionError(std::string(what) + ": initial points differ in dimension");
}

}  // namespace

std::string_view to_string(RunStatus s) {
  return s == RunStatus::converged ? "converged" : "budget-exhausted";
}

double relative_change(const Vec& prev, const Vec& next) {
  return (next - prev).norm() / std::max(next.norm(), 1e-12);
}

IterationLog::IterationLog(const SolverConfig& cfg) : cfg_(cfg), start_(std::chrono::steady_clock::now()) {
  if (cfg.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  records_.reserve(static_cast<std::size_t>(std::min(cfg.max_iters, 1 << 16)));
}

bool IterationLog::step(int n, const Vec& x_prev, const Vec& x_next, const Vec& y) {
  return record(n, relative_change(x_prev, x_next), x_next, y);
}

bool IterationLog::step(int n, const Vec& x_prev, const Vec& x_next, const Vec& u_prev, const Vec& u_next,
                        const Vec& y) {
  const double change = std::sqrt((x_next - x_prev).squaredNorm() + (u_next - u_prev).squaredNorm());
  const double size = std::sqrt(x_next.squaredNorm() + u_next.squaredNorm());
  return record(n, change / std::max(size, 1e-12), x_next, y);
}

bool IterationLog::record(int n, double residual, const Vec& x_next, const Vec& y) {
  IterRecord rec;
  rec.residual = residual;
  if (!std::isfinite(rec.residual) || !x_next.allFinite())
    throw DivergenceError("iterate became non-finite at iteration " + std::to_string(n));
  rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  if (cfg_.objective) rec.objective = cfg_.objective(x_next);
  records_.push_back(rec);
  if (cfg_.observer) cfg_.observer(n, x_next, y);
  return rec.residual <= cfg_.tol || n + 1 >= cfg_.max_iters;
}

SolverTrace IterationLog::finish(Vec x, Vec y, double gamma) {
  SolverTrace t;
  t.records = std::move(records_);
  t.x = std::move(x);
  t.y = std::move(y);
  t.gamma = gamma;
  t.status = (!t.records.empty() && t.records.back().residual <= cfg_.tol) ? RunStatus::converged
                                                                          : RunStatus::budget_exhausted;
  return t;
}

// -- step sizes ---------------------------------------------------------------

double step_size_frpib_max(double beta, double zeta) {
  require_constants(beta, zeta);
  if (beta == 0.0 && zeta == 0.0) return kInf;
  return 2.0 / (4.0 * beta + zeta);
}

double step_size_fsdr_max(double beta, double zeta) {
  require_constants(beta, zeta);
  if (beta == 0.0 && zeta == 0.0) return kInf;
  if (zeta == 0.0) return 1.0 / (3.0 * beta);
  const double lin = 2.0 * beta + zeta;
  const double cub = beta * beta * zeta;
  auto f = [&](double l) { return 2.0 / 3.0 - lin * l - cub * l * l * l; };
  double lo = 0.0;
  double hi = 2.0 / (3.0 * lin);
  while (hi - lo > 1e-15 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return hi;
}

double step_size_max(StepRule rule, double beta, double zeta) {
  return rule == StepRule::reflected ? step_size_frpib_max(beta, zeta) : step_size_fsdr_max(beta, zeta);
}

StepRule step_rule_for(std::string_view algorithm) {
  if (algorithm == "frpib" || algorithm == "fhrb" || algorithm == "mtpd" || algorithm == "fhrb-fused" ||
      algorithm == "frpib-multi" || algorithm == "consensus-frpib")
    return StepRule::reflected;
  if (algorithm == "fpisdr" || algorithm == "fsdr" || algorithm == "cmtpd" || algorithm == "fpisdr-multi" ||
      algorithm == "consensus-fpisdr")
    return StepRule::sdr;
  throw std::invalid_argument("unknown algorithm id '" + std::string(algorithm) + "'");
}

StepSizeCheck validate_step_size(StepRule rule, double beta, double zeta, double gamma) {
  StepSizeCheck c;
  c.supremum = step_size_max(rule, beta, zeta);
  if (std::isinf(c.supremum)) {
    c.accepted = gamma > 0.0 && std::isfinite(gamma);
    c.margin = c.accepted ? 1.0 : -1.0;
    return c;
  }
  c.margin = (c.supremum - gamma) / c.supremum;
  c.accepted = gamma > 0.0 && gamma < c.supremum;
  return c;
}

StepSizeCheck validate_step_size(std::string_view algorithm, double beta, double zeta, double gamma) {
  return validate_step_size(step_rule_for(algorithm), beta, zeta, gamma);
}

double resolve_step_size(StepRule rule, double beta, double zeta, const SolverConfig& cfg) {
  if (!(cfg.gamma > 0.0)) {
    const double sup = step_size_max(rule, beta, zeta);
    if (std::isinf(sup)) throw StepSizeError("every γ > 0 is admissible here; set one explicitly");
    return kStepSafety * sup;
  }
  const auto check = validate_step_size(rule, beta, zeta, cfg.gamma);
  if (!check.accepted) {
    if (!cfg.force)
      throw StepSizeError("step size " + std::to_string(cfg.gamma) + " is not below the admissible supremum " +
                          std::to_string(check.supremum));
    spdlog::warn("running with inadmissible step size {} (supremum {})", cfg.gamma, check.supremum);
  }
  return cfg.gamma;
}

// -- solvers ------------------------------------------------------------------

SolverTrace frpib_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev,
                        const Vec& y0) {
  require_same_size(x0, x_prev, "frpib_solve");
  require_same_size(x0, y0, "frpib_solve");
  const double g = resolve_step_size(StepRule::reflected, p.b.lipschitz, p.c.cocoercivity_inverse, cfg);
  IterationLog log(cfg);
  Vec x = project_in(p.v, x0, "x0");
  Vec y = project_out(p.v, y0, "y0");
  Vec w_prev = p.b(project_in(p.v, x_prev, "x_prev"));
  for (int n = 0;; ++n) {
    const Vec w = p.b(x);
    const Vec u = x + g * y - g * p.v(2.0 * w - w_prev + p.c(x));
    const Vec pn = p.a(g, u);
    Vec x_next = p.v(pn);
    y -= (pn - x_next) / g;
    w_prev = w;
    const bool stop = log.step(n, x, x_next, y);
    x = std::move(x_next);
    if (stop) break;
  }
  return log.finish(std::move(x), std::move(y), g);
}

SolverTrace frpib_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0) {
  return frpib_solve(p, cfg, x0, x0, Vec::Zero(x0.size()));
}

SolverTrace fpisdr_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev,
                         const Vec& y0) {
  require_same_size(x0, x_prev, "fpisdr_solve");
  require_same_size(x0, y0, "fpisdr_solve");
  const double g = resolve_step_size(StepRule::sdr, p.b.lipschitz, p.c.cocoercivity_inverse, cfg);
  IterationLog log(cfg);
  Vec x = project_in(p.v, x0, "x0");
  Vec y = project_out(p.v, y0, "y0");
  Vec w_prev = p.b(project_in(p.v, x_prev, "x_prev"));
  for (int n = 0;; ++n) {
    const Vec w = p.b(x);
    const Vec pn = p.a(g, x + g * y - g * p.v(w + p.c(x)));
    const Vec ppn = p.v(pn);
    Vec x_next = ppn - g * p.v(w - w_prev);
    y -= (pn - ppn) / g;
    w_prev = w;
    const bool stop = log.step(n, x, x_next, y);
    x = std::move(x_next);
    if (stop) break;
  }
  return log.finish(std::move(x), std::move(y), g);
}

SolverTrace fpisdr_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0) {
  return fpisdr_solve(p, cfg, x0, x0, Vec::Zero(x0.size()));
}

SolverTrace fhrb_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev) {
  require_same_size(x0, x_prev, "fhrb_solve");
  const double g = resolve_step_size(StepRule::reflected, p.b.lipschitz, p.c.cocoercivity_inverse, cfg);
  IterationLog log(cfg);
  Vec x = x0;
  Vec w_prev = p.b(x_prev);
  const Vec none = Vec::Zero(x0.size());
  for (int n = 0;; ++n) {
    const Vec w = p.b(x);
    Vec x_next = p.a(g, x - g * (2.0 * w - w_prev + p.c(x)));
    w_prev = w;
    const bool stop = log.step(n, x, x_next, none);
    x = std::move(x_next);
    if (stop) break;
  }
  return log.finish(std::move(x), none, g);
}

SolverTrace fsdr_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev) {
  require_same_size(x0, x_prev, "fsdr_solve");
  const double g = resolve_step_size(StepRule::sdr, p.b.lipschitz, p.c.cocoercivity_inverse, cfg);
  IterationLog log(cfg);
  Vec x = x0;
  Vec w_prev = p.b(x_prev);
  const Vec none = Vec::Zero(x0.size());
  for (int n = 0;; ++n) {
    const Vec w = p.b(x);
    Vec x_next = p.a(g, x - g * (w + p.c(x))) - g * (w - w_prev);
    w_prev = w;
    const bool stop = log.step(n, x, x_next, none);
    x = std::move(x_next);
    if (stop) break;
  }
  return log.finish(std::move(x), none, g);
}

// -- Condat–Vũ -----------------------------------------------------------------

CondatVuSteps condat_vu_default_steps(double norm_l, double rho) {
  if (!(norm_l >= 0.0) || !(rho >= 0.0)) throw std::invalid_argument("condat_vu: ‖L‖ and ρ must be >= 0");
  const double a = norm_l * norm_l;
  const double b = 0.5 * rho;
  if (a == 0.0 && b == 0.0) throw StepSizeError("condat_vu: L = 0 and ρ = 0; set τ, σ explicitly");
  const double t = a == 0.0 ? kStepSafety / b : (-b + std::sqrt(b * b + 4.0 * a * kStepSafety)) / (2.0 * a);
  return {t, t};
}

bool condat_vu_admissible(double tau, double sigma, double norm_l, double rho) {
  return tau > 0.0 && sigma > 0.0 && tau * (sigma * norm_l * norm_l + 0.5 * rho) < 1.0;
}

double operator_norm(const LinearMap& l, std::uint64_t seed) {
  if (auto b = l.norm_bound()) return *b;
  return operator_norm_estimate(l, 200, seed);
}

SolverTrace condat_vu_solve(const CompositeProblem& p, const SolverConfig& cfg, CondatVuSteps steps,
                            const Vec& x0, const Vec& u0) {
  if (x0.size() != p.l.cols() || u0.size() != p.l.rows()) throw DimensionError("condat_vu_solve: shape mismatch");
  const double norm_l = operator_norm(p.l, cfg.seed);
  const double rho = p.h_grad.lipschitz;
  if (!(steps.tau > 0.0) || !(steps.sigma > 0.0)) steps = condat_vu_default_steps(norm_l, rho);
  if (!condat_vu_admissible(steps.tau, steps.sigma, norm_l, rho)) {
    if (!cfg.force) throw StepSizeError("condat_vu: τ(σ‖L‖² + ρ/2) must be < 1");
    spdlog::warn("condat_vu: running with inadmissible (τ, σ) = ({}, {})", steps.tau, steps.sigma);
  }
  const double tau = steps.tau;
  const double sigma = steps.sigma;
  IterationLog log(cfg);
  Vec x = x0;
  Vec u = u0;
  for (int n = 0;; ++n) {
    Vec x_next = p.f(tau, x - tau * (p.h_grad(x) + p.l.apply_adjoint(u)));
    Vec u_next = prox_conjugate(p.g, sigma, u + sigma * p.l.apply(2.0 * x_next - x));
    const bool stop = log.step(n, x, x_next, u, u_next, u_next);
    u = std::move(u_next);
    x = std::move(x_next);
    if (stop) break;
  }
  auto trace = log.finish(std::move(x), Vec(), tau);
  trace.dual = std::move(u);
  return trace;
}

void write_trace_csv(std::ostream& out, const SolverTrace& trace, bool zero_timing) {
  out << "iter,residual,objective,elapsed_ms\n";
  char buf[128];
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    out << i << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.residual);
    out << buf << ',';
    if (r.objective) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.objective);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.6f", zero_timing ? 0.0 : r.elapsed_ms);
    out << ',' << buf << '\n';
  }
}

}  // namespace psplit
