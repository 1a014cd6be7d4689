#include "psplit/multivariate.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>

namespace psplit {

namespace {

std::vector<Eigen::Index> offsets_of(const std::vector<Eigen::Index>& dims) {
  std::vector<Eigen::Index> off(dims.size() + 1, 0);
  std::partial_sum(dims.begin(), dims.end(), off.begin() + 1);
  return off;
}

Vec stack(const std::vector<Vec>& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Vec out(total);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.segment(at, b.size()) = b;
    at += b.size();
  }
  return out;
}

std::vector<Vec> zeros_like(const std::vector<Eigen::Index>& dims) {
  std::vector<Vec> out;
  out.reserve(dims.size());
  for (auto d : dims) out.push_back(Vec::Zero(d));
  return out;
}

std::vector<Vec> blocks_or(const std::vector<Vec>& given, const std::vector<Vec>& fallback, const char* what) {
  if (given.empty()) return fallback;
  if (given.size() != fallback.size()) throw DimensionError(std::string(what) + ": wrong number of blocks");
  for (std::size_t k = 0; k < given.size(); ++k)
    if (given[k].size() != fallback[k].size()) throw DimensionError(std::string(what) + ": block size mismatch");
  return given;
}

bool has(const ForwardOp& op) { return static_cast<bool>(op.evaluate); }

// Evaluates the block operators shared by both multivariate solvers.
class MultiOps {
 public:
  explicit MultiOps(const MultiProblemSpec& s)
      : s_(s), poff_(offsets_of(s.primal_dims)), I_(s.primal_count()), J_(s.dual_count()) {}

  Vec proj(std::size_t i, const Vec& v) const { return s_.v.empty() ? v : s_.v[i](v); }
  Vec c(std::size_t i, const Vec& x) const {
    return s_.c.empty() || !has(s_.c[i]) ? Vec::Zero(x.size()) : s_.c[i](x);
  }
  Vec d_inv(std::size_t j, const Vec& u) const {
    return s_.d_inv.empty() || !has(s_.d_inv[j]) ? Vec::Zero(u.size()) : s_.d_inv[j](u);
  }

  /// w^{1,i} = B_i x + Σ_j L*_{ij} u_j
  std::vector<Vec> primal_w(const std::vector<Vec>& x, const std::vector<Vec>& u) const {
    std::vector<Vec> w(I_);
    Vec bx;
    if (has(s_.b)) bx = s_.b(stack(x));
    for (std::size_t i = 0; i < I_; ++i) {
      w[i] = has(s_.b) ? Vec(bx.segment(poff_[i], s_.primal_dims[i])) : Vec::Zero(s_.primal_dims[i]);
      for (std::size_t j = 0; j < J_; ++j)
        if (s_.l[i][j]) w[i] += s_.l[i][j]->apply_adjoint(u[j]);
    }
    return w;
  }

  /// w^{2,j} = N_j^{-1} u_j − Σ_i L_{ij} x_i
  std::vector<Vec> dual_w(const std::vector<Vec>& x, const std::vector<Vec>& u) const {
    std::vector<Vec> w(J_);
    for (std::size_t j = 0; j < J_; ++j) {
      w[j] = s_.n_inv.empty() || !has(s_.n_inv[j]) ? Vec::Zero(s_.dual_dims[j]) : s_.n_inv[j](u[j]);
      for (std::size_t i = 0; i < I_; ++i)
        if (s_.l[i][j]) w[j] -= s_.l[i][j]->apply(x[i]);
    }
    return w;
  }

 private:
  const MultiProblemSpec& s_;
  std::vector<Eigen::Index> poff_;
  std::size_t I_, J_;
};

enum class Flavor { reflected, sdr };

MultiResult multi_solve(const MultiProblemSpec& spec, const SolverConfig& cfg, const MultiStart& start,
                        Flavor flavor) {
  spec.check();
  const auto k = lifted_constants(spec, cfg.seed);
  const double g =
      resolve_step_size(flavor == Flavor::reflected ? StepRule::reflected : StepRule::sdr, k.beta, k.zeta, cfg);
  const std::size_t I = spec.primal_count();
  const std::size_t J = spec.dual_count();
  MultiOps ops(spec);

  const auto pz = zeros_like(spec.primal_dims);
  const auto dz = zeros_like(spec.dual_dims);
  std::vector<Vec> x = blocks_or(start.x, pz, "MultiStart.x");
  std::vector<Vec> xp = blocks_or(start.x_prev, x, "MultiStart.x_prev");
  std::vector<Vec> y = blocks_or(start.y, pz, "MultiStart.y");
  std::vector<Vec> u = blocks_or(start.u, dz, "MultiStart.u");
  std::vector<Vec> up = blocks_or(start.u_prev, u, "MultiStart.u_prev");
  bool moved = false;
  for (std::size_t i = 0; i < I; ++i) {
    const Vec px = ops.proj(i, x[i]);
    const Vec pxp = ops.proj(i, xp[i]);
    const Vec qy = y[i] - ops.proj(i, y[i]);
    moved |= (px - x[i]).norm() + (pxp - xp[i]).norm() + (qy - y[i]).norm() > 1e-12;
    x[i] = px;
    xp[i] = pxp;
    y[i] = qy;
  }
  if (moved) spdlog::warn("multivariate: initial points projected onto V_i / V_i⊥");

  std::vector<Vec> w1_prev = ops.primal_w(xp, up);
  std::vector<Vec> w2_prev = ops.dual_w(xp, up);
  const Vec dual_zero = Vec::Zero(stack(dz).size());

  IterationLog log(cfg);
  Vec z = stack({stack(x), stack(u)});
  for (int n = 0;; ++n) {
    const auto w1 = ops.primal_w(x, u);
    const auto w2 = ops.dual_w(x, u);
    std::vector<Vec> xn(I), un(J);
    for (std::size_t i = 0; i < I; ++i) {
      if (flavor == Flavor::reflected) {
        const Vec p = spec.a[i](g, x[i] + g * y[i] - g * ops.proj(i, 2.0 * w1[i] - w1_prev[i] + ops.c(i, x[i])));
        xn[i] = ops.proj(i, p);
        y[i] -= (p - xn[i]) / g;
      } else {
        const Vec p = spec.a[i](g, x[i] + g * y[i] - g * ops.proj(i, w1[i] + ops.c(i, x[i])));
        const Vec pp = ops.proj(i, p);
        xn[i] = pp - g * ops.proj(i, w1[i] - w1_prev[i]);
        y[i] -= (p - pp) / g;
      }
    }
    for (std::size_t j = 0; j < J; ++j) {
      if (flavor == Flavor::reflected) {
        un[j] = resolvent_of_inverse(spec.m[j], g, u[j] - g * (2.0 * w2[j] - w2_prev[j] + ops.d_inv(j, u[j])));
      } else {
        un[j] = resolvent_of_inverse(spec.m[j], g, u[j] - g * (w2[j] + ops.d_inv(j, u[j]))) -
                g * (w2[j] - w2_prev[j]);
      }
    }
    x = std::move(xn);
    u = std::move(un);
    w1_prev = w1;
    w2_prev = w2;
    Vec z_next = stack({stack(x), stack(u)});
    const bool stop = log.step(n, z, z_next, stack({stack(y), dual_zero}));
    z = std::move(z_next);
    if (stop) break;
  }
  MultiResult r;
  r.trace = log.finish(z, stack({stack(y), dual_zero}), g);
  r.primal = std::move(x);
  r.dual = std::move(u);
  r.y = std::move(y);
  return r;
}

}  // namespace

Eigen::Index MultiProblemSpec::primal_size() const {
  return std::accumulate(primal_dims.begin(), primal_dims.end(), Eigen::Index{0});
}

Eigen::Index MultiProblemSpec::dual_size() const {
  return std::accumulate(dual_dims.begin(), dual_dims.end(), Eigen::Index{0});
}

void MultiProblemSpec::check() const {
  const std::size_t I = primal_count();
  const std::size_t J = dual_count();
  if (I == 0) throw DimensionError("MultiProblemSpec: at least one primal block required");
  if (a.size() != I) throw DimensionError("MultiProblemSpec: need one A_i per primal block");
  if (!c.empty() && c.size() != I) throw DimensionError("MultiProblemSpec: need one C_i per primal block");
  if (!v.empty() && v.size() != I) throw DimensionError("MultiProblemSpec: need one V_i per primal block");
  if (m.size() != J) throw DimensionError("MultiProblemSpec: need one M_j per dual block");
  if (!n_inv.empty() && n_inv.size() != J) throw DimensionError("MultiProblemSpec: need one N_j^{-1} per dual block");
  if (!d_inv.empty() && d_inv.size() != J) throw DimensionError("MultiProblemSpec: need one D_j^{-1} per dual block");
  if (l.size() != I) throw DimensionError("MultiProblemSpec: coupling matrix needs I rows");
  for (std::size_t i = 0; i < I; ++i) {
    if (primal_dims[i] < 1) throw DimensionError("MultiProblemSpec: primal block dimension must be >= 1");
    if (l[i].size() != J) throw DimensionError("MultiProblemSpec: coupling matrix needs J columns");
    for (std::size_t j = 0; j < J; ++j)
      if (l[i][j] && (l[i][j]->cols() != primal_dims[i] || l[i][j]->rows() != dual_dims[j]))
        throw DimensionError("MultiProblemSpec: L_{" + std::to_string(i) + "," + std::to_string(j) +
                             "} does not map H_i to G_j");
  }
  for (auto d : dual_dims)
    if (d < 1) throw DimensionError("MultiProblemSpec: dual block dimension must be >= 1");
}

LiftedConstants lifted_constants(const MultiProblemSpec& spec, std::uint64_t seed) {
  spec.check();
  LiftedConstants k;
  for (std::size_t j = 0; j < spec.dual_count(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < spec.primal_count(); ++i)
      if (spec.l[i][j]) col += operator_norm(*spec.l[i][j], seed);
    k.ell += col * col;
  }
  double lip = spec.b.lipschitz;
  for (const auto& n : spec.n_inv) lip = std::max(lip, n.lipschitz);
  k.beta = lip + std::sqrt(k.ell);
  for (const auto& c : spec.c) k.zeta = std::max(k.zeta, c.cocoercivity_inverse);
  for (const auto& d : spec.d_inv) k.zeta = std::max(k.zeta, d.cocoercivity_inverse);
  return k;
}

MultiResult frpib_multi_solve(const MultiProblemSpec& spec, const SolverConfig& cfg, const MultiStart& start) {
  return multi_solve(spec, cfg, start, Flavor::reflected);
}

MultiResult fpisdr_multi_solve(const MultiProblemSpec& spec, const SolverConfig& cfg, const MultiStart& start) {
  return multi_solve(spec, cfg, start, Flavor::sdr);
}

// -- composite ----------------------------------------------------------------

LiftedConstants composite_constants(const CompositeProblem& p, std::uint64_t seed) {
  LiftedConstants k;
  const double norm_l = operator_norm(p.l, seed);
  k.ell = norm_l * norm_l;
  k.beta = norm_l;
  k.zeta = p.h_grad.lipschitz;
  return k;
}

namespace {

SolverTrace composite_solve(const CompositeProblem& p, const SolverConfig& cfg, const Vec& x0, const Vec& u0,
                            Flavor flavor) {
  if (x0.size() != p.l.cols() || u0.size() != p.l.rows()) throw DimensionError("composite: shape mismatch");
  const auto k = composite_constants(p, cfg.seed);
  const double g =
      resolve_step_size(flavor == Flavor::reflected ? StepRule::reflected : StepRule::sdr, k.beta, k.zeta, cfg);
  Vec x = p.v(x0);
  if ((x - x0).norm() > 1e-12 * (1.0 + x0.norm())) spdlog::warn("composite: x0 projected onto V");
  Vec u = u0;
  Vec y = Vec::Zero(x.size());
  Vec w1_prev = p.l.apply_adjoint(u);
  Vec w2_prev = -p.l.apply(x);
  IterationLog log(cfg);
  for (int n = 0;; ++n) {
    const Vec w1 = p.l.apply_adjoint(u);
    const Vec w2 = -p.l.apply(x);
    const Vec u_prev = u;
    Vec x_next;
    if (flavor == Flavor::reflected) {
      const Vec pn = p.f(g, x + g * y - g * p.v(2.0 * w1 - w1_prev + p.h_grad(x)));
      u = prox_conjugate(p.g, g, u - g * (2.0 * w2 - w2_prev));
      x_next = p.v(pn);
      y -= (pn - x_next) / g;
    } else {
      const Vec pn = p.f(g, x + g * y - g * p.v(w1 + p.h_grad(x)));
      u = prox_conjugate(p.g, g, u - g * w2) - g * (w2 - w2_prev);
      const Vec ppn = p.v(pn);
      x_next = ppn - g * p.v(w1 - w1_prev);
      y -= (pn - ppn) / g;
    }
    w1_prev = w1;
    w2_prev = w2;
    const bool stop = log.step(n, x, x_next, u_prev, u, y);
    x = std::move(x_next);
    if (stop) break;
  }
  auto t = log.finish(std::move(x), std::move(y), g);
  t.dual = std::move(u);
  return t;
}

}  // namespace

SolverTrace composite_frpib(const CompositeProblem& p, const SolverConfig& cfg, const Vec& x0, const Vec& u0) {
  return composite_solve(p, cfg, x0, u0, Flavor::reflected);
}

SolverTrace composite_fpisdr(const CompositeProblem& p, const SolverConfig& cfg, const Vec& x0, const Vec& u0) {
  return composite_solve(p, cfg, x0, u0, Flavor::sdr);
}

// -- consensus ----------------------------------------------------------------

std::vector<double> ConsensusSpec::resolved_weights() const {
  const std::size_t K = a.size();
  if (K == 0) throw std::invalid_argument("ConsensusSpec: at least one operator required");
  if (weights.empty()) return std::vector<double>(K, 1.0 / static_cast<double>(K));
  if (weights.size() != K) throw std::invalid_argument("ConsensusSpec: need one weight per operator");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || w > 1.0) throw std::invalid_argument("ConsensusSpec: weights must lie in ]0,1]");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("ConsensusSpec: weights must sum to 1");
  return weights;
}

Vec weighted_dual_sum(const Vec& y_stacked, const std::vector<double>& weights) {
  const auto K = static_cast<Eigen::Index>(weights.size());
  if (K == 0 || y_stacked.size() % K != 0) throw DimensionError("weighted_dual_sum: size mismatch");
  const Eigen::Index n = y_stacked.size() / K;
  Vec s = Vec::Zero(n);
  for (Eigen::Index k = 0; k < K; ++k) s += weights[static_cast<std::size_t>(k)] * y_stacked.segment(k * n, n);
  return s;
}

namespace {

SolverTrace consensus_solve(const ConsensusSpec& spec, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev,
                            const std::vector<Vec>& y0, Flavor flavor) {
  const auto omega = spec.resolved_weights();
  const std::size_t K = omega.size();
  const Eigen::Index dim = x0.size();
  if (x_prev.size() != dim) throw DimensionError("consensus: x_prev dimension mismatch");
  std::vector<Vec> y = y0.empty() ? std::vector<Vec>(K, Vec::Zero(dim)) : y0;
  if (y.size() != K) throw DimensionError("consensus: need one y^k per operator");
  for (const auto& yk : y)
    if (yk.size() != dim) throw DimensionError("consensus: y^k dimension mismatch");
  {
    Vec s = Vec::Zero(dim);
    double scale = 1.0;
    for (std::size_t k = 0; k < K; ++k) {
      s += omega[k] * y[k];
      scale = std::max(scale, y[k].norm());
    }
    if (s.norm() > 1e-10 * scale) throw std::invalid_argument("consensus: Σ ω_k y0^k must be 0");
  }
  const double g = resolve_step_size(flavor == Flavor::reflected ? StepRule::reflected : StepRule::sdr,
                                     spec.b.lipschitz, spec.c.cocoercivity_inverse, cfg);
  IterationLog log(cfg);
  Vec x = x0;
  Vec w_prev = spec.b(x_prev);
  std::vector<Vec> p(K);
  auto stacked_y = [&] {
    Vec out(dim * static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) out.segment(static_cast<Eigen::Index>(k) * dim, dim) = y[k];
    return out;
  };
  for (int n = 0;; ++n) {
    const Vec w = spec.b(x);
    const Vec q = flavor == Flavor::reflected ? Vec(x - g * (2.0 * w - w_prev + spec.c(x)))
                                              : Vec(x - g * (w + spec.c(x)));
    Vec avg = Vec::Zero(dim);
    for (std::size_t k = 0; k < K; ++k) {
      p[k] = spec.a[k](g / omega[k], g * y[k] + q);
      avg += omega[k] * p[k];
    }
    for (std::size_t k = 0; k < K; ++k) y[k] -= (p[k] - avg) / g;
    Vec x_next = flavor == Flavor::reflected ? avg : Vec(avg - g * (w - w_prev));
    w_prev = w;
    const bool stop = log.step(n, x, x_next, stacked_y());
    x = std::move(x_next);
    if (stop) break;
  }
  return log.finish(std::move(x), stacked_y(), g);
}

}  // namespace

SolverTrace consensus_frpib_solve(const ConsensusSpec& spec, const SolverConfig& cfg, const Vec& x0,
                                  const Vec& x_prev, const std::vector<Vec>& y0) {
  return consensus_solve(spec, cfg, x0, x_prev, y0, Flavor::reflected);
}

SolverTrace consensus_fpisdr_solve(const ConsensusSpec& spec, const SolverConfig& cfg, const Vec& x0,
                                   const Vec& x_prev, const std::vector<Vec>& y0) {
  return consensus_solve(spec, cfg, x0, x_prev, y0, Flavor::sdr);
}

}  // namespace psplit
