#pragma once

#include "psplit/splitting.hpp"

namespace psplit {

/// Primal blocks i = 1..I with A_i, C_i, V_i; a joint Lipschitz B on the
/// stacked primal vector (β̃ = b.lipschitz); dual blocks j = 1..J with M_j,
/// N_j^{-1} (ν_j = lipschitz) and D_j^{-1} (δ_j = cocoercivity_inverse);
/// couplings L_{i,j}: H_i → G_j (empty optional = zero map).
///
/// Solves  −Σ_j L*_{ij} u_j ∈ A_i x_i + B_i x + C_i x_i + N_{V_i} x_i,
///          u_j ∈ (M_j □ N_j □ D_j)(Σ_i L_{ij} x_i).
struct MultiProblemSpec {
  std::vector<Eigen::Index> primal_dims;
  std::vector<Eigen::Index> dual_dims;
  std::vector<ResolventOp> a;
  std::vector<ForwardOp> c;
  std::vector<SubspaceProjector> v;
  ForwardOp b;
  std::vector<ResolventOp> m;
  std::vector<ForwardOp> n_inv;
  std::vector<ForwardOp> d_inv;
  std::vector<std::vector<std::optional<LinearMap>>> l;

  std::size_t primal_count() const { return primal_dims.size(); }
  std::size_t dual_count() const { return dual_dims.size(); }
  Eigen::Index primal_size() const;
  Eigen::Index dual_size() const;
  /// Throws DimensionError on any inconsistent pairing.
  void check() const;
};

struct LiftedConstants {
  double ell = 0.0;
  double beta = 0.0;
  double zeta = 0.0;
};
/// ℓ = Σ_j (Σ_i ‖L_ij‖)², β = max{β̃, ν_j} + √ℓ, ζ = max{ζ_i, δ_j}.
LiftedConstants lifted_constants(const MultiProblemSpec& spec, std::uint64_t seed = 0);

/// Initial points; empty vectors mean zero, empty *_prev mean "same as current".
struct MultiStart {
  std::vector<Vec> x, x_prev, y, u, u_prev;
};

/// Stacked z = (x_1..x_I, u_1..u_J) in `trace.x`, stacked y (zeros on dual
/// blocks) in `trace.y`; the residual is the relative change of z.
struct MultiResult {
  SolverTrace trace;
  std::vector<Vec> primal;
  std::vector<Vec> dual;
  std::vector<Vec> y;
};

MultiResult frpib_multi_solve(const MultiProblemSpec& spec, const SolverConfig& cfg, const MultiStart& start = {});
MultiResult fpisdr_multi_solve(const MultiProblemSpec& spec, const SolverConfig& cfg, const MultiStart& start = {});

/// Step constants of the composite problem: β = ‖L‖, ζ = ρ.
LiftedConstants composite_constants(const CompositeProblem& p, std::uint64_t seed = 0);

/// min_{x∈V} f(x) + g(Lx) + h(x). `trace.x` holds x, `trace.y` the V⊥
/// certificate, `trace.dual` the dual variable u. The residual measures x.
SolverTrace composite_frpib(const CompositeProblem& p, const SolverConfig& cfg, const Vec& x0, const Vec& u0);
SolverTrace composite_fpisdr(const CompositeProblem& p, const SolverConfig& cfg, const Vec& x0, const Vec& u0);

/// 0 ∈ Σ_k A_k x + Bx + Cx with weights ω_k (empty = 1/K each).
struct ConsensusSpec {
  std::vector<ResolventOp> a;
  std::vector<double> weights;
  ForwardOp b;
  ForwardOp c;

  /// Weights actually used; throws on invalid weights.
  std::vector<double> resolved_weights() const;
};

/// `trace.y` stacks y^1..y^K. y0 (empty = zeros) must satisfy Σ ω_k y^k = 0.
SolverTrace consensus_frpib_solve(const ConsensusSpec& spec, const SolverConfig& cfg, const Vec& x0,
                                  const Vec& x_prev, const std::vector<Vec>& y0 = {});
SolverTrace consensus_fpisdr_solve(const ConsensusSpec& spec, const SolverConfig& cfg, const Vec& x0,
                                   const Vec& x_prev, const std::vector<Vec>& y0 = {});

/// Σ_k ω_k y^k for a stacked y.
Vec weighted_dual_sum(const Vec& y_stacked, const std::vector<double>& weights);

}  // namespace psplit
