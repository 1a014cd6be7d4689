#pragma once

#include "psplit/multivariate.hpp"

#include <string_view>

namespace psplit {

/// min_{lo ≤ x ≤ hi} (α₁/2)‖Mx − z‖² + α₂‖Lx‖₁ with L a discrete gradient
/// (1-D for the random instances, 2-D for tomography).
struct FusedLassoInstance {
  LinearMap m;
  Vec z;
  Vec lo;
  Vec hi;
  double alpha1 = 5.0;
  double alpha2 = 0.5;
  LinearMap l;
  double norm_m = 0.0;
  double kappa = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index n() const { return m.cols(); }
  Eigen::Index k() const { return m.rows(); }
  void check() const;
};

/// M (K×N) i.i.d. κ·U[0,1]; lo ~ −1.5·U[0,1]; hi ~ 1.5·U[0,1]; z ~ N(0,1)ᴷ.
/// ‖M‖ is estimated by 200 power-iteration steps.
FusedLassoInstance gen_fused_lasso(Eigen::Index n, Eigen::Index k, double kappa, std::uint64_t seed,
                                   double alpha1 = 5.0, double alpha2 = 0.5);

double objective(const FusedLassoInstance& inst, const Vec& x);

/// Single-run summary.
struct RunReport {
  std::string algorithm;
  int iterations = 0;
  double elapsed_s = 0.0;
  double objective = 0.0;
  double rel_error = 0.0;
  std::optional<double> psnr;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::budget_exhausted;
};

struct FusedSolve {
  RunReport report;
  SolverTrace trace;
  /// Box-feasible solution.
  Vec x;
};

/// Lifted composite problem on X = (x, w) ∈ ℝᴺ×ℝᴷ with V = {w = Mx}.
CompositeProblem mtpd_problem(const FusedLassoInstance& inst, std::shared_ptr<const SpdSolveCache> cache);
/// Unlifted composite problem on x with h = (α₁/2)‖M· − z‖², ρ = α₁‖M‖².
CompositeProblem direct_problem(const FusedLassoInstance& inst);

enum class MtpdPath { optimized, generic };

FusedSolve mtpd_solve(const FusedLassoInstance& inst, const SolverConfig& cfg, MtpdPath path = MtpdPath::optimized);
FusedSolve cmtpd_solve(const FusedLassoInstance& inst, const SolverConfig& cfg);
FusedSolve fhrb_fused_solve(const FusedLassoInstance& inst, const SolverConfig& cfg);
FusedSolve condat_vu_fused_solve(const FusedLassoInstance& inst, const SolverConfig& cfg);

/// Algorithm ids: mtpd, cmtpd, fhrb (alias fhrb-fused), condat-vu.
FusedSolve solve_fused(const FusedLassoInstance& inst, std::string_view algorithm, const SolverConfig& cfg);
const std::vector<std::string>& fused_algorithms();
std::string canonical_algorithm(std::string_view algorithm);

/// Auto-selected step size for an algorithm on this instance.
double fused_default_step(const FusedLassoInstance& inst, std::string_view algorithm);

/// Norm of the best optimality certificate of
///   0 ∈ α₁M*(Mx − z) + α₂L*∂‖·‖₁(Lx) + N_box(x).
/// Entries with |(Lx)_i| ≤ zero_tol get a free subgradient in [−1,1]; bounds
/// within active_tol are treated as active. Throws if x violates the box by
/// more than 1e-8.
double kkt_residual(const FusedLassoInstance& inst, const Vec& x, double zero_tol = 1e-5, double active_tol = 1e-5);

}  // namespace psplit
