#pragma once

#include "psplit/operators.hpp"

#include <chrono>
#include <iosfwd>
#include <optional>
#include <string_view>

namespace psplit {

/// 0 ∈ Ax + Bx + Cx + N_V x
struct ProblemSpec {
  ResolventOp a;
  ForwardOp b;
  ForwardOp c;
  SubspaceProjector v = whole_space_projector();
};

/// min f(x) + g(Lx) + h(x); h_grad.lipschitz is ρ. `v` is used only by the
/// partial-inverse composite solvers (x constrained to V).
struct CompositeProblem {
  ResolventOp f;
  ResolventOp g;
  ForwardOp h_grad;
  LinearMap l;
  SubspaceProjector v = whole_space_projector();
};

class StepSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterate leaves the finite reals (only reachable with a
/// forced, inadmissible step size).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  /// Step size. Non-positive selects 0.999 × the admissible supremum.
  double gamma = 0.0;
  int max_iters = 50000;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  /// Run even when γ is outside the admissible region.
  bool force = false;
  /// Evaluated on x_{n+1} each iteration when set.
  std::function<double(const Vec&)> objective;
  /// Called after every iteration with (n, x_{n+1}, y_{n+1}).
  std::function<void(int, const Vec&, const Vec&)> observer;
};

struct IterRecord {
  double residual = 0.0;
  double elapsed_ms = 0.0;
  std::optional<double> objective;
};

enum class RunStatus { converged, budget_exhausted };
std::string_view to_string(RunStatus s);

struct SolverTrace {
  std::vector<IterRecord> records;
  Vec x;
  Vec y;
  /// Dual variable of primal–dual solvers (empty otherwise).
  Vec dual;
  RunStatus status = RunStatus::budget_exhausted;
  double gamma = 0.0;

  int iterations() const { return static_cast<int>(records.size()); }
  double last_residual() const { return records.empty() ? 0.0 : records.back().residual; }
};

/// ‖x_{n+1} − x_n‖ / max(‖x_{n+1}‖, 1e-12)
double relative_change(const Vec& prev, const Vec& next);

/// Residual bookkeeping, timing, observer dispatch and the stopping rule,
/// shared by every iterative solver.
class IterationLog {
 public:
  explicit IterationLog(const SolverConfig& cfg);

  /// Records iteration n (x_n → x_{n+1}); returns true when the run should stop.
  bool step(int n, const Vec& x_prev, const Vec& x_next, const Vec& y);
  /// Same, for primal-dual methods: the residual measures the change of the pair (x, u).
  bool step(int n, const Vec& x_prev, const Vec& x_next, const Vec& u_prev, const Vec& u_next, const Vec& y);
  SolverTrace finish(Vec x, Vec y, double gamma);

 private:
  bool record(int n, double residual, const Vec& x_next, const Vec& y);

  const SolverConfig& cfg_;
  std::chrono::steady_clock::time_point start_;
  std::vector<IterRecord> records_;
};

// -- step sizes ---------------------------------------------------------------

enum class StepRule {
  /// γ < 2/(4β+ζ): frpib, fhrb and their composite/multivariate/consensus forms
  reflected,
  /// 2/3 − (2β+ζ)γ − β²ζγ³ > 0: fpisdr, fsdr and their extensions
  sdr,
};

/// 2/(4β+ζ); +∞ when β = ζ = 0.
double step_size_frpib_max(double beta, double zeta);
/// Positive root of 2/3 − (2β+ζ)λ − β²ζλ³; exactly 1/(3β) when ζ = 0; +∞ when β = ζ = 0.
double step_size_fsdr_max(double beta, double zeta);
double step_size_max(StepRule rule, double beta, double zeta);

/// Maps an algorithm id (frpib, fpisdr, fhrb, fsdr, mtpd, cmtpd, ...) to its rule.
StepRule step_rule_for(std::string_view algorithm);

struct StepSizeCheck {
  bool accepted = false;
  double supremum = 0.0;
  /// (supremum − γ)/supremum; negative when rejected, 1 when the supremum is +∞.
  double margin = 0.0;
};
StepSizeCheck validate_step_size(StepRule rule, double beta, double zeta, double gamma);
StepSizeCheck validate_step_size(std::string_view algorithm, double beta, double zeta, double gamma);

/// Applies the config policy: auto-select 0.999 × supremum, otherwise validate
/// (throwing StepSizeError unless cfg.force).
double resolve_step_size(StepRule rule, double beta, double zeta, const SolverConfig& cfg);

constexpr double kStepSafety = 0.999;

// -- solvers ------------------------------------------------------------------

/// Forward-reflected partial-inverse method with a cocoercive term.
/// x0, x_prev are projected onto V and y0 onto V⊥ (with a warning when moved).
SolverTrace frpib_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev,
                        const Vec& y0);
SolverTrace frpib_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0);

/// Semi-forward partial-inverse method (Douglas–Rachford type correction).
SolverTrace fpisdr_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev,
                         const Vec& y0);
SolverTrace fpisdr_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0);

/// x_{n+1} = J_{λA}(x_n − λ(2Bx_n − Bx_{n−1} + Cx_n)). p.v is ignored.
SolverTrace fhrb_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev);

/// x_{n+1} = J_{λA}(x_n − λ(B+C)x_n) − λ(Bx_n − Bx_{n−1}). p.v is ignored.
SolverTrace fsdr_solve(const ProblemSpec& p, const SolverConfig& cfg, const Vec& x0, const Vec& x_prev);

struct CondatVuSteps {
  double tau = 0.0;
  double sigma = 0.0;
};
/// τ = σ solving ‖L‖²τ² + (ρ/2)τ = 0.999, i.e. on the safe side of τ(σ‖L‖² + ρ/2) < 1.
CondatVuSteps condat_vu_default_steps(double norm_l, double rho);
bool condat_vu_admissible(double tau, double sigma, double norm_l, double rho);

/// x̃ = prox_{τf}(x − τ(∇h x + L*u)), ũ = prox_{σg*}(u + σL(2x̃ − x)).
/// Non-positive τ or σ selects the default pair. p.v is ignored; the dual
/// iterate u is returned in `dual`. ‖L‖ comes from its norm bound or power iteration.
SolverTrace condat_vu_solve(const CompositeProblem& p, const SolverConfig& cfg, CondatVuSteps steps,
                            const Vec& x0, const Vec& u0);

/// Norm bound when declared, else a 200-step power-iteration estimate.
double operator_norm(const LinearMap& l, std::uint64_t seed = 0);

/// CSV: iter, residual, objective, elapsed_ms (objective blank when not recorded).
void write_trace_csv(std::ostream& out, const SolverTrace& trace, bool zero_timing = false);

}  // namespace psplit
