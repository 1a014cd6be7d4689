#pragma once

#include "psplit/linalg.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace psplit {

/// Resolvent provider: evaluate(γ, v) = J_{γA} v = (Id + γA)^{-1} v.
///
/// Every resolvent accepts an arbitrary positive γ, so scaled operators such as
/// A/ω are served exactly through evaluate(γ/ω, v).
struct ResolventOp {
  std::function<Vec(double, const Vec&)> evaluate;
  std::string descriptor;

  Vec operator()(double gamma, const Vec& v) const { return evaluate(gamma, v); }
};

/// Single-valued forward operator with declared constants.
/// `lipschitz` is β (0 when undeclared or the operator vanishes);
/// `cocoercivity_inverse` is ζ such that the operator is 1/ζ-cocoercive
/// (0 means not declared cocoercive).
struct ForwardOp {
  std::function<Vec(const Vec&)> evaluate;
  double lipschitz = 0.0;
  double cocoercivity_inverse = 0.0;
  std::string descriptor;

  Vec operator()(const Vec& x) const { return evaluate(x); }
};

/// Orthogonal projector onto a closed subspace V.
struct SubspaceProjector {
  std::function<Vec(const Vec&)> project;
  std::string descriptor;

  Vec operator()(const Vec& v) const { return project(v); }
  Vec complement(const Vec& v) const { return v - project(v); }
};

// -- prox / projection primitives -------------------------------------------

/// prox of α‖·‖₁. α = 0 returns x unchanged.
Vec soft_threshold(const Vec& x, double alpha);
/// Componentwise clamp onto {lo ≤ x ≤ hi}.
Vec box_project(const Vec& x, const Vec& lo, const Vec& hi);

/// prox_{γf*}(v) = v - γ prox_{f/γ}(v/γ)
Vec prox_conjugate(const ResolventOp& f_prox, double gamma, const Vec& v);
/// J_{γM^{-1}}(v) = v - γ J_{M/γ}(v/γ)
Vec resolvent_of_inverse(const ResolventOp& m_res, double gamma, const Vec& v);

/// Resolvent of the partial inverse (γA)_V:
///   J_{(γA)_V} = 2 P_V ∘ J_{γA} - J_{γA} + Id - P_V.
Vec partial_inverse_resolvent(const ResolventOp& a_res, const SubspaceProjector& proj, double gamma,
                              const Vec& u);

// -- resolvent library ------------------------------------------------------

ResolventOp zero_resolvent();
/// A = ∂(α‖·‖₁)
ResolventOp l1_resolvent(double alpha);
/// A = N_C, C = {lo ≤ x ≤ hi}
ResolventOp box_resolvent(Vec lo, Vec hi);
/// A = N_C with scalar bounds applied to every coordinate.
ResolventOp interval_resolvent(double lo, double hi);
/// A = N_{{c}}; the resolvent is the constant c.
ResolventOp point_resolvent(Vec c);
/// A x = S x + b with S monotone (S + Sᵀ ⪰ 0).
ResolventOp affine_resolvent(Mat s, Vec b);
/// A = ∂(w/2 ‖· - c‖²)
ResolventOp quadratic_resolvent(double weight, Vec center);

/// Builds a resolvent from a registry key:
///   zero | l1:<α> | nonneg | interval:<lo>:<hi> | point:<c> | scale:<a> | shift:<c> | quadratic:<w>:<c>
/// Vector-valued keys broadcast their scalar parameters to dimension `dim`.
ResolventOp resolvent_from_descriptor(const std::string& descriptor, Eigen::Index dim);
std::vector<std::string> resolvent_registry_keys();

// -- forward operators ------------------------------------------------------

ForwardOp zero_forward(Eigen::Index dim);
/// x ↦ S x + b. β = ‖S‖₂; ζ = λ_max(S) when S is symmetric positive semidefinite.
ForwardOp affine_forward(Mat s, Vec b);
/// ∇ of (w/2)‖Mx - z‖²; ζ = w‖M‖² from `norm_of_m`.
ForwardOp least_squares_gradient(LinearMap m, Vec z, double weight, double norm_of_m);

// -- subspace projectors ----------------------------------------------------

SubspaceProjector whole_space_projector();
SubspaceProjector zero_subspace_projector();
/// Projector onto span(columns of basis).
SubspaceProjector span_projector(const Mat& basis);
/// Projector onto ker T, P = Id - T*(TT*)^+ T (rank-deficient T allowed).
SubspaceProjector kernel_projector(const LinearMap& t);
/// Projector onto ker T for the lifted map T(x,w) = Mx - w on ℝᴺ×ℝᴷ:
/// P(a,b) = (x̃, Mx̃), x̃ = (Id+M*M)^{-1}(a + M*b).
SubspaceProjector graph_kernel_projector(std::shared_ptr<const SpdSolveCache> cache);

// -- discrete gradients -----------------------------------------------------

/// Forward differences ℝⁿ → ℝⁿ⁻¹; norm bound 2.
LinearMap discrete_gradient_1d(Eigen::Index n);
/// Row-major h×w image → horizontal differences (h(w-1)) stacked over vertical
/// differences ((h-1)w); norm bound √8.
LinearMap discrete_gradient_2d(Eigen::Index h, Eigen::Index w);

// -- contract samplers (used by tests and the validate command) -------------

/// max over samples of ‖Ju-Jv‖² - ⟨Ju-Jv, u-v⟩ (≤ 0 for firmly nonexpansive maps).
double firm_nonexpansiveness_violation(const ResolventOp& res, Eigen::Index dim, double gamma, int samples,
                                       std::uint64_t seed);

struct ProjectorViolations {
  double idempotence = 0.0;
  double self_adjointness = 0.0;
  double linearity = 0.0;
};
ProjectorViolations projector_violations(const SubspaceProjector& proj, Eigen::Index dim, int samples,
                                         std::uint64_t seed);

/// Worst ‖prox_{γf}(v) + γ·prox_{f*/γ}(v/γ) - v‖ over seeded samples, with
/// both proxes supplied as independent closed forms.
double moreau_identity_violation(const ResolventOp& f_prox, const ResolventOp& conj_prox, Eigen::Index dim,
                                 double gamma, int samples, std::uint64_t seed);

struct ProxPair {
  std::string name;
  ResolventOp f;
  ResolventOp conjugate;
};
/// Closed-form (prox f, prox f*) pairs shipped with the library.
std::vector<ProxPair> shipped_prox_pairs(Eigen::Index dim);

}  // namespace psplit
