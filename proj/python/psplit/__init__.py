"""Projective splitting solvers for monotone inclusions on closed subspaces."""

from ._psplit import (
    FusedLassoInstance,
    Solution,
    box_project,
    fused_algorithms,
    gen_fused_lasso,
    kkt_residual,
    objective,
    psnr,
    shepp_logan,
    soft_threshold,
    solve_fused,
    solve_subspace_qp,
    step_size_frpib_max,
    step_size_fsdr_max,
    validate,
    validate_suites,
)

__all__ = [
    "FusedLassoInstance",
    "Solution",
    "box_project",
    "fused_algorithms",
    "gen_fused_lasso",
    "kkt_residual",
    "objective",
    "psnr",
    "shepp_logan",
    "soft_threshold",
    "solve_fused",
    "solve_subspace_qp",
    "step_size_frpib_max",
    "step_size_fsdr_max",
    "validate",
    "validate_suites",
]
