"""Spectral solver and verification suite for kinetic mean field games on T x [-V, V)."""

from .fixed_point import (
    Certificate,
    IterationReport,
    MFGState,
    PicardConfig,
    apply_M,
    check_smallness,
    compute_K_star,
    linear_state,
    picard_solve,
    residual_check,
)
from .hamiltonians import HamiltonianSpec, builtin, eval_G_field, eval_H_field, eval_J_field
from .kolmogorov import (
    SourceSpec,
    energy_report,
    fundamental_kernel,
    oracle_convolve,
    propagate_free,
    solve_backward,
    solve_forward,
)
from .phase_grid import Field, PhaseGrid, Trajectory, VecField, build_grid
from .transport import apply_gamma, flow_compose, gamma_norm, xs_norm

__version__ = "0.1.0"
