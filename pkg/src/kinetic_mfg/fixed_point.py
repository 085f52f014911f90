"""Picard iteration of the MFG fixed-point map and the smallness certificate.

Given (m~, u~), the map M returns (m, u) where

    d_t m + v d_x m - 1/2 d_vv m = -eps d_v J[m~, D_v u~],   m(0) = m0
   -d_t u - v d_x u - 1/2 d_vv u =  eps H[m~, D_v u~],       u(T) = delta G[m~(T)]

Iterates are compared in the discrete X^s x X^s norm.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .hamiltonians import HamiltonianSpec, check_monotone, eval_G_field, eval_H_frames, eval_J_frames
from .kolmogorov import SourceSpec, solve_backward, solve_forward, tail_mass_fraction
from .phase_grid import Field, Trajectory, _deriv_axis, integrate, time_axis
from .transport import xs_norm

log = logging.getLogger(__name__)

K_STAR_CAP = 1e12


class ConvergenceError(RuntimeError):
    """Picard iteration stopped without meeting the tolerance."""

    def __init__(self, message: str, reports: list):
        super().__init__(message)
        self.reports = reports

    @property
    def ratios(self) -> list[float]:
        return [r.ratio for r in self.reports]


class DivergenceError(ConvergenceError):
    pass


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class PicardConfig:
    T: float = 0.5
    N_t: int = 256
    s: int = 3
    tol_fixed_point: float = 1e-8
    max_iter: int = 50
    require_probability: bool = True
    divergence_window: int = 3

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T > 0 required (got {self.T})")
        if self.N_t < 2:
            raise ValueError(f"N_t ≥ 2 required (got {self.N_t})")
        if not 0 <= self.s <= 4:
            raise ValueError(f"s ≤ 4 required (got {self.s})")
        if not self.tol_fixed_point > 0:
            raise ValueError(f"tol_fixed_point > 0 required (got {self.tol_fixed_point})")
        if self.max_iter < 1:
            raise ValueError(f"max_iter ≥ 1 required (got {self.max_iter})")

    @property
    def times(self) -> np.ndarray:
        return time_axis(self.T, self.N_t)


@dataclass(frozen=True)
class MFGState:
    m: Trajectory
    u: Trajectory
    dvm: Trajectory
    dvu: Trajectory

    def __post_init__(self):
        ref = self.m
        for nm in ("u", "dvm", "dvu"):
            tr = getattr(self, nm)
            if tr.grid != ref.grid or tr.n_frames != ref.n_frames:
                raise ValueError(f"state component {nm} is not on the grid/time axis of m")
        if self.m.is_vector or self.u.is_vector or not (self.dvm.is_vector and self.dvu.is_vector):
            raise ValueError("m, u are scalar trajectories and dvm, dvu vector trajectories")

    @property
    def grid(self):
        return self.m.grid

    @property
    def times(self) -> np.ndarray:
        return self.m.times

    @classmethod
    def zeros(cls, grid, T: float, N_t: int) -> "MFGState":
        z = Trajectory.zeros(grid, T, N_t)
        zv = Trajectory.zeros(grid, T, N_t, d=1)
        return cls(z, z, zv, zv)

    def xs_norm(self, s: int) -> float:
        return math.hypot(xs_norm(self.m, self.dvm, s), xs_norm(self.u, self.dvu, s))

    def __sub__(self, other: "MFGState") -> "MFGState":
        return MFGState(self.m - other.m, self.u - other.u, self.dvm - other.dvm, self.dvu - other.dvu)


@dataclass(frozen=True)
class IterationReport:
    iter: int
    xs_diff: float
    ratio: float
    mass_drift: float
    min_m: float
    pair_xs_norm: float

    CSV_HEADER = ("iter", "xs_diff", "ratio", "mass_drift", "min_m", "pair_xs_norm")

    def csv_row(self) -> list:
        return [self.iter] + [repr(float(getattr(self, k))) for k in self.CSV_HEADER[1:]]


def write_iteration_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(IterationReport.CSV_HEADER)
        for r in reports:
            w.writerow(r.csv_row())


# ---------------------------------------------------------------------------
# the map M


def _check_state(state: MFGState, m0: Field, cfg: PicardConfig):
    if state.grid != m0.grid:
        raise ValueError("state and m0 live on different grids")
    if state.m.n_frames != cfg.N_t + 1 or not np.allclose(state.times, cfg.times, rtol=0, atol=1e-12):
        raise ValueError("state is not sampled on the configured time axis")


def apply_M(state: MFGState, m0: Field, spec: HamiltonianSpec, cfg: PicardConfig) -> MFGState:
    _check_state(state, m0, cfg)
    grid, times = state.grid, state.times
    m_t = state.m.data
    p_t = state.dvu.scalar()

    fwd_src = bwd_src = None
    if spec.epsilon != 0.0:
        J = eval_J_frames(spec, grid, times, m_t, p_t)
        H = eval_H_frames(spec, grid, times, m_t, p_t)
        fwd_src = SourceSpec(h2=Trajectory(grid, times, (-spec.epsilon * J)[:, None]))
        bwd_src = SourceSpec(h1=Trajectory(grid, times, spec.epsilon * H))

    m, dvm = solve_forward(m0, fwd_src, cfg.T, cfg.N_t)
    terminal = eval_G_field(spec, state.m.frame(-1)) * spec.delta
    u, dvu = solve_backward(terminal, bwd_src, cfg.T, cfg.N_t)
    return MFGState(m, u, dvm, dvu)


def linear_state(m_init: Field, u_T: Field | None, cfg: PicardConfig) -> MFGState:
    """Source-free forward evolution of m_init paired with source-free backward evolution of u_T (0 if None)."""
    m, dvm = solve_forward(m_init, None, cfg.T, cfg.N_t)
    if u_T is None:
        zero = MFGState.zeros(m_init.grid, cfg.T, cfg.N_t)
        return MFGState(m, zero.u, dvm, zero.dvu)
    u, dvu = solve_backward(u_T, None, cfg.T, cfg.N_t)
    return MFGState(m, u, dvm, dvu)


def free_state(m0: Field, cfg: PicardConfig) -> MFGState:
    """Free Kolmogorov evolution of m0 paired with u = 0."""
    return linear_state(m0, None, cfg)


def mass_drift(m: Trajectory, m0: Field) -> float:
    mass0 = integrate(m0)
    masses = m.data.sum(axis=(-2, -1)) * m.grid.area / (m.grid.N_x * m.grid.N_v)
    return float(np.max(np.abs(masses - mass0)))


def picard_solve(
    m0: Field, spec: HamiltonianSpec, cfg: PicardConfig, start: str | MFGState = "zero"
) -> tuple[MFGState, list[IterationReport]]:
    """Iterate M until the X^s x X^s step falls below cfg.tol_fixed_point.

    ``start`` is "zero", "free" or an explicit state. Raises DivergenceError
    when the step grows for ``cfg.divergence_window`` consecutive iterations
    and ConvergenceError after ``cfg.max_iter`` iterations.
    """
    if cfg.require_probability:
        mass = integrate(m0)
        if abs(mass - 1.0) > 1e-10:
            raise ValueError(f"m0 must have unit mass (got {mass!r})")
        if np.min(m0.data) < 0:
            raise ValueError("m0 must be non-negative")
    tail = float(tail_mass_fraction(m0.data, m0.grid)[0])
    if tail >= 1e-8:
        raise ValueError(f"m0 tail mass {tail:.3e} near the velocity boundary exceeds 1e-8")

    if isinstance(start, MFGState):
        state = start
    elif start == "zero":
        state = MFGState.zeros(m0.grid, cfg.T, cfg.N_t)
    elif start == "free":
        state = free_state(m0, cfg)
    else:
        raise ValueError(f"unknown start {start!r}")

    reports: list[IterationReport] = []
    prev = None
    growth = 0
    for k in range(1, cfg.max_iter + 1):
        new = apply_M(state, m0, spec, cfg)
        diff = (new - state).xs_norm(cfg.s)
        ratio = diff / prev if prev not in (None, 0.0) else float("nan")
        rep = IterationReport(
            iter=k,
            xs_diff=diff,
            ratio=ratio,
            mass_drift=mass_drift(new.m, m0),
            min_m=float(np.min(new.m.data)),
            pair_xs_norm=new.xs_norm(cfg.s),
        )
        reports.append(rep)
        log.info("picard iter %d: xs_diff=%.3e ratio=%.4f", k, diff, ratio)
        state = new
        if not np.isfinite(diff):
            raise DivergenceError(f"non-finite iterate difference at iteration {k}", reports)
        if diff < cfg.tol_fixed_point:
            return state, reports
        growth = growth + 1 if prev is not None and diff > prev else 0
        if growth >= cfg.divergence_window:
            raise DivergenceError(
                f"divergence guard: xs_diff grew for {growth} consecutive iterations "
                f"(iteration {k}, xs_diff={diff:.3e}, ratios {[round(r.ratio, 4) for r in reports[1:]]})",
                reports,
            )
        prev = diff
    raise ConvergenceError(
        f"no convergence after {cfg.max_iter} iterations (last xs_diff={reports[-1].xs_diff:.3e})", reports
    )


# ---------------------------------------------------------------------------
# residuals of the coupled system


def _l2_space_time(res: np.ndarray, grid, dt: float) -> float:
    return float(np.sqrt(np.sum(res**2) * grid.dx * grid.dv * dt))


def residual_check(state: MFGState, m0: Field, spec: HamiltonianSpec, cfg: PicardConfig) -> tuple[float, float]:
    """Discrete L^2 residuals (Fokker-Planck, HJB) on interior frames.

    Time derivatives are centred differences, space derivatives spectral.
    """
    grid, times = state.grid, state.times
    dt = state.m.dt
    kx, kv = grid.kx_d, grid.kv_d
    V = grid.mesh[1]
    m, u = state.m.data, state.u.data
    p = state.dvu.scalar()
    inner = slice(1, -1)

    def kolmogorov_part(w, sign):
        wx = _deriv_axis(w[inner], kx, 1, -2)
        wvv = _deriv_axis(w[inner], kv, 2, -1)
        return sign * V * wx - 0.5 * wvv

    dmdt = (m[2:] - m[:-2]) / (2 * dt)
    dudt = (u[2:] - u[:-2]) / (2 * dt)
    res_m = dmdt + kolmogorov_part(m, 1.0)
    res_u = -dudt + kolmogorov_part(u, -1.0)
    if spec.epsilon != 0.0:
        J = eval_J_frames(spec, grid, times[inner], m[inner], p[inner])
        H = eval_H_frames(spec, grid, times[inner], m[inner], p[inner])
        res_m = res_m + spec.epsilon * _deriv_axis(J, kv, 1, -1)
        res_u = res_u - spec.epsilon * H
    return _l2_space_time(res_m, grid, dt), _l2_space_time(res_u, grid, dt)


# ---------------------------------------------------------------------------
# smallness certificate


@dataclass(frozen=True)
class Certificate:
    epsilon: float
    delta: float
    T: float
    L_star: float
    feasible: bool
    K_star: float
    lipschitz_bound: float
    contraction: bool
    lhs: float = field(default=float("nan"))

    CSV_HEADER = ("epsilon", "delta", "T", "L_star", "lhs", "feasible", "K_star", "lipschitz_bound", "contraction")

    def csv_row(self) -> list:
        return [getattr(self, k) for k in self.CSV_HEADER]

    def to_text(self) -> str:
        lines = [f"{k} = {v}" for k, v in asdict(self).items()]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({k: (str(v) if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(self).items()})


def smallness_lhs(spec: HamiltonianSpec, T: float, y: float) -> float:
    """2 delta^2 K(T, y) + 4 eps^2 (1+T) F(T, (1+T) y)."""
    e2, d2 = spec.epsilon**2, spec.delta**2
    total = 0.0
    if d2:
        total += 2.0 * d2 * float(spec.bound_K(T, y))
    if e2:
        total += 4.0 * e2 * (1.0 + T) * float(spec.bound_F(T, (1.0 + T) * y))
    return total


def _predicate(spec, T, L_star, K) -> bool:
    return smallness_lhs(spec, T, L_star + K) < L_star


def check_smallness(spec: HamiltonianSpec, T: float, L_star: float) -> Certificate:
    if not L_star > 0:
        raise CertificateError(f"L_star > 0 required (got {L_star})")
    if not T > 0:
        raise CertificateError(f"T > 0 required (got {T})")
    try:
        check_monotone(spec.bound_F, "bound_F")
        check_monotone(spec.bound_K, "bound_K")
    except ValueError as exc:
        raise CertificateError(str(exc)) from exc
    lhs = smallness_lhs(spec, T, L_star)
    feasible = lhs < L_star
    K_star = compute_K_star(spec, T, L_star) if feasible else float("nan")
    return Certificate(
        epsilon=spec.epsilon,
        delta=spec.delta,
        T=float(T),
        L_star=float(L_star),
        feasible=bool(feasible),
        K_star=K_star,
        lipschitz_bound=math.sqrt((1.0 + T) * L_star),
        contraction=bool(L_star < 1.0 / (1.0 + T)),
        lhs=lhs,
    )


def compute_K_star(spec: HamiltonianSpec, T: float, L_star: float, tol: float = 1e-10) -> float:
    """Supremum of admissible radii K, by doubling then bisection; inf past K_STAR_CAP."""
    if not _predicate(spec, T, L_star, 0.0):
        raise CertificateError("smallness condition fails at K = 0; no admissible radius")
    hi = 1.0
    while _predicate(spec, T, L_star, hi):
        if hi >= K_STAR_CAP:
            return math.inf
        hi = min(2.0 * hi, K_STAR_CAP)
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _predicate(spec, T, L_star, mid):
            lo = mid
        else:
            hi = mid
    return lo


def write_certificates(path, certs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(Certificate.CSV_HEADER)
        for c in certs:
            w.writerow(c.csv_row())
