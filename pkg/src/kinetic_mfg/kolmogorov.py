"""Linear Kolmogorov solves  (d_t + v d_x - 1/2 d_vv) w = h1 + d_v h2  on the phase grid.

Time stepping is Strang splitting of two exact spectral flows: the free
transport (a per-row phase shift of the x-spectrum by v*dt) and the velocity
heat flow (the multiplier exp(-kv^2 dt / 2)). Sources enter at the midpoint of
each step, between the two half heat flows, using the average of the two
adjacent source frames.

The state is carried in the mixed representation (x-wavenumber, v) where the
transport is diagonal; one FFT along v moves it to where the heat flow is.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .phase_grid import (
    Field,
    PhaseGrid,
    Trajectory,
    cumulative_corrected,
    cumulative_trapezoid,
    load_field,
    save_field,
    time_axis,
)
from .transport import gamma_inner_frames, gamma_sq_frames

log = logging.getLogger(__name__)

TAIL_FRACTION = 0.1
TAIL_TOLERANCE = 1e-6


class SolverError(RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class SourceSpec:
    """Right-hand side h1 + div_v h2; either part may be None (zero)."""

    h1: Trajectory | None = None
    h2: Trajectory | None = None

    def is_zero(self) -> bool:
        return self.h1 is None and self.h2 is None

    def h1_frames(self, n: int, shape) -> np.ndarray:
        return self.h1.data if self.h1 is not None else np.zeros((n,) + shape)

    def h2_frames(self, n: int, shape) -> np.ndarray:
        return self.h2.scalar() if self.h2 is not None else np.zeros((n,) + shape)

    def reversed(self) -> "SourceSpec":
        return SourceSpec(
            self.h1.reversed() if self.h1 is not None else None,
            self.h2.reversed() if self.h2 is not None else None,
        )


@dataclass(frozen=True)
class EnergyReport:
    t: float
    lhs: float
    rhs_identity: float
    rhs_bound: float
    identity_gap: float
    bound_slack: float

    CSV_HEADER = ("t", "lhs", "rhs_identity", "rhs_bound", "identity_gap", "bound_slack")

    def csv_row(self) -> list:
        return [self.t, self.lhs, self.rhs_identity, self.rhs_bound, self.identity_gap, self.bound_slack]


def write_energy_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EnergyReport.CSV_HEADER)
        for r in reports:
            w.writerow([repr(float(x)) for x in r.csv_row()])


# ---------------------------------------------------------------------------
# stepping kernel


def _source_hat(grid: PhaseGrid, src: SourceSpec | None, n: int) -> np.ndarray | None:
    """Frames of h1 + d_v h2 in the (kx, kv) representation, or None."""
    if src is None or src.is_zero():
        return None
    out = np.zeros((n, grid.N_x // 2 + 1, grid.N_v), dtype=complex)
    if src.h1 is not None:
        out += np.fft.fft(np.fft.rfft(src.h1.data, axis=-2), axis=-1)
    if src.h2 is not None:
        out += 1j * grid.kv_d * np.fft.fft(np.fft.rfft(src.h2.scalar(), axis=-2), axis=-1)
    return out


def _march(grid: PhaseGrid, w0: np.ndarray, dt: float, n_steps: int, sign: int = 1, s_hat=None, keep_all=True):
    """Strang steps of (d_t + sign * v d_x - 1/2 d_vv) w = S.

    Returns (frames, dv_frames); with keep_all=False only the final frame.
    """
    half_shift = np.exp(-1j * sign * np.outer(grid.kx_r, grid.v_nodes) * (0.5 * dt))
    half_heat = np.exp(-0.25 * grid.kv**2 * dt)
    ikv = 1j * grid.kv_d

    def physical(W):
        return np.fft.irfft(W, n=grid.N_x, axis=0)

    def dv_physical(W):
        return np.fft.irfft(np.fft.ifft(ikv * np.fft.fft(W, axis=1), axis=1), n=grid.N_x, axis=0)

    W = np.fft.rfft(w0, axis=0).astype(complex)
    n_out = n_steps + 1 if keep_all else 1
    frames = np.empty((n_out,) + grid.shape)
    dv_frames = np.empty((n_out,) + grid.shape)
    if keep_all:
        frames[0] = w0
        dv_frames[0] = dv_physical(W)
    for step in range(n_steps):
        W *= half_shift
        Wh = np.fft.fft(W, axis=1)
        Wh *= half_heat
        if s_hat is not None:
            Wh += (0.5 * dt) * (s_hat[step] + s_hat[step + 1])
        Wh *= half_heat
        W = np.fft.ifft(Wh, axis=1)
        W *= half_shift
        if not np.all(np.isfinite(W)):
            raise SolverError(f"non-finite state after step {step + 1}", step=step + 1)
        if keep_all:
            frames[step + 1] = physical(W)
            dv_frames[step + 1] = dv_physical(W)
    if not keep_all:
        frames[0] = physical(W)
        dv_frames[0] = dv_physical(W)
    return frames, dv_frames


def _check_source(src: SourceSpec | None, grid: PhaseGrid, times: np.ndarray):
    if src is None:
        return
    for name, tr in (("h1", src.h1), ("h2", src.h2)):
        if tr is None:
            continue
        if tr.grid != grid:
            raise ValueError(f"source {name} lives on a different grid")
        if tr.n_frames != times.size or not np.allclose(tr.times, times, rtol=0, atol=1e-12):
            raise ValueError(f"source {name} is not sampled on the solver time grid")
        if name == "h2" and not tr.is_vector:
            raise ValueError("h2 must be a vector trajectory")


# ---------------------------------------------------------------------------
# public solvers


def propagate_free(w0: Field, t: float, n_steps: int = 64) -> Field:
    """Source-free Kolmogorov evolution of w0 up to time t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if t == 0:
        return w0
    frames, _ = _march(w0.grid, w0.data, t / n_steps, n_steps, keep_all=False)
    return Field(w0.grid, frames[0])


def solve_forward(w0: Field, src: SourceSpec | None, T: float, N_t: int) -> tuple[Trajectory, Trajectory]:
    """Initial value problem on [0, T]; returns (w, D_v w) on N_t + 1 frames."""
    grid = w0.grid
    times = time_axis(T, N_t)
    _check_source(src, grid, times)
    frames, dv = _march(grid, w0.data, T / N_t, N_t, sign=1, s_hat=_source_hat(grid, src, times.size))
    return Trajectory(grid, times, frames), Trajectory(grid, times, dv[:, None])


def solve_backward(wT: Field, src: SourceSpec | None, T: float, N_t: int) -> tuple[Trajectory, Trajectory]:
    """Terminal value problem  -(d_t + v d_x + 1/2 d_vv) w = h1 + d_v h2,  w(T) = wT.

    Reversing time turns it into an initial value problem with the transport
    sign flipped; the result is mapped back onto the forward time axis.
    """
    grid = wT.grid
    times = time_axis(T, N_t)
    _check_source(src, grid, times)
    rsrc = src.reversed() if src is not None else None
    frames, dv = _march(grid, wT.data, T / N_t, N_t, sign=-1, s_hat=_source_hat(grid, rsrc, times.size))
    return Trajectory(grid, times, frames[::-1]), Trajectory(grid, times, dv[::-1, None])


# ---------------------------------------------------------------------------
# fundamental solution


def kernel_covariance(t: float) -> np.ndarray:
    """Covariance of (X_t, V_t) for dX = V dt, dV = dW started at the origin."""
    return np.array([[t**3 / 3.0, t**2 / 2.0], [t**2 / 2.0, t]])


def fundamental_kernel(t: float, x, v):
    """Density at (x, v) of (X_t, V_t), dX = V dt, dV = dW, X_0 = V_0 = 0.

    This solves (d_t + v d_x - 1/2 d_vv) K = 0 with K -> delta as t -> 0.
    """
    if t <= 0:
        raise ValueError("kernel defined for t > 0 only")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    # inverse covariance = (12 / t^4) [[t, -t^2/2], [-t^2/2, t^3/3]]
    q = (12.0 / t**3) * x * x - (12.0 / t**2) * x * v + (4.0 / t) * v * v
    return np.sqrt(3.0) / (np.pi * t * t) * np.exp(-0.5 * q)


def sheared_kernel(t: float, x, v):
    """Kernel in the convolution-at-(x - tv, v) convention.

    ``w(t, x, v) = (S(t) * w0)(x - t v, v)`` with
    ``S(t, x', v') = sqrt(3)/(pi t^2) exp(-(4 v'^2 + 12 v'x'/t + 12 x'^2/t^2) / (2t))``.
    Equals ``fundamental_kernel(t, x + t v, v)``.
    """
    if t <= 0:
        raise ValueError("kernel defined for t > 0 only")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    q = 4.0 * v * v + (12.0 / t) * v * x + (12.0 / t**2) * x * x
    return np.sqrt(3.0 / np.pi**2) * t**-2.0 * np.exp(-q / (2.0 * t))


def oracle_convolve(w0: Field, t: float, method: str = "spectral") -> Field:
    """Free evolution of w0 through the fundamental solution, with x-periodisation.

    ``spectral``: the kernel's closed-form Fourier transform is applied to w0
    (periodisation in x is exact by Poisson summation; v is treated on its
    periodic box like the solver). Cost O(N log N).

    ``quadrature``: direct rectangle-rule convolution against wrapped images
    of the kernel. Cost O(N^2); usable on small grids only and accurate only
    when the kernel is resolved (sqrt(t^3/12) several times dx).
    """
    if t <= 0:
        raise ValueError("oracle defined for t > 0 only")
    grid = w0.grid
    if method == "spectral":
        k = grid.kx_r[:, None]
        a = np.fft.rfft(w0.data, axis=0) * np.exp(-1j * k * grid.v_nodes[None, :] * t)
        symbol = np.exp(-0.5 * t * (grid.kv[None, :] + 0.5 * k * t) ** 2 - k**2 * t**3 / 24.0)
        out = np.fft.ifft(np.fft.fft(a, axis=1) * symbol, axis=1)
        return Field(grid, np.fft.irfft(out, n=grid.N_x, axis=0))
    if method == "quadrature":
        return Field(grid, _quadrature_convolve(grid, w0.data, t))
    raise ValueError(f"unknown oracle method {method!r}")


def _quadrature_convolve(grid: PhaseGrid, w0: np.ndarray, t: float) -> np.ndarray:
    L = grid.L_x
    n_img = int(math.ceil(10.0 * math.sqrt(t**3 / 3.0) / L)) + 1
    x, v = grid.x_nodes, grid.v_nodes
    out = np.empty(grid.shape)
    # y1[i, j, l] = x_i - x0_j - v0_l t, reduced to one period
    base = x[:, None, None] - x[None, :, None] - v[None, None, :] * t
    base = (base + 0.5 * L) % L - 0.5 * L
    cell = grid.dx * grid.dv
    for iv, vi in enumerate(v):
        y2 = (vi - v)[None, None, :]
        acc = np.zeros_like(base)
        for img in range(-n_img, n_img + 1):
            acc += fundamental_kernel(t, base + img * L, y2)
        out[:, iv] = cell * np.einsum("ijl,jl->i", acc, w0)
    return out


# ---------------------------------------------------------------------------
# diagnostics


def tail_mass_fraction(frames: np.ndarray, grid: PhaseGrid, fraction: float = TAIL_FRACTION) -> np.ndarray:
    """Per-frame share of sum|w| carried by the outer `fraction` of v-rows."""
    frames = np.asarray(frames)
    if frames.ndim == 2:
        frames = frames[None]
    mask = np.abs(grid.v_nodes) >= (1.0 - fraction) * grid.V_max
    total = np.sum(np.abs(frames), axis=(-2, -1))
    tail = np.sum(np.abs(frames[..., mask]), axis=(-2, -1))
    return np.where(total > 0, tail / np.where(total > 0, total, 1.0), 0.0)


def check_tail(w: Trajectory, tol: float = TAIL_TOLERANCE) -> float:
    """Largest tail share over frames; logs a warning on breach."""
    worst = float(np.max(tail_mass_fraction(w.scalar(), w.grid)))
    if worst >= tol:
        log.warning("tail mass %.3e at the velocity boundary exceeds %.1e; enlarge V_max", worst, tol)
    return worst


def energy_report(
    w: Trajectory, dvw: Trajectory, src: SourceSpec | None, s: int = 0, backward: bool = False
) -> list[EnergyReport]:
    """Energy identity and a-priori bound at every frame, in Gamma^s(t) norms.

    lhs          = |w(t)|^2 + int |D_v w|^2
    rhs_identity = |w(t0)|^2 + 2 int (<h1, w> - <h2, D_v w>)
    rhs_bound    = 2 |w(t0)|^2 + 4 int (tau |h1|^2 + |h2|^2)

    Time integrals in the identity use an end-corrected trapezoid rule.
    Integrals run from the data time t0 (0 forward, T backward) over elapsed
    time tau; the bound is the a-priori estimate on the horizon [t0, t],
    which implies the one on the full horizon. ``identity_gap`` is relative
    to the larger of lhs and the absolute rhs budget.
    """
    grid = w.grid
    times = np.asarray(w.times)
    n = times.size
    dt = w.dt
    h1 = src.h1_frames(n, grid.shape) if src is not None else np.zeros((n,) + grid.shape)
    h2 = src.h2_frames(n, grid.shape) if src is not None else np.zeros((n,) + grid.shape)
    wf, dvf = w.scalar(), dvw.scalar()
    if backward:
        order = slice(None, None, -1)
        wf, dvf, h1, h2, gtimes = wf[order], dvf[order], h1[order], h2[order], times[order]
    else:
        gtimes = times
    E = gamma_sq_frames(wf, grid, s, gtimes)
    D = gamma_sq_frames(dvf, grid, s, gtimes)
    P = gamma_inner_frames(h1, wf, grid, s, gtimes) - gamma_inner_frames(h2, dvf, grid, s, gtimes)
    H1 = gamma_sq_frames(h1, grid, s, gtimes)
    H2 = gamma_sq_frames(h2, grid, s, gtimes)
    elapsed = np.arange(n) * dt
    lhs = E + cumulative_corrected(D, dt)
    rhs_id = E[0] + 2.0 * cumulative_corrected(P, dt)
    budget = E[0] + 2.0 * cumulative_trapezoid(np.abs(P), dt)
    rhs_bound = 2.0 * E[0] + 4.0 * (elapsed * cumulative_trapezoid(H1, dt) + cumulative_trapezoid(H2, dt))
    scale = np.maximum(np.maximum(lhs, budget), np.finfo(float).tiny)
    reports = []
    for k in range(n):
        reports.append(
            EnergyReport(
                t=float(gtimes[k]),
                lhs=float(lhs[k]),
                rhs_identity=float(rhs_id[k]),
                rhs_bound=float(rhs_bound[k]),
                identity_gap=float(abs(lhs[k] - rhs_id[k]) / scale[k]),
                bound_slack=float(rhs_bound[k] - lhs[k]),
            )
        )
    return reports


# ---------------------------------------------------------------------------
# checkpoints: frame_{k}.bin snapshots plus index.csv listing times


def save_trajectory(directory, traj: Trajectory, name: str = "") -> None:
    if traj.is_vector:
        raise ValueError("checkpoints hold scalar trajectories")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "index.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(("k", "time", "file"))
        for k, t in enumerate(traj.times):
            fname = f"frame_{k}.bin"
            save_field(d / fname, traj.frame(k), time=float(t), name=name)
            wr.writerow((k, repr(float(t)), fname))


def load_trajectory(directory) -> Trajectory:
    d = Path(directory)
    with open(d / "index.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    fields = [load_field(d / r["file"])[0] for r in rows]
    grid = fields[0].grid
    times = np.array([float(r["time"]) for r in rows])
    return Trajectory(grid, times, np.stack([f.data for f in fields]))
