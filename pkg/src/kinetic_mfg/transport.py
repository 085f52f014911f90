"""Vector fields commuting with free transport, the shear flow map, and adapted norms.

For d = 1 the two fields are ``gamma_1 = d/dx`` and ``gamma_2(t) = t d/dx + d/dv``.
In Fourier variables (kx, kv) they are the multipliers ``i kx`` and
``i (t kx + kv)``, so every Gamma^s(t) quantity is a weighted Parseval sum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .phase_grid import (
    S_MAX,
    Field,
    PhaseGrid,
    Trajectory,
    UnsupportedOrderError,
    to_spectral,
    trapezoid,
)


@dataclass(frozen=True, order=True)
class MultiIndex:
    beta: tuple[int, int]

    def __post_init__(self):
        b = tuple(int(x) for x in self.beta)
        if len(b) != 2 or min(b) < 0:
            raise ValueError(f"multi-index must be a pair of non-negative ints, got {self.beta}")
        if sum(b) > S_MAX:
            raise UnsupportedOrderError(f"|beta| = {sum(b)} exceeds {S_MAX}")
        object.__setattr__(self, "beta", b)

    @property
    def order(self) -> int:
        return sum(self.beta)

    def __str__(self):
        return f"({self.beta[0]},{self.beta[1]})"


def multi_indices(s: int) -> list[MultiIndex]:
    return [MultiIndex((b, s - b)) for b in range(s + 1)]


@dataclass(frozen=True)
class GammaNormReport:
    t: float
    s: int
    seminorm: float
    full_norm: float
    per_beta: dict = field(default_factory=dict)

    def csv_row(self) -> list:
        return [self.t, self.s, self.seminorm, self.full_norm]

    CSV_HEADER = ("t", "s", "seminorm", "full_norm")


def write_gamma_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GammaNormReport.CSV_HEADER)
        for r in reports:
            w.writerow(r.csv_row())


def _check_s(s: int):
    if s < 0 or s > S_MAX:
        raise UnsupportedOrderError(f"order {s} outside supported range 0..{S_MAX}")


def gamma_symbols(grid: PhaseGrid, t: float):
    """Real symbols (a1, a2) with gamma_j <-> i * a_j on the full FFT grid."""
    KX, KV = np.meshgrid(grid.kx_d, grid.kv_d, indexing="ij")
    return KX, t * KX + KV


def _weight(KX: np.ndarray, KV: np.ndarray, s: int, t) -> np.ndarray:
    t_arr = np.asarray(t, dtype=float)
    shape = t_arr.shape + KX.shape
    if s == 0:
        return np.ones(shape)
    tt = t_arr.reshape(t_arr.shape + (1, 1))
    a1sq = KX * KX
    a2 = tt * KX + KV
    a2sq = a2 * a2
    # P_k = a2^2 P_{k-1} + a1^{2k} builds sum_b a1^{2b} a2^{2(k-b)}
    poly = np.ones(shape)
    a1pow = np.ones_like(a1sq)
    for _ in range(s):
        a1pow = a1pow * a1sq
        poly = poly * a2sq + a1pow
    return 1.0 + poly


def gamma_weight(grid: PhaseGrid, s: int, t: float | np.ndarray) -> np.ndarray:
    """Fourier weight of ||.||^2_{Gamma^s(t)}; vectorised over an array of times.

    s = 0 gives the plain L^2 weight.
    """
    _check_s(s)
    KX, KV = np.meshgrid(grid.kx_d, grid.kv_d, indexing="ij")
    return _weight(KX, KV, s, t)


def apply_gamma(f: Field, j: int, t: float) -> Field:
    if j not in (1, 2):
        raise ValueError(f"vector field index must be 1 or 2 for d = 1 (got {j})")
    a1, a2 = gamma_symbols(f.grid, t)
    sym = a1 if j == 1 else a2
    c = np.fft.fft2(f.data)
    return Field(f.grid, np.fft.ifft2(1j * sym * c).real)


def apply_gamma_beta(f: Field, beta: MultiIndex, t: float) -> Field:
    a1, a2 = gamma_symbols(f.grid, t)
    sym = (1j * a1) ** beta.beta[0] * (1j * a2) ** beta.beta[1]
    return Field(f.grid, np.fft.ifft2(sym * np.fft.fft2(f.data)).real)


def gamma_norm(f: Field, s: int, t: float) -> GammaNormReport:
    _check_s(s)
    g = f.grid
    c2 = np.abs(to_spectral(f)) ** 2
    l2sq = g.area * float(np.sum(c2))
    per_beta = {}
    semisq = 0.0
    if s > 0:
        a1, a2 = gamma_symbols(g, t)
        for mi in multi_indices(s):
            b1, b2 = mi.beta
            val = g.area * float(np.sum(a1 ** (2 * b1) * a2 ** (2 * b2) * c2))
            per_beta[mi] = np.sqrt(val)
            semisq += val
    return GammaNormReport(
        t=float(t), s=s, seminorm=float(np.sqrt(semisq)), full_norm=float(np.sqrt(semisq + l2sq)), per_beta=per_beta
    )


def _chunks(n: int, size: int = 32):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def _half_weight(grid: PhaseGrid, s: int, times: np.ndarray) -> np.ndarray:
    """Weight on the rfft2 half-plane, times the multiplicity of each column."""
    nh = grid.N_v // 2 + 1
    KX, KV = np.meshgrid(grid.kx_d, grid.kv_d[:nh], indexing="ij")
    mult = np.full(nh, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    return _weight(KX, KV, s, times) * mult


def gamma_sq_frames(data: np.ndarray, grid: PhaseGrid, s: int, times) -> np.ndarray:
    """||frame_k||^2_{Gamma^s(t_k)} for a stack of frames of shape (n, N_x, N_v)."""
    _check_s(s)
    times = np.asarray(times, dtype=float)
    out = np.empty(times.size)
    for sl in _chunks(times.size):
        c = np.fft.rfft2(data[sl])
        c2 = c.real**2 + c.imag**2
        out[sl] = np.sum(_half_weight(grid, s, times[sl]) * c2, axis=(-2, -1))
    return out * grid.area / (grid.N_x * grid.N_v) ** 2


def gamma_inner_frames(a: np.ndarray, b: np.ndarray, grid: PhaseGrid, s: int, times) -> np.ndarray:
    """Gamma^s(t_k) inner products of paired frame stacks."""
    _check_s(s)
    times = np.asarray(times, dtype=float)
    out = np.empty(times.size)
    for sl in _chunks(times.size):
        ca = np.fft.rfft2(a[sl])
        cb = np.fft.rfft2(b[sl])
        out[sl] = np.sum(_half_weight(grid, s, times[sl]) * (ca * cb.conj()).real, axis=(-2, -1))
    return out * grid.area / (grid.N_x * grid.N_v) ** 2


def flow_compose(f: Field, t: float) -> Field:
    """g(x, v) = f(x + v t, v), by an exact phase shift of each v-row's x-spectrum."""
    if t == 0:
        return f
    g = f.grid
    spec = np.fft.rfft(f.data, axis=0)
    spec *= np.exp(1j * np.outer(g.kx_r, g.v_nodes) * t)
    return Field(g, np.fft.irfft(spec, n=g.N_x, axis=0))


def shear_norm(t: float) -> float:
    """Spectral norm of [[1, 0], [t, 1]] (equal to that of its inverse)."""
    return 0.5 * (abs(t) + np.sqrt(t * t + 4.0))


def conversion_constant(s: int, t: float) -> float:
    """Effective constant C with |f|_{Hdot^s} <= C |f|_{Gammadot^s(t)} and vice versa.

    Pointwise in frequency the order-s sum over multi-indices lies between
    |xi|^{2s} / max_b binom(s, b) and |xi|^{2s}; the shear changes |xi| by at
    most its operator norm, which is bounded by 1 + t.
    """
    _check_s(s)
    if s == 0:
        return 1.0
    return np.sqrt(max(comb(s, b) for b in range(s + 1))) * shear_norm(t) ** s


def xs_norm(w: Trajectory, dvw: Trajectory, s: int) -> float:
    """Discrete X^s norm: sup-in-time Gamma^s plus trapezoidal L^2_t Gamma^s of D_v w."""
    _check_s(s)
    if w.grid != dvw.grid or w.n_frames != dvw.n_frames or not np.allclose(w.times, dvw.times):
        raise ValueError("w and D_v w trajectories must share grid and time axis")
    sup_part = float(np.max(gamma_sq_frames(w.scalar(), w.grid, s, w.times)))
    if w.n_frames == 1:
        return np.sqrt(sup_part)
    dv_sq = gamma_sq_frames(dvw.scalar(), w.grid, s, w.times)
    return float(np.sqrt(sup_part + trapezoid(dv_sq, w.times)))
