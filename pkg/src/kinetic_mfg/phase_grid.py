"""Periodic phase-space grid on [0, L_x) x [-V_max, V_max) with spectral calculus.

All derivatives are Fourier multipliers on the full 2-D grid. The Nyquist
mode is treated as unresolved and dropped from every derivative of order
>= 1, so that composed derivatives agree exactly with higher-order ones
(``deriv_x(deriv_x(f, 1), 1) == deriv_x(f, 2)``) and all multipliers commute.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

S_MAX = 4

trapezoid = getattr(np, "trapezoid", None) or np.trapz


def cumulative_trapezoid(y: np.ndarray, dt: float) -> np.ndarray:
    """Running trapezoidal integral along axis 0, starting at zero."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if y.shape[0] > 1:
        out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)
    return out


def cumulative_corrected(y: np.ndarray, dt: float) -> np.ndarray:
    """Running trapezoid with the first Euler-Maclaurin end correction.

    The derivative at the moving end point is taken by second-order one-sided
    differences, so the rule is fourth order for smooth integrands.
    """
    y = np.asarray(y, dtype=float)
    out = cumulative_trapezoid(y, dt)
    if y.shape[0] < 3:
        return out
    d = np.gradient(y, dt, axis=0, edge_order=2)
    return out - dt * dt / 12.0 * (d - d[0])


class GridError(ValueError):
    pass


class UnsupportedOrderError(ValueError):
    pass


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseGrid:
    N_x: int
    N_v: int
    L_x: float
    V_max: float

    def __post_init__(self):
        for name in ("N_x", "N_v"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or not _is_pow2(int(n)):
                raise GridError(f"{name} not a power of two (got {n!r})")
            if n < 8:
                raise GridError(f"{name} must be >= 8 (got {n})")
        if not self.L_x > 0:
            raise GridError(f"L_x must be positive (got {self.L_x})")
        if not self.V_max > 0:
            raise GridError(f"V_max must be positive (got {self.V_max})")

    @property
    def dx(self) -> float:
        return self.L_x / self.N_x

    @property
    def dv(self) -> float:
        return 2.0 * self.V_max / self.N_v

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N_x, self.N_v)

    @property
    def area(self) -> float:
        return 2.0 * self.L_x * self.V_max

    @cached_property
    def x_nodes(self) -> np.ndarray:
        return np.arange(self.N_x) * self.dx

    @cached_property
    def v_nodes(self) -> np.ndarray:
        return -self.V_max + np.arange(self.N_v) * self.dv

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, V) arrays of shape (N_x, N_v)."""
        return np.meshgrid(self.x_nodes, self.v_nodes, indexing="ij")

    @cached_property
    def kx(self) -> np.ndarray:
        """Angular wavenumbers along x, FFT ordering, Nyquist included."""
        return 2.0 * np.pi / self.L_x * np.fft.fftfreq(self.N_x, d=1.0 / self.N_x)

    @cached_property
    def kv(self) -> np.ndarray:
        return np.pi / self.V_max * np.fft.fftfreq(self.N_v, d=1.0 / self.N_v)

    @cached_property
    def kx_d(self) -> np.ndarray:
        """Derivative wavenumbers along x (Nyquist zeroed)."""
        k = self.kx.copy()
        k[self.N_x // 2] = 0.0
        return k

    @cached_property
    def kv_d(self) -> np.ndarray:
        k = self.kv.copy()
        k[self.N_v // 2] = 0.0
        return k

    @cached_property
    def kx_r(self) -> np.ndarray:
        """x-wavenumbers for the half spectrum produced by ``rfft``."""
        return 2.0 * np.pi / self.L_x * np.arange(self.N_x // 2 + 1)

    def header(self) -> dict:
        return {"N_x": self.N_x, "N_v": self.N_v, "L_x": self.L_x, "V_max": self.V_max}


def build_grid(N_x: int, N_v: int, L_x: float, V_max: float) -> PhaseGrid:
    return PhaseGrid(int(N_x), int(N_v), float(L_x), float(V_max))


def _frozen(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class Field:
    """Real samples of a function on the grid, shape (N_x, N_v), v fastest."""

    grid: PhaseGrid
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.shape != self.grid.shape:
            raise ValueError(f"field shape {arr.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise FloatingPointError(f"non-finite field value at node {tuple(int(i) for i in bad)}")
        object.__setattr__(self, "data", _frozen(arr))

    @classmethod
    def from_function(cls, grid: PhaseGrid, fn) -> "Field":
        X, V = grid.mesh
        return cls(grid, np.broadcast_to(fn(X, V), grid.shape))

    @classmethod
    def constant(cls, grid: PhaseGrid, c: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(c)))

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.data + _data(other))

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.data - _data(other))

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.data * _data(c))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.data)


def _data(obj):
    return obj.data if isinstance(obj, Field) else obj


@dataclass(frozen=True)
class VecField:
    components: tuple[Field, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        grids = {c.grid for c in self.components}
        if len(grids) != 1:
            raise ValueError("vector field components must share one grid")

    @property
    def grid(self) -> PhaseGrid:
        return self.components[0].grid

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def data(self) -> np.ndarray:
        return np.stack([c.data for c in self.components])


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed frames on a uniform time axis.

    ``data`` has shape (n_frames, N_x, N_v) for scalar trajectories and
    (n_frames, d, N_x, N_v) for vector-valued ones.
    """

    grid: PhaseGrid
    times: np.ndarray
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.shape[0] != times.size:
            raise ValueError(f"{arr.shape[0]} frames but {times.size} times")
        if arr.shape[-2:] != self.grid.shape or arr.ndim not in (3, 4):
            raise ValueError(f"trajectory shape {arr.shape} incompatible with grid {self.grid.shape}")
        if times.size > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-12 * max(1.0, abs(times[-1])):
                raise ValueError("times must be uniformly spaced")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def n_frames(self) -> int:
        return self.times.size

    @property
    def is_vector(self) -> bool:
        return self.data.ndim == 4

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.n_frames > 1 else 0.0

    def frame(self, k: int):
        if self.is_vector:
            return VecField(tuple(Field(self.grid, c) for c in self.data[k]))
        return Field(self.grid, self.data[k])

    def scalar(self) -> np.ndarray:
        """Frames as (n, N_x, N_v); the single component for d = 1 vectors."""
        if self.is_vector:
            if self.data.shape[1] != 1:
                raise ValueError("only d = 1 vector trajectories reduce to scalars")
            return self.data[:, 0]
        return self.data

    def reversed(self) -> "Trajectory":
        """Same frames in reverse order, relabelled on the same time axis."""
        return Trajectory(self.grid, self.times, self.data[::-1])

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        _check_compatible(self, other)
        return Trajectory(self.grid, self.times, self.data - other.data)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        _check_compatible(self, other)
        return Trajectory(self.grid, self.times, self.data + other.data)

    def __mul__(self, c: float) -> "Trajectory":
        return Trajectory(self.grid, self.times, self.data * c)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: PhaseGrid, T: float, N_t: int, d: int | None = None) -> "Trajectory":
        times = time_axis(T, N_t)
        shape = (times.size,) + ((d,) if d else ()) + grid.shape
        return cls(grid, times, np.zeros(shape))

    @classmethod
    def constant_in_time(cls, f: Field, T: float, N_t: int) -> "Trajectory":
        times = time_axis(T, N_t)
        return cls(f.grid, times, np.broadcast_to(f.data, (times.size,) + f.grid.shape))


def time_axis(T: float, N_t: int) -> np.ndarray:
    if N_t == 0:
        return np.array([0.0])
    return np.linspace(0.0, T, N_t + 1)


def _check_compatible(a: Trajectory, b: Trajectory):
    if a.grid != b.grid:
        raise ValueError("trajectories live on different grids")
    if a.data.shape != b.data.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-14):
        raise ValueError("trajectories have mismatched time axes or shapes")


# ---------------------------------------------------------------------------
# spectral calculus


def to_spectral(f: Field) -> np.ndarray:
    """Normalised 2-D Fourier coefficients: f = sum c_{ab} e^{i(kx_a x + kv_b (v + V_max))}."""
    return np.fft.fft2(f.data) / f.data.size


def from_spectral(grid: PhaseGrid, coeffs: np.ndarray) -> Field:
    return Field(grid, np.fft.ifft2(coeffs * coeffs.size).real)


def _deriv_axis(arr: np.ndarray, k: np.ndarray, order: int, axis: int) -> np.ndarray:
    if order == 0:
        return arr.copy()
    spec = np.fft.fft(arr, axis=axis)
    mult = (1j * k) ** order
    shape = [1] * arr.ndim
    shape[axis] = k.size
    spec *= mult.reshape(shape)
    return np.fft.ifft(spec, axis=axis).real


def _check_order(order: int):
    if order < 0:
        raise ValueError(f"derivative order must be non-negative (got {order})")


def deriv_x(f: Field, order: int = 1) -> Field:
    _check_order(order)
    return Field(f.grid, _deriv_axis(f.data, f.grid.kx_d, order, axis=-2))


def deriv_v(f: Field, order: int = 1) -> Field:
    _check_order(order)
    return Field(f.grid, _deriv_axis(f.data, f.grid.kv_d, order, axis=-1))


def integrate(f: Field) -> float:
    g = f.grid
    return float(g.dx * g.dv * np.sum(f.data))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(integrate(Field(f.grid, f.data**2))))


def sobolev_weight(grid: PhaseGrid, s: int) -> np.ndarray:
    """Fourier weight w with ||f||_{H^s}^2 = area * sum w |c|^2.

    For s >= 1 the weight is 1 + sum_{b=0}^{s} kx^{2b} kv^{2(s-b)}, one term
    per multi-index of order s. For s = 0 the norm is plain L^2.
    """
    if s > S_MAX or s < 0:
        raise UnsupportedOrderError(f"Sobolev order {s} outside supported range 0..{S_MAX}")
    if s == 0:
        return np.ones(grid.shape)
    KX, KV = np.meshgrid(grid.kx_d, grid.kv_d, indexing="ij")
    w = np.ones(grid.shape)
    for b in range(s + 1):
        w += KX ** (2 * b) * KV ** (2 * (s - b))
    return w


def sobolev_norm(f: Field, s: int) -> float:
    w = sobolev_weight(f.grid, s)
    c = to_spectral(f)
    return float(np.sqrt(f.grid.area * np.sum(w * np.abs(c) ** 2)))


# ---------------------------------------------------------------------------
# snapshot files: one JSON header line, then little-endian float64 payload


def save_field(path, f: Field, time: float = 0.0, name: str = "") -> None:
    header = dict(f.grid.header(), time=float(time), name=name)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(f.data, dtype="<f8").tobytes())


def load_field(path) -> tuple[Field, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("utf-8"))
    grid = build_grid(header["N_x"], header["N_v"], header["L_x"], header["V_max"])
    payload = np.frombuffer(raw[nl + 1 :], dtype="<f8")
    if payload.size != grid.N_x * grid.N_v:
        raise ValueError(f"{path}: payload has {payload.size} values, expected {grid.N_x * grid.N_v}")
    return Field(grid, payload.reshape(grid.shape)), header
