"""Initial densities and random smooth test fields."""

from __future__ import annotations

import numpy as np

from .kolmogorov import SourceSpec
from .phase_grid import Field, PhaseGrid, Trajectory, integrate

N_IMAGES = 4


def _periodic_gaussian(x: np.ndarray, x0: float, sigma: float, L: float) -> np.ndarray:
    out = np.zeros_like(x)
    for n in range(-N_IMAGES, N_IMAGES + 1):
        out += np.exp(-((x - x0 + n * L) ** 2) / (2.0 * sigma**2))
    return out


def _normalise(grid: PhaseGrid, data: np.ndarray) -> Field:
    f = Field(grid, data)
    return f * (1.0 / integrate(f))


def gaussian(grid: PhaseGrid, sigma_x: float = 1.0, sigma_v: float = 1.0, x0: float | None = None, v0: float = 0.0) -> Field:
    """Periodised Gaussian in x times a Gaussian in v, unit mass on the grid."""
    if sigma_x <= 0 or sigma_v <= 0:
        raise ValueError("gaussian widths must be positive")
    x0 = 0.5 * grid.L_x if x0 is None else x0
    X, V = grid.mesh
    return _normalise(grid, _periodic_gaussian(X, x0, sigma_x, grid.L_x) * np.exp(-((V - v0) ** 2) / (2.0 * sigma_v**2)))


def double_bump(
    grid: PhaseGrid, separation: float | None = None, sigma_x: float = 0.6, sigma_v: float = 1.0, v_shift: float = 1.0
) -> Field:
    """Equal-weight mixture of two Gaussians placed symmetrically about (L_x/2, 0)."""
    if sigma_x <= 0 or sigma_v <= 0:
        raise ValueError("double_bump widths must be positive")
    sep = 0.25 * grid.L_x if separation is None else separation
    X, V = grid.mesh
    c = 0.5 * grid.L_x
    data = np.zeros(grid.shape)
    for sgn in (-1.0, 1.0):
        data += _periodic_gaussian(X, c + 0.5 * sgn * sep, sigma_x, grid.L_x) * np.exp(
            -((V - sgn * v_shift) ** 2) / (2.0 * sigma_v**2)
        )
    return _normalise(grid, data)


def band_limited_field(grid: PhaseGrid, rng: np.random.Generator, k_max: int = 6) -> Field:
    """Random real trigonometric polynomial with |kx|, |kv| <= k_max wavenumbers."""
    spec = np.zeros(grid.shape, dtype=complex)
    kx = np.r_[0 : k_max + 1, -k_max:0]
    ix = kx % grid.N_x
    iv = kx % grid.N_v
    coeffs = rng.normal(size=(kx.size, kx.size)) + 1j * rng.normal(size=(kx.size, kx.size))
    spec[np.ix_(ix, iv)] = coeffs
    data = np.fft.ifft2(spec).real
    return Field(grid, data / np.max(np.abs(data)))


def random_smooth_field(grid: PhaseGrid, rng: np.random.Generator, k_max: int = 4, sigma_v: float = 1.0) -> Field:
    """Smooth random field: low x-harmonics times low-degree polynomials in v under a Gaussian envelope."""
    X, V = grid.mesh
    data = np.zeros(grid.shape)
    for k in range(-k_max, k_max + 1):
        for j in range(3):
            amp = rng.normal() / (1.0 + k * k) / (1.0 + j)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            data += amp * np.cos(2.0 * np.pi * k * X / grid.L_x + phase) * (V / sigma_v) ** j
    return Field(grid, data * np.exp(-(V**2) / (2.0 * sigma_v**2)))


def random_source(
    grid: PhaseGrid, times: np.ndarray, rng: np.random.Generator, k_max: int = 4, sigma_v: float = 1.0
) -> SourceSpec:
    """Smooth-in-time random source h1 + d_v h2 sampled on ``times``."""
    a, b, c, d = (random_smooth_field(grid, rng, k_max, sigma_v).data for _ in range(4))
    w1, w2 = rng.uniform(0.5, 3.0, 2)
    tt = np.asarray(times, dtype=float)[:, None, None]
    h1 = np.cos(w1 * tt) * a + np.sin(w1 * tt) * b
    h2 = np.cos(w2 * tt) * c + tt * d
    return SourceSpec(Trajectory(grid, times, h1), Trajectory(grid, times, h2[:, None]))
