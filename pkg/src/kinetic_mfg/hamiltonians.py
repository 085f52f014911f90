"""Pointwise coupling operators H[m, p], J[m, p] = m D_pH and G[mu].

A model is a bundle of vectorised callables plus the monotone majorants
F(T, y) and K(T, y) consumed by the smallness certificate. Built-ins:

* ``congestion``           H = p^2 / (a + phi_a(m)),  g(z, mu) = mu
* ``separable_quadratic``  H = p^2 / 2 - c m,          g(z, mu) = mu
* ``zero``                 everything vanishes

Custom models are built directly with :class:`HamiltonianSpec`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .phase_grid import Field, VecField

Array = np.ndarray


class ModelError(ValueError):
    pass


def _zero_bound(T, y):
    return 0.0 * np.asarray(T, dtype=float) * np.asarray(y, dtype=float)


@dataclass(frozen=True)
class HamiltonianSpec:
    name: str
    eval_H: Callable
    eval_DpH: Callable
    eval_g: Callable
    epsilon: float = 0.0
    delta: float = 0.0
    params: dict = field(default_factory=dict)
    bound_F: Callable = _zero_bound
    bound_K: Callable = _zero_bound
    # r -> sup |grad_(m,p) H| over |m|, |p| <= r; None when unknown
    c1_bound: Callable | None = None

    def __post_init__(self):
        for nm in ("epsilon", "delta"):
            val = getattr(self, nm)
            if not np.isfinite(val) or val < 0:
                raise ModelError(f"{nm} ≥ 0 required (got {val})")

    def with_coupling(self, epsilon: float, delta: float) -> "HamiltonianSpec":
        return replace(self, epsilon=float(epsilon), delta=float(delta))

    def validate(self, n_samples: int = 100, seed: int = 0) -> None:
        """Sampled checks: H(t,z,0,0) = 0, g(z,0) = 0, monotone majorants."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(0, 2, n_samples)
        x = rng.uniform(0, 2 * np.pi, n_samples)
        v = rng.uniform(-8, 8, n_samples)
        zero = np.zeros(n_samples)
        h0 = np.asarray(self.eval_H(t, x, v, zero, zero), dtype=float)
        if np.max(np.abs(h0)) > 1e-14:
            raise ModelError(f"model {self.name!r}: H(t, z, 0, 0) is not zero")
        g0 = np.asarray(self.eval_g(x, v, zero), dtype=float)
        if np.max(np.abs(g0)) > 1e-14:
            raise ModelError(f"model {self.name!r}: g(z, 0) is not zero")
        check_monotone(self.bound_F, "bound_F", rng=rng)
        check_monotone(self.bound_K, "bound_K", rng=rng)


def check_monotone(fn: Callable, label: str = "bound", n_samples: int = 200, rng=None) -> None:
    """Raise ModelError unless fn(T, y) is non-decreasing in both arguments on samples."""
    rng = np.random.default_rng(0) if rng is None else rng
    T = np.sort(rng.uniform(0, 5, n_samples))
    y = np.sort(10.0 ** rng.uniform(-6, 4, n_samples))
    Tg, yg = np.meshgrid(T, y, indexing="ij")
    vals = np.broadcast_to(np.asarray(fn(Tg, yg), dtype=float), Tg.shape)
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise ModelError(f"{label} must be finite and non-negative")
    tol = 1e-12 * (1.0 + np.abs(vals))
    if np.any(np.diff(vals, axis=0) < -tol[1:]) or np.any(np.diff(vals, axis=1) < -tol[:, 1:]):
        raise ModelError(f"{label} is not non-decreasing in both variables")


def _finite_or_raise(data: Array, grid, what: str, model: str) -> Array:
    data = np.asarray(data, dtype=float)
    bad = ~np.isfinite(data)
    if bad.any():
        idx = np.argwhere(bad)[0]
        i, j = int(idx[-2]), int(idx[-1])
        raise ModelError(
            f"model {model!r}: non-finite {what} at node (i={i}, j={j}), "
            f"x={grid.x_nodes[i]:.6g}, v={grid.v_nodes[j]:.6g}"
        )
    return data


def _same_grid(m: Field, p: VecField):
    if m.grid != p.grid:
        raise ModelError("m and p live on different grids")
    if p.d != 1:
        raise ModelError(f"only d = 1 momenta are supported (got d = {p.d})")


def eval_H_field(spec: HamiltonianSpec, t: float, m: Field, p: VecField) -> Field:
    _same_grid(m, p)
    X, V = m.grid.mesh
    out = spec.eval_H(t, X, V, m.data, p.data[0])
    out = np.broadcast_to(np.asarray(out, dtype=float), m.grid.shape)
    return Field(m.grid, _finite_or_raise(out, m.grid, "H", spec.name))


def eval_J_field(spec: HamiltonianSpec, t: float, m: Field, p: VecField) -> VecField:
    _same_grid(m, p)
    X, V = m.grid.mesh
    dph = np.broadcast_to(np.asarray(spec.eval_DpH(t, X, V, m.data, p.data[0]), dtype=float), m.grid.shape)
    dph = _finite_or_raise(dph, m.grid, "D_pH", spec.name)
    return VecField((Field(m.grid, m.data * dph),))


def eval_G_field(spec: HamiltonianSpec, mu: Field) -> Field:
    X, V = mu.grid.mesh
    out = np.broadcast_to(np.asarray(spec.eval_g(X, V, mu.data), dtype=float), mu.grid.shape)
    return Field(mu.grid, _finite_or_raise(out, mu.grid, "g", spec.name))


# ---------------------------------------------------------------------------
# trajectory-level evaluation used by the fixed-point map


def eval_H_frames(spec: HamiltonianSpec, grid, times: Array, m: Array, p: Array) -> Array:
    X, V = grid.mesh
    tt = np.asarray(times, dtype=float)[:, None, None]
    out = np.broadcast_to(np.asarray(spec.eval_H(tt, X, V, m, p), dtype=float), m.shape)
    return _finite_or_raise(out, grid, "H", spec.name)


def eval_J_frames(spec: HamiltonianSpec, grid, times: Array, m: Array, p: Array) -> Array:
    X, V = grid.mesh
    tt = np.asarray(times, dtype=float)[:, None, None]
    dph = np.broadcast_to(np.asarray(spec.eval_DpH(tt, X, V, m, p), dtype=float), m.shape)
    return m * _finite_or_raise(dph, grid, "D_pH", spec.name)


# ---------------------------------------------------------------------------
# built-ins


def phi_blend(omega, a: float):
    """phi_a(w) = w for w >= 0 and (a/2)(exp(2w/a) - 1) below; C^1 at 0, > -a/2."""
    omega = np.asarray(omega, dtype=float)
    neg = np.minimum(omega, 0.0)
    return np.where(omega >= 0, omega, 0.5 * a * np.expm1(2.0 * neg / a))


def phi_blend_prime(omega, a: float):
    omega = np.asarray(omega, dtype=float)
    return np.where(omega >= 0, 1.0, np.exp(2.0 * np.minimum(omega, 0.0) / a))


def _sobolev_majorant(T, y, s: int, c_F: float, c_sob: float, phi: Callable):
    """c_F (1+T)^{2s} (1+y) Phi(c_sob sqrt(y))^2, monotone when Phi is."""
    T = np.asarray(T, dtype=float)
    y = np.asarray(y, dtype=float)
    r = c_sob * np.sqrt(np.maximum(y, 0.0))
    return c_F * (1.0 + T) ** (2 * s) * (1.0 + y) * phi(r) ** 2


def _terminal_identity_K(T, y):
    # g = mu: |G[mu]|^2 = |mu|^2 <= y, Lipschitz factor 1
    return 1.0 + 0.0 * np.asarray(T, dtype=float) + np.asarray(y, dtype=float)


def _congestion(params: dict) -> dict:
    a = float(params.get("a", 1.0))
    if not a > 0:
        raise ModelError(f"congestion parameter a > 0 required (got {a})")
    s = int(params.get("s", 3))
    c_F = float(params.get("c_F", 1.0))
    c_sob = float(params.get("c_sob", 1.0))

    def H(t, x, v, m, p):
        return p * p / (a + phi_blend(m, a))

    def DpH(t, x, v, m, p):
        return 2.0 * p / (a + phi_blend(m, a))

    def Phi(r):
        # polynomial sup-bound of H, D_pH and their first two derivatives on |(m,p)| <= r,
        # using a + phi_a >= a/2
        return (1 + 2 * r**2 / a + 4 * r / a + 4 * r**2 / a**2 + 4 / a + 8 * r / a**2 + 24 * r**2 / a**3) * (1 + r)

    def c1(r):
        return float(np.hypot(4 * r / a, 4 * r * r / (a * a)))

    return dict(
        eval_H=H,
        eval_DpH=DpH,
        eval_g=lambda x, v, mu: mu,
        params={"a": a, "s": s, "c_F": c_F, "c_sob": c_sob},
        bound_F=lambda T, y: _sobolev_majorant(T, y, s, c_F, c_sob, Phi),
        bound_K=_terminal_identity_K,
        c1_bound=c1,
    )


def _separable(params: dict) -> dict:
    c = float(params.get("c", 1.0))
    s = int(params.get("s", 3))
    c_F = float(params.get("c_F", 1.0))
    c_sob = float(params.get("c_sob", 1.0))

    def H(t, x, v, m, p):
        return 0.5 * p * p - c * m

    def DpH(t, x, v, m, p):
        return p + 0.0 * m

    return dict(
        eval_H=H,
        eval_DpH=DpH,
        eval_g=lambda x, v, mu: mu,
        params={"c": c, "s": s, "c_F": c_F, "c_sob": c_sob},
        bound_F=lambda T, y: _sobolev_majorant(T, y, s, c_F, c_sob, lambda r: (1 + abs(c)) * (1 + r) ** 2),
        bound_K=_terminal_identity_K,
        c1_bound=lambda r: float(np.hypot(r, c)),
    )


def _zero(params: dict) -> dict:
    def nil(*args):
        return 0.0 * args[-1]

    return dict(
        eval_H=nil,
        eval_DpH=nil,
        eval_g=nil,
        params={},
        bound_F=_zero_bound,
        bound_K=_zero_bound,
        c1_bound=lambda r: 0.0,
    )


BUILTINS = {"congestion": _congestion, "separable_quadratic": _separable, "zero": _zero}


def builtin(name: str, params: dict | None = None, epsilon: float = 0.0, delta: float = 0.0) -> HamiltonianSpec:
    if name not in BUILTINS:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(BUILTINS)}")
    parts = BUILTINS[name](dict(params or {}))
    spec = HamiltonianSpec(name=name, epsilon=float(epsilon), delta=float(delta), **parts)
    spec.validate()
    return spec
