"""YAML run configuration.

Schema (every section optional; defaults shown)::

    grid:        {N_x: 128, N_v: 128, L_x: 6.283185307179586, V_max: 8.0}
    time:        {T: 0.5, N_t: 256}
    norms:       {s: 3}
    model:       {name: zero, params: {}, epsilon: 0.0, delta: 0.0}
    init:        {m0_kind: gaussian, m0_params: {}, path: null}
    fixed_point: {tol_fixed_point: 1.0e-8, max_iter: 50}
    certificate: {L_star: 0.5, sweep: false, eps_range: [1.0e-3, 1.0], delta_range: [1.0e-3, 1.0], n_points: 5}
    output:      {dir: out, save_trajectories: true}
    seed: 0
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import initial_data
from .fixed_point import PicardConfig
from .hamiltonians import BUILTINS, HamiltonianSpec, builtin
from .phase_grid import Field, PhaseGrid, build_grid, load_field


class ConfigError(ValueError):
    pass


def _require(cond: bool, key: str, constraint: str, value):
    if not cond:
        raise ConfigError(f"{key}: {constraint} (got {value!r})")


@dataclass(frozen=True)
class GridConfig:
    N_x: int = 128
    N_v: int = 128
    L_x: float = 2.0 * math.pi
    V_max: float = 8.0


@dataclass(frozen=True)
class TimeConfig:
    T: float = 0.5
    N_t: int = 256


@dataclass(frozen=True)
class NormConfig:
    s: int = 3


@dataclass(frozen=True)
class ModelConfig:
    name: str = "zero"
    params: dict = field(default_factory=dict)
    epsilon: float = 0.0
    delta: float = 0.0


@dataclass(frozen=True)
class InitConfig:
    m0_kind: str = "gaussian"
    m0_params: dict = field(default_factory=dict)
    path: str | None = None


@dataclass(frozen=True)
class FixedPointConfig:
    tol_fixed_point: float = 1e-8
    max_iter: int = 50


@dataclass(frozen=True)
class CertificateConfig:
    L_star: float = 0.5
    sweep: bool = False
    eps_range: tuple = (1e-3, 1.0)
    delta_range: tuple = (1e-3, 1.0)
    n_points: int = 5


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    save_trajectories: bool = True


SECTIONS = {
    "grid": GridConfig,
    "time": TimeConfig,
    "norms": NormConfig,
    "model": ModelConfig,
    "init": InitConfig,
    "fixed_point": FixedPointConfig,
    "certificate": CertificateConfig,
    "output": OutputConfig,
}


@dataclass(frozen=True)
class SolverConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    norms: NormConfig = field(default_factory=NormConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    init: InitConfig = field(default_factory=InitConfig)
    fixed_point: FixedPointConfig = field(default_factory=FixedPointConfig)
    certificate: CertificateConfig = field(default_factory=CertificateConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        g, t = self.grid, self.time
        for key in ("N_x", "N_v"):
            n = getattr(g, key)
            _require(isinstance(n, int) and n >= 8 and n & (n - 1) == 0, f"grid.{key}", "power of two ≥ 8", n)
        _require(g.L_x > 0, "grid.L_x", "L_x > 0", g.L_x)
        _require(g.V_max > 0, "grid.V_max", "V_max > 0", g.V_max)
        _require(t.T > 0, "time.T", "T > 0", t.T)
        _require(isinstance(t.N_t, int) and t.N_t >= 2, "time.N_t", "N_t ≥ 2", t.N_t)
        _require(isinstance(self.norms.s, int) and 0 <= self.norms.s <= 4, "norms.s", "0 ≤ s ≤ 4", self.norms.s)
        m = self.model
        _require(m.name in BUILTINS, "model.name", f"one of {sorted(BUILTINS)}", m.name)
        _require(m.epsilon >= 0, "model.epsilon", "epsilon ≥ 0", m.epsilon)
        _require(m.delta >= 0, "model.delta", "delta ≥ 0", m.delta)
        i = self.init
        _require(i.m0_kind in ("gaussian", "double_bump", "file"), "init.m0_kind", "gaussian, double_bump or file", i.m0_kind)
        if i.m0_kind == "file":
            _require(bool(i.path), "init.path", "required when m0_kind = file", i.path)
        fp = self.fixed_point
        _require(fp.tol_fixed_point > 0, "fixed_point.tol_fixed_point", "tol > 0", fp.tol_fixed_point)
        _require(isinstance(fp.max_iter, int) and fp.max_iter >= 1, "fixed_point.max_iter", "max_iter ≥ 1", fp.max_iter)
        c = self.certificate
        _require(c.L_star > 0, "certificate.L_star", "L_star > 0", c.L_star)
        for key in ("eps_range", "delta_range"):
            r = getattr(c, key)
            _require(len(r) == 2 and 0 < r[0] <= r[1], f"certificate.{key}", "0 < lo ≤ hi", r)
        _require(c.n_points >= 1, "certificate.n_points", "n_points ≥ 1", c.n_points)

    # -- builders ---------------------------------------------------------

    def build_grid(self) -> PhaseGrid:
        g = self.grid
        return build_grid(g.N_x, g.N_v, g.L_x, g.V_max)

    def build_spec(self) -> HamiltonianSpec:
        m = self.model
        params = dict(m.params)
        params.setdefault("s", self.norms.s)
        if m.name == "zero":
            params = {}
        return builtin(m.name, params, epsilon=m.epsilon, delta=m.delta)

    def build_m0(self, grid: PhaseGrid | None = None) -> Field:
        grid = grid or self.build_grid()
        i = self.init
        if i.m0_kind == "gaussian":
            return initial_data.gaussian(grid, **i.m0_params)
        if i.m0_kind == "double_bump":
            return initial_data.double_bump(grid, **i.m0_params)
        f, _ = load_field(i.path)
        if f.grid != grid:
            raise ConfigError(f"init.path: stored grid {f.grid.header()} differs from configured grid")
        return f

    def picard(self) -> PicardConfig:
        return PicardConfig(
            T=self.time.T,
            N_t=self.time.N_t,
            s=self.norms.s,
            tol_fixed_point=self.fixed_point.tol_fixed_point,
            max_iter=self.fixed_point.max_iter,
        )

    def certificate_pairs(self) -> list[tuple[float, float]]:
        c = self.certificate
        if not c.sweep:
            return [(self.model.epsilon, self.model.delta)]
        eps = np.geomspace(*c.eps_range, c.n_points)
        dels = np.geomspace(*c.delta_range, c.n_points)
        return [(float(e), float(d)) for e in eps for d in dels]

    def to_dict(self) -> dict:
        return asdict(self)


def config_from_dict(raw: dict | None) -> SolverConfig:
    raw = dict(raw or {})
    kwargs = {}
    for key, value in raw.items():
        if key == "seed":
            _require(isinstance(value, int), "seed", "integer", value)
            kwargs["seed"] = value
            continue
        if key not in SECTIONS:
            raise ConfigError(f"{key}: unknown section; expected one of {sorted(SECTIONS) + ['seed']}")
        cls = SECTIONS[key]
        if key == "model" and isinstance(value, str):
            value = {"name": value}
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a mapping (got {value!r})")
        allowed = {f.name: f for f in fields(cls)}
        sect = {}
        for k, v in value.items():
            if k not in allowed:
                raise ConfigError(f"{key}.{k}: unknown key; expected one of {sorted(allowed)}")
            default = allowed[k].default
            if isinstance(default, float) and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            if isinstance(default, tuple):
                v = tuple(float(x) for x in v)
            if k in ("params", "m0_params"):
                if not isinstance(v, dict):
                    raise ConfigError(f"{key}.{k}: expected a mapping (got {v!r})")
                v = dict(v)
            sect[k] = v
        kwargs[key] = cls(**sect)
    return SolverConfig(**kwargs)


def load_config(path) -> SolverConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    with open(p) as fh:
        raw = yaml.safe_load(fh)
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(raw)
