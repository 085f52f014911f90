"""Invariant suites behind ``mfg verify``.

Each suite returns a list of :class:`Check` rows; a suite passes when every
row does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import initial_data
from .config import SolverConfig
from .fixed_point import ConvergenceError, picard_solve, residual_check
from .kolmogorov import (
    energy_report,
    fundamental_kernel,
    oracle_convolve,
    propagate_free,
    solve_backward,
    solve_forward,
)
from .phase_grid import deriv_v, deriv_x, l2_norm, sobolev_norm, time_axis, trapezoid
from .transport import MultiIndex, apply_gamma, apply_gamma_beta, flow_compose, gamma_norm

BETAS = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    relation: str = "<="

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        if self.relation == "<=":
            return self.value <= self.threshold
        if self.relation == ">=":
            return self.value >= self.threshold
        lo, hi = self.threshold
        return lo <= self.value <= hi

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        thr = f"[{self.threshold[0]}, {self.threshold[1]}]" if self.relation == "in" else f"{self.threshold:g}"
        return f"{status}  {self.name:<48s} {self.value:12.4e}  {self.relation} {thr}"


def format_table(checks) -> str:
    return "\n".join(c.line() for c in checks)


# ---------------------------------------------------------------------------
# kernel


def kernel_moments(t: float, n: int = 1201, width: float = 9.0) -> dict:
    """Mass and second moments of fundamental_kernel by trapezoid quadrature on a box."""
    sx, sv = math.sqrt(t**3 / 3.0), math.sqrt(t)
    x = np.linspace(-width * sx, width * sx, n)
    v = np.linspace(-width * sv, width * sv, n)
    X, V = np.meshgrid(x, v, indexing="ij")
    K = fundamental_kernel(t, X, V)

    def quad(f):
        return trapezoid(trapezoid(f, v, axis=1), x)

    mass = quad(K)
    mx, mv = quad(X * K) / mass, quad(V * K) / mass
    return {
        "mass": mass,
        "var_x": quad((X - mx) ** 2 * K) / mass,
        "var_v": quad((V - mv) ** 2 * K) / mass,
        "cov": quad((X - mx) * (V - mv) * K) / mass,
    }


def oracle_errors(cfg: SolverConfig, n_steps=(128, 256, 512)) -> list[float]:
    grid = cfg.build_grid()
    m0 = cfg.build_m0(grid)
    ref = oracle_convolve(m0, cfg.time.T)
    return [l2_norm(propagate_free(m0, cfg.time.T, n) - ref) for n in n_steps]


def suite_kernel(cfg: SolverConfig, rng) -> list[Check]:
    out = []
    for t in (0.25, 0.5, 1.0):
        mo = kernel_moments(t)
        out.append(Check(f"kernel mass t={t}", abs(mo["mass"] - 1.0), 1e-6))
        out.append(Check(f"Var(v) = t at t={t}", abs(mo["var_v"] - t), 1e-6))
        out.append(Check(f"Cov = t^2/2 at t={t}", abs(mo["cov"] - t**2 / 2), 1e-6))
        out.append(Check(f"Var(x) = t^3/3 at t={t}", abs(mo["var_x"] - t**3 / 3), 1e-6))
    errs = oracle_errors(cfg, (cfg.time.N_t, 2 * cfg.time.N_t))
    out.append(Check(f"solver vs oracle L2, N_t={cfg.time.N_t}", errs[0], 1e-4))
    out.append(Check("oracle error ratio under N_t doubling", errs[0] / errs[1], (3.5, 4.5), "in"))
    return out


# ---------------------------------------------------------------------------
# transport geometry


def windowed_field(grid, rng, k_max: int = 6):
    """x-band-limited random field under a narrow v-window, negligible at |v| = V_max."""
    return initial_data.random_smooth_field(grid, rng, k_max=k_max, sigma_v=0.5)


def flow_sobolev_gap(f, s: int, t: float) -> float:
    a = gamma_norm(f, s, t).full_norm
    return abs(a - sobolev_norm(flow_compose(f, t), s)) / a


def commutation_gap(f, beta: tuple, t: float, n_steps: int = 16) -> float:
    lhs = apply_gamma_beta(propagate_free(f, t, n_steps), MultiIndex(beta), t)
    rhs = propagate_free(deriv_v(deriv_x(f, beta[0]), beta[1]), t, n_steps)
    return l2_norm(lhs - rhs) / sobolev_norm(f, sum(beta))


def suite_gamma(cfg: SolverConfig, rng, n_fields: int = 10) -> list[Check]:
    grid = cfg.build_grid()
    fields = [windowed_field(grid, rng) for _ in range(n_fields)]
    flow = max(flow_sobolev_gap(f, s, t) for f in fields for s in (1, 2, 3) for t in (0.0, 0.5, 1.0))
    comm = max(commutation_gap(f, b, t) for f in fields[:3] for b in BETAS for t in (0.5, 1.0))
    swap = max(
        l2_norm(apply_gamma(apply_gamma(f, 1, 0.7), 2, 0.7) - apply_gamma(apply_gamma(f, 2, 0.7), 1, 0.7)) / l2_norm(f)
        for f in fields
    )
    return [
        Check("Gamma^s(t) = H^s after flow (rel)", flow, 1e-8),
        Check("gamma commutes with free flow (rel)", comm, 1e-8),
        Check("gamma_1 gamma_2 = gamma_2 gamma_1", swap, 1e-12),
    ]


# ---------------------------------------------------------------------------
# energy


def energy_gaps(w, dvw, src, s, backward=False) -> tuple[float, float]:
    reps = energy_report(w, dvw, src, s=s, backward=backward)
    return max(r.identity_gap for r in reps), min(r.bound_slack for r in reps)


def suite_energy(cfg: SolverConfig, rng, n_instances: int = 5) -> list[Check]:
    grid = cfg.build_grid()
    T, N_t = cfg.time.T, cfg.time.N_t
    times = time_axis(T, N_t)
    m0 = cfg.build_m0(grid)
    w, dvw = solve_forward(m0, None, T, N_t)
    out = [Check(f"identity gap, source-free, s={s}", energy_gaps(w, dvw, None, s)[0], 1e-6) for s in (0, 2)]
    gap = {0: 0.0, 2: 0.0}
    slack = math.inf
    for _ in range(n_instances):
        w0 = initial_data.random_smooth_field(grid, rng)
        src = initial_data.random_source(grid, times, rng)
        fw = solve_forward(w0, src, T, N_t)
        bw = solve_backward(w0, src, T, N_t)
        for s in (0, 2):
            for traj, back in ((fw, False), (bw, True)):
                g, sl = energy_gaps(*traj, src, s, backward=back)
                gap[s] = max(gap[s], g)
                slack = min(slack, sl)
    out += [Check(f"identity gap, random sources, s={s}", gap[s], 1e-6) for s in (0, 2)]
    out.append(Check("a-priori bound slack (min)", slack, -1e-6, ">="))
    return out


# ---------------------------------------------------------------------------
# convergence and conservation


def suite_convergence(cfg: SolverConfig, rng) -> list[Check]:
    errs = oracle_errors(cfg, (cfg.time.N_t // 2, cfg.time.N_t, 2 * cfg.time.N_t))
    out = [
        Check("Strang ratio N_t/2 -> N_t", errs[0] / errs[1], (3.5, 4.5), "in"),
        Check("Strang ratio N_t -> 2 N_t", errs[1] / errs[2], (3.5, 4.5), "in"),
    ]
    res = []
    for n in (cfg.time.N_t // 2, cfg.time.N_t):
        c = _with_steps(cfg, n)
        grid = c.build_grid()
        m0, spec, pc = c.build_m0(grid), c.build_spec(), c.picard()
        state, _ = picard_solve(m0, spec, pc)
        res.append(residual_check(state, m0, spec, pc))
    out.append(Check("FP residual ratio under N_t doubling", res[0][0] / res[1][0], (3.0, 5.0), "in"))
    if res[1][1] > 0:
        out.append(Check("HJB residual ratio under N_t doubling", res[0][1] / res[1][1], (3.0, 5.0), "in"))
    return out


def _with_steps(cfg: SolverConfig, N_t: int) -> SolverConfig:
    return replace(cfg, time=replace(cfg.time, N_t=N_t))


def suite_conservation(cfg: SolverConfig, rng) -> list[Check]:
    grid = cfg.build_grid()
    m0, spec, pc = cfg.build_m0(grid), cfg.build_spec(), cfg.picard()
    try:
        state, reports = picard_solve(m0, spec, pc)
    except ConvergenceError as exc:
        reports = exc.reports
        state = None
    out = [Check("max mass drift over iterates", max(r.mass_drift for r in reports), 1e-10)]
    if state is not None:
        out.append(Check("min m at fixed point", float(np.min(state.m.data)), -1e-6, ">="))
    else:
        out.append(Check("Picard converged", math.nan, 0.0))
    return out


SUITES = {
    "energy": suite_energy,
    "kernel": suite_kernel,
    "gamma": suite_gamma,
    "convergence": suite_convergence,
    "conservation": suite_conservation,
}


def run_suite(name: str, cfg: SolverConfig, seed: int | None = None) -> list[Check]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return SUITES[name](cfg, rng)
