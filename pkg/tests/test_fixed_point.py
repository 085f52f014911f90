import math
from dataclasses import replace

import numpy as np
import pytest

from kinetic_mfg.fixed_point import (
    Certificate,
    CertificateError,
    ConvergenceError,
    DivergenceError,
    IterationReport,
    MFGState,
    PicardConfig,
    apply_M,
    check_smallness,
    compute_K_star,
    free_state,
    linear_state,
    picard_solve,
    residual_check,
    smallness_lhs,
    write_iteration_reports,
)
from kinetic_mfg.hamiltonians import builtin
from kinetic_mfg.initial_data import double_bump, gaussian, random_smooth_field
from kinetic_mfg.kolmogorov import solve_backward, solve_forward
from kinetic_mfg.phase_grid import Field, Trajectory, build_grid

GRID = build_grid(32, 64, 2 * np.pi, 8.0)
CFG = PicardConfig(T=0.5, N_t=32, s=3)
M0 = gaussian(GRID)


def linear_spec(F=lambda T, y: y, K=lambda T, y: 1.0 + 0.0 * y, eps=0.1, delta=0.1):
    return replace(builtin("zero"), bound_F=F, bound_K=K, epsilon=eps, delta=delta)


def random_state(seed):
    rng = np.random.default_rng(seed)
    m = Trajectory(GRID, CFG.times, np.stack([random_smooth_field(GRID, rng).data for _ in CFG.times]))
    z = MFGState.zeros(GRID, CFG.T, CFG.N_t)
    return MFGState(m, m, z.dvm, z.dvm)


# ---------------------------------------------------------------- the map


def test_zero_model_map_is_free_evolution():
    spec = builtin("zero", epsilon=0.3, delta=0.2)
    out = apply_M(random_state(0), M0, spec, CFG)
    m_free, _ = solve_forward(M0, None, CFG.T, CFG.N_t)
    np.testing.assert_array_equal(out.m.data, m_free.data)
    assert np.all(out.u.data == 0.0)


def test_uncoupled_map_is_constant():
    spec = builtin("congestion")
    a = apply_M(random_state(1), M0, spec, CFG)
    b = apply_M(random_state(2), M0, spec, CFG)
    np.testing.assert_array_equal(a.m.data, b.m.data)
    np.testing.assert_array_equal(a.u.data, b.u.data)
    again = apply_M(a, M0, spec, CFG)
    assert (again - a).xs_norm(CFG.s) == 0.0


def test_map_from_zero_state_composes_solver_calls():
    spec = builtin("congestion", epsilon=0.05, delta=0.05)
    out = apply_M(MFGState.zeros(GRID, CFG.T, CFG.N_t), M0, spec, CFG)
    m_ref, _ = solve_forward(M0, None, CFG.T, CFG.N_t)
    u_ref, _ = solve_backward(Field.constant(GRID, 0.0), None, CFG.T, CFG.N_t)
    np.testing.assert_allclose(out.m.data, m_ref.data, atol=1e-15)
    np.testing.assert_allclose(out.u.data, u_ref.data, atol=1e-15)


def test_state_grid_mismatch():
    other = MFGState.zeros(GRID, CFG.T, 16)
    with pytest.raises(ValueError, match="time axis"):
        apply_M(other, M0, builtin("zero"), CFG)


# ---------------------------------------------------------------- Picard


def test_zero_model_converges_in_two_iterations():
    _, reps = picard_solve(M0, builtin("zero"), CFG)
    assert len(reps) == 2 and reps[1].xs_diff == 0.0


@pytest.fixture(scope="module")
def congestion_run():
    spec = builtin("congestion", epsilon=0.05, delta=0.05)
    return spec, *picard_solve(M0, spec, CFG)


def test_congestion_contracts(congestion_run):
    spec, state, reps = congestion_run
    assert reps[-1].xs_diff < CFG.tol_fixed_point and len(reps) <= 20
    assert all(r.ratio < 1 for r in reps[1:])
    assert all(b.xs_diff < a.xs_diff for a, b in zip(reps, reps[1:]))
    assert max(r.mass_drift for r in reps) <= 1e-10
    assert reps[-1].min_m >= -1e-6
    step = (apply_M(state, M0, spec, CFG) - state).xs_norm(CFG.s)
    assert step <= 2 * CFG.tol_fixed_point


def alternate_start(grid, cfg):
    X, V = grid.mesh
    u_T = Field(grid, 0.2 * np.cos(2 * np.pi * X / grid.L_x) * np.exp(-(V**2) / 2))
    return linear_state(double_bump(grid), u_T, cfg)


def test_free_start_is_first_zero_iterate(congestion_run):
    spec = congestion_run[0]
    first = apply_M(MFGState.zeros(GRID, CFG.T, CFG.N_t), M0, spec, CFG)
    assert (first - free_state(M0, CFG)).xs_norm(CFG.s) == 0.0


def test_two_starts_agree(congestion_run):
    spec, state, _ = congestion_run
    start = alternate_start(GRID, CFG)
    assert (start - state).xs_norm(CFG.s) > 1.0
    other, _ = picard_solve(M0, spec, CFG, start=start)
    assert (other - state).xs_norm(CFG.s) <= 1e-6


def test_divergence_guard():
    spec = builtin("congestion", epsilon=5.0, delta=5.0)
    with pytest.raises(DivergenceError, match="divergence guard") as exc:
        picard_solve(M0, spec, CFG)
    assert len(exc.value.ratios) >= 4


def test_non_convergence_carries_history():
    spec = builtin("congestion", epsilon=0.05, delta=0.05)
    with pytest.raises(ConvergenceError) as exc:
        picard_solve(M0, spec, replace(CFG, max_iter=2))
    assert len(exc.value.ratios) == 2 and not isinstance(exc.value, DivergenceError)


def test_probability_precondition():
    with pytest.raises(ValueError, match="unit mass"):
        picard_solve(M0 * 2.0, builtin("zero"), CFG)
    with pytest.raises(ValueError, match="tail"):
        picard_solve(Field.constant(GRID, 1.0 / (GRID.L_x * 2 * GRID.V_max)), builtin("zero"), CFG)


def test_contraction_consistency_when_certified():
    spec = builtin("congestion", epsilon=1e-4, delta=1e-4)
    cert = check_smallness(spec, CFG.T, 0.5)
    assert cert.feasible and cert.contraction
    _, reps = picard_solve(M0, spec, CFG)
    assert all(r.ratio <= cert.lipschitz_bound + 0.1 for r in reps[1:])


def test_iteration_csv(tmp_path, congestion_run):
    write_iteration_reports(tmp_path / "it.csv", congestion_run[2])
    lines = (tmp_path / "it.csv").read_text().splitlines()
    assert lines[0] == ",".join(IterationReport.CSV_HEADER)
    assert lines[1].split(",")[2] == "nan"


# ---------------------------------------------------------------- residuals


def _zero_residual(N_t):
    cfg = replace(CFG, N_t=N_t)
    spec = builtin("zero")
    state, _ = picard_solve(M0, spec, cfg)
    return residual_check(state, M0, spec, cfg)


def test_free_evolution_residual_is_second_order():
    r1, r2 = _zero_residual(32), _zero_residual(64)
    assert 3.0 < r1[0] / r2[0] < 5.0
    assert r1[1] == 0.0


def test_fixed_point_residual_is_calibrated(congestion_run):
    spec, state, _ = congestion_run
    res_m, res_u = residual_check(state, M0, spec, CFG)
    linear = _zero_residual(CFG.N_t)[0]
    assert res_m <= 10 * linear and res_u <= 10 * linear


def test_residual_detects_perturbation(congestion_run):
    spec, state, _ = congestion_run
    base = residual_check(state, M0, spec, CFG)[1]
    bump = 1e-3 * np.sin(2 * np.pi * GRID.mesh[0] / GRID.L_x)
    u = Trajectory(GRID, state.times, state.u.data + bump)
    bumped = residual_check(replace(state, u=u), M0, spec, CFG)[1]
    assert bumped >= 10 * base


# ---------------------------------------------------------------- certificate


def test_certificate_hand_example():
    cert = check_smallness(linear_spec(), 1.0, 0.4)
    assert cert.feasible and math.isclose(cert.lhs, 0.084)
    assert math.isclose(cert.lipschitz_bound, math.sqrt(0.8))
    assert abs(cert.K_star - 1.975) <= 1e-6
    assert not check_smallness(linear_spec(eps=1.0), 1.0, 0.4).feasible
    assert math.isclose(smallness_lhs(linear_spec(eps=1.0), 1.0, 0.4), 6.42)


def test_certificate_uncoupled_always_feasible():
    for L in (1e-6, 0.3, 10.0):
        cert = check_smallness(builtin("zero"), 0.5, L)
        assert cert.feasible and cert.K_star == math.inf
        assert math.isclose(cert.lipschitz_bound, math.sqrt(1.5 * L))
        assert cert.contraction == (L < 1 / 1.5)


def test_k_star_bracketing():
    spec = linear_spec()
    k = compute_K_star(spec, 1.0, 0.4)
    lhs = lambda K: smallness_lhs(spec, 1.0, 0.4 + K)
    assert lhs(k - 1e-6) < 0.4 <= lhs(k + 1e-6)


def test_k_star_requires_feasibility():
    with pytest.raises(CertificateError):
        compute_K_star(linear_spec(eps=1.0), 1.0, 0.4)


def test_monotone_feasibility_grid():
    vals = np.linspace(0.02, 0.3, 5)
    feas = np.array([[check_smallness(linear_spec(eps=e, delta=d), 1.0, 0.4).feasible for d in vals] for e in vals])
    for i in range(5):
        for j in range(5):
            if feas[i, j]:
                assert feas[: i + 1, : j + 1].all()


def test_non_monotone_bound_rejected():
    with pytest.raises(CertificateError):
        check_smallness(linear_spec(F=lambda T, y: np.sin(y) + 1.0), 1.0, 0.4)
    with pytest.raises(CertificateError):
        check_smallness(linear_spec(), 1.0, -1.0)


def test_certificate_text_has_all_fields():
    text = check_smallness(linear_spec(), 1.0, 0.4).to_text()
    for name in ("epsilon", "delta", "T", "L_star", "feasible", "K_star", "lipschitz_bound", "contraction"):
        assert f"{name} = " in text
    assert isinstance(Certificate.CSV_HEADER, tuple)
