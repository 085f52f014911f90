import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kinetic_mfg.initial_data import band_limited_field, random_smooth_field
from kinetic_mfg.phase_grid import Field, Trajectory, build_grid, deriv_v, deriv_x, l2_norm, sobolev_norm
from kinetic_mfg.transport import (
    GammaNormReport,
    MultiIndex,
    UnsupportedOrderError,
    apply_gamma,
    apply_gamma_beta,
    conversion_constant,
    flow_compose,
    gamma_inner_frames,
    gamma_norm,
    gamma_sq_frames,
    multi_indices,
    shear_norm,
    write_gamma_reports,
    xs_norm,
)
from kinetic_mfg.verify import commutation_gap, flow_sobolev_gap, windowed_field

GRID = build_grid(32, 128, 2 * np.pi, 8.0)


def test_gamma_examples():
    f = Field.from_function(GRID, lambda x, v: np.sin(x))
    assert np.max(np.abs(apply_gamma(f, 2, 0.0).data)) < 1e-12
    np.testing.assert_allclose(apply_gamma(f, 2, 1.0).data, np.cos(GRID.mesh[0]), atol=1e-12)
    with pytest.raises(ValueError):
        apply_gamma(f, 3, 0.0)


def test_gamma_2_of_v_is_one():
    # v is not periodic on the box; use a smooth bump whose v-derivative is known
    f = Field.from_function(GRID, lambda x, v: np.exp(-(v**2)))
    expected = -2 * GRID.mesh[1] * np.exp(-GRID.mesh[1] ** 2)
    np.testing.assert_allclose(apply_gamma(f, 2, 0.7).data, expected, atol=1e-10)


def test_multi_index_limits():
    assert [m.beta for m in multi_indices(2)] == [(0, 2), (1, 1), (2, 0)]
    with pytest.raises(UnsupportedOrderError):
        MultiIndex((3, 2))
    with pytest.raises(ValueError):
        MultiIndex((-1, 0))


def test_gamma_norm_at_zero_time_is_sobolev():
    f = band_limited_field(GRID, np.random.default_rng(3))
    for s in range(5):
        assert np.isclose(gamma_norm(f, s, 0.0).full_norm, sobolev_norm(f, s), rtol=1e-12)


def test_gamma_norm_of_constant():
    f = Field.constant(GRID, 3.0)
    rep = gamma_norm(f, 2, 0.4)
    assert rep.seminorm == 0.0 and np.isclose(rep.full_norm, l2_norm(f))


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(0, 2))
def test_full_norm_splits_into_seminorm_and_l2(seed, s, t):
    f = band_limited_field(GRID, np.random.default_rng(seed))
    rep = gamma_norm(f, s, t)
    assert np.isclose(rep.full_norm**2, rep.seminorm**2 + l2_norm(f) ** 2, rtol=1e-12)
    by_beta = sum(v**2 for v in rep.per_beta.values())
    assert np.isclose(by_beta, rep.seminorm**2, rtol=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0, 1.5))
def test_per_beta_matches_applied_fields(seed, t):
    f = band_limited_field(GRID, np.random.default_rng(seed), k_max=4)
    rep = gamma_norm(f, 2, t)
    for mi in multi_indices(2):
        assert np.isclose(rep.per_beta[mi], l2_norm(apply_gamma_beta(f, mi, t)), rtol=1e-10, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_gammas_commute(seed):
    f = band_limited_field(GRID, np.random.default_rng(seed))
    a = apply_gamma(apply_gamma(f, 1, 0.3), 2, 0.3)
    b = apply_gamma(apply_gamma(f, 2, 0.3), 1, 0.3)
    assert l2_norm(a - b) <= 1e-12 * max(1.0, l2_norm(a))


def test_flow_compose_single_mode():
    f = Field.from_function(GRID, lambda x, v: np.sin(x))
    X, V = GRID.mesh
    np.testing.assert_allclose(flow_compose(f, 0.8).data, np.sin(X + 0.8 * V), atol=1e-12)
    np.testing.assert_array_equal(flow_compose(f, 0.0).data, f.data)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]), st.sampled_from([0.0, 0.5, 1.0]))
def test_flow_sobolev_identity(seed, s, t):
    f = windowed_field(GRID, np.random.default_rng(seed))
    assert flow_sobolev_gap(f, s, t) <= 1e-8


@pytest.mark.parametrize("beta", [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)])
def test_commutation_with_free_evolution(beta):
    f = windowed_field(GRID, np.random.default_rng(7))
    assert commutation_gap(f, beta, 1.0) <= 1e-8


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]), st.floats(0, 3))
def test_gamma_hs_sandwich(seed, s, t):
    f = band_limited_field(GRID, np.random.default_rng(seed))
    hs = np.sqrt(sobolev_norm(f, s) ** 2 - l2_norm(f) ** 2)
    gs = gamma_norm(f, s, t).seminorm
    C = conversion_constant(s, t)
    assert hs <= C * gs * (1 + 1e-12) and gs <= C * hs * (1 + 1e-12)
    assert shear_norm(t) <= 1 + t + 1e-15


def test_frame_helpers_match_gamma_norm(rng):
    data = np.stack([band_limited_field(GRID, rng).data for _ in range(3)])
    times = np.array([0.0, 0.4, 0.8])
    sq = gamma_sq_frames(data, GRID, 3, times)
    inner = gamma_inner_frames(data, data, GRID, 3, times)
    ref = [gamma_norm(Field(GRID, d), 3, t).full_norm ** 2 for d, t in zip(data, times)]
    np.testing.assert_allclose(sq, ref, rtol=1e-12)
    np.testing.assert_allclose(inner, ref, rtol=1e-12)


def test_xs_norm_examples(rng):
    z = Trajectory.zeros(GRID, 0.5, 4)
    assert xs_norm(z, Trajectory.zeros(GRID, 0.5, 4, d=1), 2) == 0.0
    f = random_smooth_field(GRID, rng)
    dvf = deriv_v(f)
    w = Trajectory.constant_in_time(f, 0.5, 4)
    dvw = Trajectory(GRID, w.times, np.broadcast_to(dvf.data, (5, 1) + GRID.shape))
    sup = max(gamma_norm(f, 2, t).full_norm ** 2 for t in w.times)
    mean_dv = np.mean([gamma_norm(dvf, 2, t).full_norm ** 2 for t in w.times])
    trap = np.array([gamma_norm(dvf, 2, t).full_norm ** 2 for t in w.times])
    expected = np.sqrt(sup + 0.125 * (trap.sum() - 0.5 * (trap[0] + trap[-1])))
    assert np.isclose(xs_norm(w, dvw, 2), expected, rtol=1e-12)
    assert abs(mean_dv * 0.5 - 0.125 * (trap.sum() - 0.5 * (trap[0] + trap[-1]))) < 0.05 * mean_dv
    single = Trajectory(GRID, np.array([0.0]), f.data[None])
    single_dv = Trajectory(GRID, np.array([0.0]), dvf.data[None, None])
    assert np.isclose(xs_norm(single, single_dv, 3), sobolev_norm(f, 3), rtol=1e-12)


def test_gamma_report_csv(tmp_path):
    f = band_limited_field(GRID, np.random.default_rng(1))
    write_gamma_reports(tmp_path / "g.csv", [gamma_norm(f, 1, 0.5), gamma_norm(f, 2, 1.0)])
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == ",".join(GammaNormReport.CSV_HEADER) and len(lines) == 3
