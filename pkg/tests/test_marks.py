import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nanomorph.marks import (
    SQRT3, GammaMarkParams, MarkedPoints, assign_radii, mark_correlation, nearest_indices,
    write_mark_correlation,
)


def brute_nearest(pos, m):
    d = np.round(np.linalg.norm(pos[:, None] - pos[None], axis=-1), 9)
    idx = np.broadcast_to(np.arange(len(pos)), d.shape)
    return np.lexsort((idx, d), axis=-1)[:, :m]


@settings(max_examples=50, deadline=None)
@given(st.integers(4, 40), st.integers(1, 6), st.integers(0, 2 ** 32), st.booleans())
def test_nearest_indices_match_brute_force(n, m, seed, lattice):
    rng = np.random.default_rng(seed)
    if lattice:
        # integer points produce many exact distance ties
        pos = rng.integers(0, 4, (n, 3)).astype(float)
        pos = np.unique(pos, axis=0)
        if len(pos) < m:
            return
    else:
        pos = rng.uniform(0, 10, (n, 3))
    m = min(m, len(pos))
    assert np.array_equal(nearest_indices(pos, m), brute_nearest(pos, m))


def test_nearest_includes_self_first():
    pos = np.random.default_rng(0).uniform(0, 10, (50, 3))
    assert np.array_equal(nearest_indices(pos, 3)[:, 0], np.arange(50))


def test_m1_is_own_gamma_draw():
    pos = np.random.default_rng(1).uniform(0, 50, (300, 3))
    gp = GammaMarkParams(1.51, 1.73, m=1)
    marked = assign_radii(pos, gp, np.random.default_rng(2))
    own = np.random.default_rng(2).gamma(1.51, 1.73, 300)
    assert np.allclose(marked.radii - SQRT3, own, rtol=0, atol=1e-12)


def test_radii_floor_and_moments():
    rng = np.random.default_rng(3)
    pos = rng.uniform(0, 200, (100_000, 3))
    gp = GammaMarkParams(1.51, 1.73)
    marked = assign_radii(pos, gp, rng)
    assert np.all(marked.radii >= SQRT3)
    red = marked.radii - SQRT3
    assert red.mean() == pytest.approx(1.51 * 1.73, rel=0.02)
    assert red.var() == pytest.approx(1.51 * 1.73 ** 2, rel=0.05)


def test_sum_of_m_gamma_parts_is_gamma_k_theta():
    # first three moments of the moving-average building block
    k, theta, m = 1.36, 0.88, 4
    x = np.random.default_rng(4).gamma(k / m, theta, (400_000, m)).sum(1)
    assert x.mean() == pytest.approx(k * theta, rel=0.01)
    assert x.var() == pytest.approx(k * theta ** 2, rel=0.02)
    assert ((x - x.mean()) ** 3).mean() == pytest.approx(2 * k * theta ** 3, rel=0.05)


def test_reduced_radius_is_sum_over_neighbours():
    rng = np.random.default_rng(5)
    pos = rng.uniform(0, 20, (60, 3))
    gp = GammaMarkParams(2.0, 1.0, m=4)
    marked = assign_radii(pos, gp, np.random.default_rng(6))
    base = np.random.default_rng(6).gamma(0.5, 1.0, 60)
    expect = base[brute_nearest(pos, 4)].sum(1) + SQRT3
    assert np.allclose(marked.radii, expect, rtol=0, atol=1e-12)


def test_too_few_points():
    with pytest.raises(ValueError):
        assign_radii(np.zeros((3, 3)), GammaMarkParams(1, 1, m=4), np.random.default_rng(0))


def test_params_validation():
    with pytest.raises(ValueError):
        GammaMarkParams(0, 1)
    with pytest.raises(ValueError):
        GammaMarkParams(1, 1, m=0)


def test_assign_is_deterministic():
    pos = np.random.default_rng(7).uniform(0, 30, (200, 3))
    gp = GammaMarkParams(1.26, 0.93)
    a = assign_radii(pos, gp, np.random.default_rng(8))
    b = assign_radii(pos, gp, np.random.default_rng(8))
    assert np.array_equal(a.radii, b.radii)


def test_mark_correlation_constant_marks():
    pos = np.random.default_rng(9).uniform(0, 20, (300, 3))
    mp = MarkedPoints(pos, np.full(300, 2.5))
    r, k = mark_correlation(mp, np.arange(0.5, 15, 0.5))
    ok = ~np.isnan(k)
    assert ok.sum() > 20
    assert np.allclose(k[ok], 1.0, rtol=0, atol=1e-12)


def test_mark_correlation_empty_lag_is_nan():
    pos = np.array([[0, 0, 0], [10, 0, 0], [0, 10, 0.0]])
    r, k = mark_correlation(MarkedPoints(pos, np.ones(3)), [3.0, 10.0], bandwidth=1.0)
    assert np.isnan(k[0]) and k[1] == pytest.approx(1.0)


def test_mark_correlation_independent_marks_null():
    rng = np.random.default_rng(10)
    pos = rng.uniform(0, 100, (10_000, 3))
    mp = MarkedPoints(pos, rng.gamma(1.51, 1.73, 10_000))
    r, k = mark_correlation(mp, np.arange(2.0, 10.5, 1.0))
    assert np.all(np.abs(k - 1) < 0.05)


def test_mark_correlation_of_moving_average_exceeds_one_nearby():
    rng = np.random.default_rng(11)
    pos = rng.uniform(0, 60, (6000, 3))
    marked = assign_radii(pos, GammaMarkParams(1.51, 1.73), rng)
    r, k = mark_correlation(marked, np.arange(1.0, 16.0, 1.0), marks=marked.radii - SQRT3)
    assert k[0] > 1.1
    assert abs(k[-1] - 1) < 0.05


def test_mark_correlation_validation():
    with pytest.raises(ValueError):
        mark_correlation(MarkedPoints(np.zeros((1, 3)), np.ones(1)), [1.0])
    with pytest.raises(ValueError):
        mark_correlation(MarkedPoints(np.zeros((2, 3)), np.ones(2)), [1.0], bandwidth=0)


def test_csv_round_trips(tmp_path):
    rng = np.random.default_rng(12)
    mp = MarkedPoints(rng.uniform(0, 9, (20, 3)), rng.uniform(2, 5, 20))
    mp.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "x,y,z,r"
    back = MarkedPoints.from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.positions, mp.positions) and np.array_equal(back.radii, mp.radii)
    write_mark_correlation(tmp_path / "k.csv", [1.0, 2.0], [np.nan, 1.25])
    assert (tmp_path / "k.csv").read_text().splitlines() == ["r,kappa", "1.0,nan", "2.0,1.25"]
