import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nanomorph import stats
from nanomorph.pointproc import MaternParams, Rectangle, sample_matern_slice
from nanomorph.stats import EDF

import oracles


def edfs():
    samples = st.lists(st.integers(0, 12).map(float), min_size=1, max_size=30)
    return samples.map(EDF.from_samples)


# --- EDF --------------------------------------------------------------------

def test_edf_step_semantics():
    F = EDF.from_samples([1.0, 2.0, 2.0, 5.0])
    assert F(0.999) == 0 and F(1.0) == 0.25 and F(2.0) == 0.75 and F(4.9) == 0.75
    assert F(5.0) == 1.0 and F(100) == 1.0
    assert F.n_samples == 4


def test_edf_rejects_invalid():
    with pytest.raises(ValueError):
        EDF([1.0, 0.5], [0.5, 1.0])
    with pytest.raises(ValueError):
        EDF([1.0, 2.0], [0.6, 0.5])
    with pytest.raises(ValueError):
        EDF([1.0], [1.5])


def test_edf_mean_is_pointwise():
    F = EDF.from_samples([1.0])
    G = EDF.from_samples([3.0])
    M = EDF.mean([F, G])
    assert np.allclose(M([0.5, 1, 2, 3]), [0, 0.5, 0.5, 1])


def test_edf_csv_round_trip(tmp_path):
    F = EDF.from_samples([0.5, 1.5, 1.5, np.sqrt(2)])
    F.to_csv(tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "t,F"
    G = EDF.from_csv(tmp_path / "f.csv")
    assert np.array_equal(F.breakpoints, G.breakpoints) and np.array_equal(F.values, G.values)


# --- Kolmogorov distance ----------------------------------------------------

def test_kolmogorov_hand_cases():
    F = EDF.from_samples([1.0])
    G = EDF.from_samples([2.0])
    assert stats.kolmogorov_distance(F, F) == 0.0
    assert stats.kolmogorov_distance(F, G) == 1.0
    assert stats.kolmogorov_distance(EDF.from_samples([1.0, 3.0]), G) == 0.5


@settings(max_examples=100, deadline=None)
@given(edfs(), edfs(), edfs())
def test_kolmogorov_metric_properties(F, G, H):
    d = stats.kolmogorov_distance
    assert d(F, G) == d(G, F)
    assert d(F, H) <= d(F, G) + d(G, H) + 1e-12
    # dense evaluation never beats the breakpoint supremum
    t = np.linspace(-1, 14, 3001)
    assert np.max(np.abs(F(t) - G(t))) <= d(F, G) + 1e-12


# --- intensity --------------------------------------------------------------

def test_intensity_3d():
    assert stats.intensity_3d(np.zeros((0, 3)), (10, 10, 10)) == 0.0
    pts = np.random.default_rng(0).uniform(0, 100, (1830, 3))
    assert stats.intensity_3d(pts, (100, 100, 100)) == pytest.approx(1.83e-3)
    assert stats.intensity_3d(np.array([[-1, 5, 5], [5, 5, 5.0]]), (10, 10, 10)) == 1e-3


def test_intensity_consistent_on_nested_windows():
    pts = np.random.default_rng(1).uniform(0, 200, (80_000, 3))
    full = stats.intensity_3d(pts, (200, 200, 200))
    half = stats.intensity_3d(pts, (100, 100, 100))
    assert half == pytest.approx(full, abs=4 * np.sqrt(full / 100 ** 3))


# --- pair correlation -------------------------------------------------------

def test_pcf_poisson_is_one():
    rng = np.random.default_rng(2)
    curves = []
    r = np.arange(5.0, 51.0, 5.0)
    for _ in range(10):
        n = rng.poisson(0.01 * 500 ** 2)
        curves.append(stats.pair_correlation_2d(rng.uniform(0, 500, (n, 2)), (500, 500), r)[1])
    assert np.all(np.abs(np.mean(curves, 0) - 1) < 0.1)
    assert np.all(np.abs(curves[0] - 1) < 0.25)


def test_pcf_regular_lattice_is_zero_below_spacing():
    g1, g2 = np.meshgrid(np.arange(0, 200, 10.0), np.arange(0, 200, 10.0))
    pts = np.column_stack([g1.ravel(), g2.ravel()]) + 0.5
    r, g = stats.pair_correlation_2d(pts, (200, 200), np.arange(1.0, 8.0), bandwidth=1.0)
    assert np.all(g == 0)


def test_pcf_inadmissible_lags_are_nan():
    pts = np.random.default_rng(3).uniform(0, 40, (100, 2))
    r, g = stats.pair_correlation_2d(pts, (40, 40), [0.0, 5.0, 20.0, 30.0])
    assert np.isnan(g[0]) and np.isfinite(g[1]) and np.isnan(g[2]) and np.isnan(g[3])


def test_pcf_of_matern_slice_shows_clustering():
    mp = MaternParams(1.25e-3, 10.0e-3, 22, 6)
    rng = np.random.default_rng(4)
    win = Rectangle(0, 0, 500, 500)
    r = np.array([2.0, 4.0, 150.0, 200.0])
    curves = []
    for _ in range(5):
        pts, _ = sample_matern_slice(mp, win, rng).member_points()
        pts = pts[((pts >= 0) & (pts < 500)).all(1)]
        curves.append(stats.pair_correlation_2d(pts, (500, 500), r)[1])
    g = np.mean(curves, 0)
    assert g[0] > 1.5 and g[1] > 1.5
    assert np.all(np.abs(g[2:] - 1) < 0.15)


# --- chord lengths ----------------------------------------------------------

def test_chord_single_interior_run():
    m = np.zeros((10, 1, 1), bool)
    m[2:7] = True
    F = stats.chord_length_edf(m, "x")
    assert list(F.breakpoints) == [5.0] and list(F.values) == [1.0]


def test_chord_stripes_in_frame():
    m = np.zeros((9, 3, 3), bool)
    m[1:8:2] = True
    assert set(stats.chord_lengths(m, "x")) == {1}
    assert stats.chord_length_edf(m, "x").n_samples == 4 * 9


def test_chord_censoring_gives_empty_edf():
    F = stats.chord_length_edf(np.ones((4, 4, 4), bool), "z")
    assert F.empty and F(3.0) == 0


@settings(max_examples=50, deadline=None)
@given(st.tuples(st.integers(1, 7), st.integers(1, 7), st.integers(1, 7)).flatmap(
    lambda s: arrays(bool, s)), st.sampled_from("xyz"))
def test_chords_match_scan(m, axis):
    ax = "xyz".index(axis)
    lines = np.moveaxis(m, ax, -1).reshape(-1, m.shape[ax])
    expect = sorted(c for line in lines for c in oracles.chords(list(line)))
    assert sorted(stats.chord_lengths(m, axis)) == expect


# --- spherical contact ------------------------------------------------------

def test_scd_all_adjacent():
    m = np.zeros((6, 6, 6), bool)
    m[::2] = True
    assert stats.spherical_contact_edf(m)(1.0) == 1.0


def test_scd_single_voxel_brute_force():
    m = np.zeros((9, 9, 9), bool)
    m[4, 4, 4] = True
    F = stats.spherical_contact_edf(m)
    t, Fb = oracles.contact_edf(m)
    assert np.array_equal(F.breakpoints, t) and np.array_equal(F.values, Fb)


def test_scd_single_phase_errors():
    for m in (np.ones((3, 3, 3), bool), np.zeros((3, 3, 3), bool)):
        with pytest.raises(ValueError):
            stats.spherical_contact_edf(m)


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.integers(1, 10), st.integers(1, 10), st.integers(1, 10)).flatmap(
    lambda s: arrays(bool, s)))
def test_scd_matches_brute_force(m):
    if m.all() or not m.any():
        return
    F = stats.spherical_contact_edf(m)
    t, Fb = oracles.contact_edf(m)
    assert np.array_equal(F.breakpoints, t) and np.allclose(F.values, Fb, rtol=0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_scd_nested_sets_dominate(seed):
    rng = np.random.default_rng(seed)
    field = rng.random((10, 10, 10))
    low, high = field < 0.1, field < 0.3
    if not low.any():
        return
    Fl, Fh = stats.spherical_contact_edf(low), stats.spherical_contact_edf(high)
    t = np.union1d(Fl.breakpoints, Fh.breakpoints)
    assert np.all(Fh(t) >= Fl(t) - 1e-15)


# --- summaries --------------------------------------------------------------

def test_summarize_and_text():
    m = np.zeros((6, 6, 6), bool)
    m[2:4, 2:4, :] = True
    s = stats.summarize(m, lambda_hat=1e-3)
    assert s.v == pytest.approx(24 / 216) and s.v_conn == 1.0
    assert s.f_z.empty and list(s.f_x.breakpoints) == [2.0]
    text = s.to_text()
    assert "v=" in text and "v_conn=1.0" in text and "lambda_hat=0.001" in text
