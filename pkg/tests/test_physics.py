import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nanomorph import grid, physics
from nanomorph.physics import (
    ConvergenceError, DiffusionParams, local_quenching_map, quenching_efficiency, read_mef,
    solve_exciton_field, write_mef,
)

LD = np.sqrt(1.8e-7 * 400e-12) * 1e9


def slab(n_per_ld, n_ld=2.0, tol=1e-7, order="redblack"):
    """ZnO plane at x=0; periodic wrap makes it both walls of a slab of width n_ld*L_D."""
    n = int(round(n_per_ld * n_ld))
    m = np.zeros((n, 2, 2), bool)
    m[0] = True
    dp = DiffusionParams(voxel_size=LD / n_per_ld, tol=tol, max_iters=200_000)
    return m, solve_exciton_field(m, dp, order=order), n


def slab_exact(n, n_per_ld):
    x = np.arange(n) / n_per_ld
    L = n / n_per_ld
    return 1 - np.cosh(x - L / 2) / np.cosh(L / 2)


def test_default_diffusion_length():
    dp = DiffusionParams()
    assert dp.diffusion_length_nm == pytest.approx(8.49, abs=0.005)
    assert dp.diffusion_length_nm / dp.voxel_size == pytest.approx(11.95, abs=0.005)


def test_all_polymer_is_unquenched():
    f = solve_exciton_field(np.zeros((6, 5, 4), bool))
    assert np.all(f.u == 1.0)
    assert quenching_efficiency(f) == 0.0
    assert np.all(local_quenching_map(f) == 0.0)


def test_all_zno_is_rejected():
    with pytest.raises(ValueError):
        solve_exciton_field(np.ones((3, 3, 3), bool))


@pytest.mark.parametrize("n_per_ld", [10, 40])
def test_slab_matches_closed_form(n_per_ld):
    m, f, n = slab(n_per_ld)
    exact = slab_exact(n, n_per_ld)
    assert np.max(np.abs(f.u[:, 0, 0] - exact)) <= 0.01 * exact.max()
    assert np.allclose(f.u[:, 0, 0], f.u[:, 1, 1])


def test_slab_efficiency_is_tanh_one():
    _, f, _ = slab(40)
    assert quenching_efficiency(f) == pytest.approx(np.tanh(1.0), rel=0.01)


def test_residual_bound_and_maximum_principle():
    rng = np.random.default_rng(0)
    m = rng.random((16, 16, 16)) < 0.2
    dp = DiffusionParams(tol=1e-4)
    f = solve_exciton_field(m, dp)
    assert physics.residual(f.u, f.polymer, dp.coupling) <= 10 * dp.tol
    assert np.all(f.u >= 0) and np.all(f.u <= 1)
    assert np.all(f.u[m] == 0)


def test_sweep_orders_agree():
    m = np.random.default_rng(1).random((14, 12, 10)) < 0.15
    dp = DiffusionParams(tol=1e-5)
    a = solve_exciton_field(m, dp, order="redblack")
    b = solve_exciton_field(m, dp, order="lexicographic")
    assert np.max(np.abs(a.u - b.u)) <= 2 * dp.tol


def test_local_map_mean_is_efficiency():
    m = np.random.default_rng(2).random((10, 10, 10)) < 0.1
    f = solve_exciton_field(m, DiffusionParams(tol=1e-5))
    q = local_quenching_map(f)
    assert np.all(np.isnan(q[m]))
    assert np.nanmean(q) == pytest.approx(quenching_efficiency(f), abs=1e-12)
    assert np.all((q[~m] >= 0) & (q[~m] <= 1))


def test_voxels_next_to_zno_quench_most():
    m = np.zeros((30, 4, 4), bool)
    m[0] = True
    q = local_quenching_map(solve_exciton_field(m, DiffusionParams(voxel_size=2.0, tol=1e-7)))
    # the planes adjacent to ZnO (x=1 and, through the wrap, x=29) are the best quenchers
    assert q[1, 0, 0] == pytest.approx(np.nanmax(q), abs=1e-7)
    assert q[1, 0, 0] == pytest.approx(q[29, 0, 0], abs=1e-7)
    assert q[1, 0, 0] > q[15, 0, 0]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_more_zno_never_lowers_efficiency(seed):
    rng = np.random.default_rng(seed)
    field = rng.random((10, 10, 10))
    low, high = field < 0.05, field < 0.15
    if not low.any():
        return
    dp = DiffusionParams(tol=1e-6)
    e_low = quenching_efficiency(solve_exciton_field(low, dp))
    e_high = quenching_efficiency(solve_exciton_field(high, dp))
    assert e_high >= e_low - 2 * dp.tol


def test_omega_range():
    for c in (0.01, 1.0, 142.8, 1600.0):
        assert 1.0 <= physics.default_omega(c) < 2.0
    with pytest.raises(ValueError):
        solve_exciton_field(np.zeros((3, 3, 3), bool), omega=2.0)


def test_non_convergence_raises():
    m = np.zeros((40, 2, 2), bool)
    m[0] = True
    with pytest.raises(ConvergenceError) as info:
        solve_exciton_field(m, DiffusionParams(tol=1e-9, max_iters=3))
    assert info.value.iterations == 3


def test_mef_round_trip(tmp_path):
    m = np.random.default_rng(3).random((5, 6, 7)) < 0.3
    f = solve_exciton_field(m, DiffusionParams(tol=1e-5))
    p = tmp_path / "f.mef"
    write_mef(p, f, voxel_size=0.71)
    raw = p.read_bytes()
    assert raw[:4] == b"MEF1" and len(raw) == 24 + 4 * 210
    u, h = read_mef(p)
    assert h == 0.71
    assert np.array_equal(u, f.u.astype("<f4").astype(np.float64))
    assert np.all(u[m] == 0)
    p.write_bytes(raw[:-1])
    with pytest.raises(ValueError):
        read_mef(p)
    p.write_bytes(b"MEF2" + raw[4:])
    with pytest.raises(ValueError):
        read_mef(p)


def test_parameter_validation():
    with pytest.raises(ValueError):
        DiffusionParams(D=0)
    with pytest.raises(ValueError):
        DiffusionParams(max_iters=0)
    with pytest.raises(ValueError):
        solve_exciton_field(np.zeros((3, 3, 3), bool), order="jacobi")


def test_scaling_by_generation_rate():
    m = np.zeros((8, 3, 3), bool)
    m[0] = True
    f = solve_exciton_field(m, DiffusionParams(tol=1e-6))
    n = f.density()
    assert np.allclose(n, f.u * 400e-12 * 1e27)
    assert grid.as_mask(m).shape == n.shape
