import numpy as np
import pytest
from numpy.testing import assert_allclose

from spinodalkit.analysis import (ConductivityMap, LinearSolveError, Phase,
                                  PhaseMap, dense_sheet_resistance,
                                  effective_sheet_resistance)
from spinodalkit.fields import GridSpec


def cmap(sigma, h=1.0):
    sigma = np.asarray(sigma, dtype=float)
    ny, nx = sigma.shape
    return ConductivityMap(spec=GridSpec(nx, ny, h), sigma=sigma)


def test_uniform_sheet_is_exact():
    for nx, ny, s in [(8, 8, 1.0), (24, 16, 3.0), (6, 30, 0.25)]:
        c = cmap(np.full((ny, nx), s))
        assert_allclose(effective_sheet_resistance(c, "x"), 1.0 / s, rtol=1e-12)
        assert_allclose(effective_sheet_resistance(c, "y"), 1.0 / s, rtol=1e-12)


def test_series_and_parallel_laminates():
    s1, s2 = 1.0, 1e-2
    sigma = np.empty((16, 16))
    sigma[:, 0::2] = s1
    sigma[:, 1::2] = s2
    c = cmap(sigma)
    # current crossing the stripes sees resistances in series,
    # current along them sees the conductances in parallel
    series = 0.5 * (1.0 / s1 + 1.0 / s2)
    parallel = 2.0 / (s1 + s2)
    assert_allclose(effective_sheet_resistance(c, "x"), series, rtol=1e-8)
    assert_allclose(effective_sheet_resistance(c, "y"), parallel, rtol=1e-8)


def test_matches_dense_direct_solve():
    rng = np.random.default_rng(12)
    sigma = np.exp(rng.standard_normal((10, 12)))
    c = cmap(sigma)
    for axis in ("x", "y"):
        assert_allclose(effective_sheet_resistance(c, axis),
                        dense_sheet_resistance(c, axis), rtol=1e-8)


def test_axis_swap_is_transpose():
    rng = np.random.default_rng(3)
    sigma = np.exp(rng.standard_normal((8, 14)))
    r_y = effective_sheet_resistance(cmap(sigma), "y")
    r_x = effective_sheet_resistance(cmap(sigma.T), "x")
    assert_allclose(r_y, r_x, rtol=1e-9)


def test_conductivity_scaling():
    rng = np.random.default_rng(4)
    sigma = np.exp(rng.standard_normal((9, 9)))
    r1 = effective_sheet_resistance(cmap(sigma), "x")
    r2 = effective_sheet_resistance(cmap(10.0 * sigma), "x")
    assert_allclose(r2, r1 / 10.0, rtol=1e-9)


def test_two_phase_map_brackets_pure_phases():
    rng = np.random.default_rng(5)
    mask = rng.random((16, 16)) < 0.5
    pm = PhaseMap(spec=GridSpec(16, 16), ti_rich=mask)
    c = ConductivityMap.from_phase_map(pm, sigma_ti=1.0, sigma_al=1e-4)
    assert np.array_equal(c.sigma == 1.0, mask)
    r = effective_sheet_resistance(c, "x")
    assert 1.0 < r < 1e4  # between the pure Ti and pure Al sheets


def test_invalid_axis_and_sigma():
    c = cmap(np.ones((4, 4)))
    with pytest.raises(ValueError):
        effective_sheet_resistance(c, "diag")
    with pytest.raises(ValueError):
        cmap(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        cmap(np.full((4, 4), -1.0))
    bad = np.ones((4, 4))
    bad[1, 2] = np.inf
    with pytest.raises(ValueError):
        cmap(bad)


def test_iteration_cap_raises_with_residual():
    rng = np.random.default_rng(6)
    sigma = np.exp(2.0 * rng.standard_normal((20, 20)))
    with pytest.raises(LinearSolveError) as info:
        effective_sheet_resistance(cmap(sigma), "x", max_iter=2)
    assert info.value.residual > 0


def test_dense_solver_size_guard():
    c = cmap(np.ones((40, 40)))
    with pytest.raises(ValueError):
        dense_sheet_resistance(c, "x")
