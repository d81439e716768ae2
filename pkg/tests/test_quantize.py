import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcpd.quantize import (
    MSE_ALPHAS,
    QuantGrid,
    QuantScheme,
    dequantize,
    minmax_grid,
    mse_grid,
    project,
    quantize,
)


def nearest_node(x, grid):
    """Exhaustive nearest grid node; ties go to the node with even (code - z)."""
    codes = np.arange(grid.qmin, grid.qmax + 1)
    nodes = grid.scale * (codes - grid.zero_point)
    dist = np.abs(x - nodes)
    best = np.flatnonzero(dist == dist.min())
    if len(best) > 1:
        best = [i for i in best if (codes[i] - grid.zero_point) % 2 == 0]
    return nodes[best[0]]


def brute_mse(x, bits, alpha):
    amax = np.max(np.abs(x))
    g = QuantGrid(bits, 2 * alpha * amax / (2**bits - 1))
    xhat = np.array([nearest_node(v, g) for v in x])
    return np.sum((x - xhat) ** 2), g


def test_alpha_candidates():
    assert len(MSE_ALPHAS) == 81
    assert MSE_ALPHAS[0] == 0.2 and MSE_ALPHAS[-1] == 1.0


def test_grid_validation():
    with pytest.raises(ValueError):
        QuantGrid(9, 1.0)
    with pytest.raises(ValueError):
        QuantGrid(4, 0.0)
    with pytest.raises(ValueError):
        QuantGrid(4, 1.0, zero_point=1, symmetric=True)
    with pytest.raises(ValueError):
        QuantScheme("mse", symmetric=False)
    with pytest.raises(ValueError):
        QuantScheme("histogram")


def test_minmax_symmetric_scale():
    g = minmax_grid(np.linspace(-1, 1, 11), 8, symmetric=True)
    assert g.scale == 2 / 255 and g.zero_point == 0


def test_minmax_asymmetric_zero_point():
    g = minmax_grid(np.arange(16.0), 4, symmetric=False)
    assert g.scale == 1.0 and g.zero_point == -8
    np.testing.assert_array_equal(quantize(np.arange(16.0), g), np.arange(-8, 8))


def test_minmax_constant_tensor():
    g = minmax_grid(np.full(5, 0.7), 4, symmetric=False)
    assert g.scale == 1.0 and g.zero_point == 0
    g = minmax_grid(np.zeros(5), 4, symmetric=True)
    assert g.scale == 1.0 and g.zero_point == 0
    # a nonzero constant is not degenerate for a symmetric grid
    assert minmax_grid(np.full(5, 0.7), 4, symmetric=True).scale == 2 * 0.7 / 15


def test_quantize_examples():
    g = minmax_grid(np.array([-1.0, -0.4, 0.3, 1.0]), 2, symmetric=True)
    assert g.scale == pytest.approx(2 / 3, rel=1e-15)
    np.testing.assert_array_equal(quantize([-1.0, -0.4, 0.3, 1.0], g), [-2, -1, 0, 1])
    assert quantize(0.0, QuantGrid(5, 0.37)) == 0
    assert quantize(1e6, QuantGrid(5, 0.37)) == 15
    assert quantize(-1e6, QuantGrid(5, 0.37)) == -16


def test_quantize_half_even():
    g = QuantGrid(4, 1.0)
    np.testing.assert_array_equal(quantize([0.5, 1.5, 2.5, -0.5, -1.5], g), [0, 2, 2, 0, -2])


def test_dequantize():
    g = QuantGrid(2, 2 / 3)
    assert dequantize(np.array(0), g) == 0.0
    assert dequantize(np.array(-2), g) == pytest.approx(-4 / 3, rel=1e-15)
    with pytest.raises(ValueError):
        dequantize(np.array([2]), g)


def test_project_example():
    out, g = project(np.array([-1.0, -0.4, 0.3, 1.0]), 2, QuantScheme("minmax", True))
    np.testing.assert_allclose(out, [-4 / 3, -2 / 3, 0, 2 / 3], rtol=1e-15)


def test_project_fixed_point_full_range_grid():
    # codes spanning the whole b-bit range on step s: an asymmetric MinMax
    # refit lands on z = 0 and the same step
    for bits in (2, 4, 8):
        s = 2.0**-3
        codes = np.arange(-(2 ** (bits - 1)), 2 ** (bits - 1))
        x = np.random.default_rng(bits).permutation(s * codes)
        out, g = project(x, bits, QuantScheme("minmax", symmetric=False))
        assert g.zero_point == 0 and g.scale == s
        np.testing.assert_array_equal(out, x)


def test_project_zero_input():
    for scheme in (QuantScheme("mse"), QuantScheme("minmax", True), QuantScheme("minmax", False)):
        out, _ = project(np.zeros((3, 2)), 4, scheme)
        assert out.shape == (3, 2) and not out.any()


@pytest.mark.parametrize("bits", [2, 3, 4])
def test_project_matches_node_enumeration(bits):
    rng = np.random.default_rng(bits)
    for scheme in (QuantScheme("minmax", True), QuantScheme("minmax", False), QuantScheme("mse")):
        x = rng.standard_normal(200) * rng.uniform(0.1, 10)
        out, g = project(x, bits, scheme)
        expected = np.array([nearest_node(v, g) for v in x])
        np.testing.assert_array_equal(out, expected)


def test_mse_grid_no_outliers_beats_alpha_one():
    x = np.random.default_rng(0).uniform(-1, 1, 1000)
    g = mse_grid(x, 8)
    err = np.sum((x - dequantize(quantize(x, g), g)) ** 2)
    assert err <= brute_mse(x, 8, 1.0)[0]


def test_mse_grid_clips_outlier():
    x = np.concatenate([np.tile([0.1, -0.1], 50)[:99], [10.0]])
    errs = [brute_mse(x, 4, a)[0] for a in MSE_ALPHAS]
    best = len(errs) - 1 - int(np.argmin(errs[::-1]))
    g = mse_grid(x, 4)
    assert g.scale == pytest.approx(brute_mse(x, 4, MSE_ALPHAS[best])[1].scale, rel=1e-15)
    # the largest positive node sits below the outlier, so it is clipped
    assert g.qmax * g.scale < 10.0


def test_mse_grid_shrinks_range_for_heavy_tail():
    x = np.random.default_rng(1).standard_normal(1000)
    errs = [brute_mse(x, 4, a)[0] for a in MSE_ALPHAS]
    best = len(errs) - 1 - int(np.argmin(errs[::-1]))
    g = mse_grid(x, 4)
    assert g.scale == pytest.approx(2 * MSE_ALPHAS[best] * np.abs(x).max() / 15, rel=1e-15)
    assert MSE_ALPHAS[best] < 1.0


def test_mse_grid_single_element():
    x = np.array([5.0])
    g = mse_grid(x, 8)
    err = abs(x[0] - dequantize(quantize(x, g), g)[0])
    assert err <= g.scale / 2
    # exhaustive: chosen candidate attains the minimal error, ties toward larger alpha
    errs = np.array([brute_mse(x, 8, a)[0] for a in MSE_ALPHAS])
    best = len(errs) - 1 - int(np.argmin(errs[::-1]))
    assert g.scale == pytest.approx(2 * MSE_ALPHAS[best] * 5.0 / 255, rel=1e-15)


def test_mse_grid_all_zero():
    with pytest.raises(ValueError):
        mse_grid(np.zeros(4), 4)


arrays = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=40).map(np.array)


@settings(max_examples=200, deadline=None)
@given(arrays, st.integers(2, 8))
def test_mse_dominates_minmax(x, bits):
    if not np.any(x):
        return
    gm, gs = mse_grid(x, bits), minmax_grid(x, bits, symmetric=True)
    e_mse = np.sum((x - dequantize(quantize(x, gm), gm)) ** 2)
    e_mm = np.sum((x - dequantize(quantize(x, gs), gs)) ** 2)
    assert e_mse <= e_mm


@settings(max_examples=200, deadline=None)
@given(arrays, st.integers(2, 8), st.sampled_from(["minmax-sym", "minmax-asym", "mse"]))
def test_grid_membership_and_idempotence(x, bits, name):
    method, _, sym = name.partition("-")
    scheme = QuantScheme(method, sym != "asym")
    out, g = project(x, bits, scheme)
    codes = quantize(x, g)
    assert codes.min() >= g.qmin and codes.max() <= g.qmax
    np.testing.assert_array_equal(out, g.scale * (codes - g.zero_point))
    np.testing.assert_array_equal(quantize(dequantize(codes, g), g), codes)


@settings(max_examples=200, deadline=None)
@given(arrays, st.integers(2, 8))
def test_symmetric_grid_is_odd(x, bits):
    g = minmax_grid(x, bits, symmetric=True)
    c, cn = quantize(x, g), quantize(-x, g)
    inside = (c > g.qmin) & (cn > g.qmin)
    np.testing.assert_array_equal(cn[inside], -c[inside])


@pytest.mark.parametrize("bits", [2, 3, 4])
def test_nearest_node_property(bits):
    rng = np.random.default_rng(10 + bits)
    g = QuantGrid(bits, 0.3, zero_point=1, symmetric=False)
    x = rng.uniform(-4, 4, 500)
    xhat = dequantize(quantize(x, g), g)
    dist = np.abs(x[:, None] - g.nodes()[None, :]).min(axis=1)
    np.testing.assert_array_equal(np.abs(x - xhat), dist)
