import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import texture_grid, texture_image
from stegospp.costs import (MAX_PAYLOAD, WET_COST, CapacityError, change_probabilities,
                            cost_map, directional_costs, embedding_units, hill_cost,
                            simulate_embedding, solve_lambda, ternary_entropy, uerd_cost)
from stegospp.imaging import JpegCoeffGrid


def test_hill_constant_image_is_capped_and_uniform():
    rho = hill_cost(np.full((32, 32), 77, np.uint8))
    assert np.all(rho == WET_COST)


def test_hill_lower_in_noise_than_flat():
    rng = np.random.default_rng(0)
    for _ in range(10):
        img = np.full((64, 64), 128.0)
        img[:, :32] += rng.normal(scale=20, size=(64, 32))
        img[:, 32:] += rng.normal(scale=0.5, size=(64, 32))
        rho = hill_cost(np.clip(np.round(img), 0, 255).astype(np.uint8))
        assert np.median(rho[:, :24]) < np.median(rho[:, 40:])


def test_hill_positive_and_deterministic():
    img = texture_image(np.random.default_rng(1))
    a, b = hill_cost(img), hill_cost(img.copy())
    np.testing.assert_array_equal(a, b)
    assert np.all(a > 0) and np.all(np.isfinite(a))


def test_uerd_zero_ac_is_uniform():
    coeffs = np.zeros((16, 16), int)
    coeffs[::8, ::8] = 50  # DC only
    rho = uerd_cost(JpegCoeffGrid(coeffs, np.full(64, 3)))
    assert np.unique(rho).size == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_uerd_monotone_in_energy(seed):
    rng = np.random.default_rng(seed)
    coeffs = rng.integers(-30, 31, size=(24, 24))
    quant = rng.integers(1, 30, size=64)
    a = uerd_cost(JpegCoeffGrid(coeffs, quant))
    b = uerd_cost(JpegCoeffGrid(2 * coeffs, quant))
    live = a < WET_COST
    assert np.all(b[live] < a[live])
    np.testing.assert_array_equal(a, uerd_cost(JpegCoeffGrid(coeffs, quant)))


def test_entropy_and_probabilities():
    p, m = change_probabilities(0.0, np.zeros(4), np.zeros(4))
    np.testing.assert_allclose(p, 1 / 3)
    assert ternary_entropy(p, m) == pytest.approx(4 * math.log2(3))
    rho = np.array([0.5, 1.0, 2.0])
    p, m = change_probabilities(1.3, rho, rho)
    e = np.exp(-1.3 * rho)
    np.testing.assert_allclose(p, e / (1 + 2 * e))


def test_entropy_decreasing_in_lambda():
    rng = np.random.default_rng(2)
    rho = rng.random(500) * 10
    lams = np.geomspace(1e-3, 1e3, 40)
    hs = [ternary_entropy(*change_probabilities(l, rho, rho)) for l in lams]
    assert all(a > b for a, b in zip(hs, hs[1:]))


@pytest.mark.parametrize("payload", [1e-4, 0.05, 0.4, 1.0, 1.5])
def test_solve_lambda_hits_payload(payload):
    rng = np.random.default_rng(3)
    rho = rng.random(4096) * 5 + 0.01
    lam, h, iters = solve_lambda(rho, rho, payload * rho.size)
    assert iters <= 60
    assert abs(h - payload * rho.size) <= 1e-3 * payload * rho.size
    assert h == pytest.approx(ternary_entropy(*change_probabilities(lam, rho, rho)))


def test_capacity_error():
    rho = np.ones(100)
    with pytest.raises(CapacityError):
        solve_lambda(rho, rho, 100 * MAX_PAYLOAD)
    with pytest.raises(CapacityError):
        simulate_embedding(np.zeros((8, 8), np.uint8), np.ones((8, 8)), 2.0)
    wet = np.full(100, WET_COST)
    with pytest.raises(CapacityError):
        solve_lambda(wet, wet, 1.0)


def test_simulator_tiny_payload_changes_almost_nothing():
    img = texture_image(np.random.default_rng(4), 128)
    y = simulate_embedding(img, hill_cost(img), 1e-6, seed=0)
    assert np.mean(y != img) < 1e-4


def test_simulator_properties():
    img = texture_image(np.random.default_rng(5), 128)
    img[:8, :8] = 0
    img[-8:, -8:] = 255
    rho = hill_cost(img)
    y, info = simulate_embedding(img, rho, 0.4, seed=11, return_info=True)
    assert info["entropy"] == pytest.approx(0.4 * img.size, rel=1e-3)
    d = y.astype(int) - img
    assert np.abs(d).max() <= 1
    assert y.dtype == np.uint8
    # saturated pixels only move inward
    assert np.all(d[img == 0] >= 0) and np.all(d[img == 255] <= 0)
    np.testing.assert_array_equal(y, simulate_embedding(img, rho, 0.4, seed=11))
    assert not np.array_equal(y, simulate_embedding(img, rho, 0.4, seed=12))


def test_simulator_change_rate_below_eleven_percent():
    rng = np.random.default_rng(6)
    rates = []
    for _ in range(3):
        img = texture_image(rng, 512)
        y = simulate_embedding(img, hill_cost(img), 0.4, seed=1)
        rates.append(np.mean(y != img))
    assert max(rates) < 0.11


def test_jpeg_units_and_simulation():
    grid = texture_grid(np.random.default_rng(7), 64)
    values, usable, units, lo, hi = embedding_units(grid)
    assert units == int(np.count_nonzero(usable))
    assert not usable[::8, ::8].any()  # DC excluded
    assert np.all(values[usable] != 0)
    rho = uerd_cost(grid)
    rp, rm = directional_costs(grid, rho)
    assert np.all(rp[~usable] == WET_COST)
    y = simulate_embedding(grid, rho, 0.4, seed=3)
    d = y.coeffs.astype(int) - grid.coeffs
    assert np.abs(d).max() <= 1
    assert not d[~usable].any() or np.mean(d[~usable] != 0) < 1e-6


def test_cost_map_dispatch():
    img = texture_image(np.random.default_rng(8), 32)
    grid = texture_grid(np.random.default_rng(8), 32)
    np.testing.assert_array_equal(cost_map(img), hill_cost(img))
    np.testing.assert_array_equal(cost_map(grid), uerd_cost(grid))
    with pytest.raises(ValueError):
        cost_map(img, "uerd")
    with pytest.raises(ValueError):
        cost_map(grid, "hill")
    with pytest.raises(ValueError):
        cost_map(img, "suniward")
