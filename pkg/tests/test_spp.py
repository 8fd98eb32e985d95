import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import texture_grid, texture_image
from stegospp import _backend
from stegospp.costs import hill_cost, simulate_embedding, uerd_cost
from stegospp.filters import build_filter_set, learn_filter_set
from stegospp.imaging import COEFF_LIMIT, JpegCoeffGrid
from stegospp.spp import (SppConfig, residual_distance, run_spp, spp_fast, spp_fast_jpeg,
                          spp_general)
from stegospp.stc import TernaryKey, ternary_extract


def spatial_pair(seed, n=32, payload=0.4):
    rng = np.random.default_rng(seed)
    x = texture_image(rng, n)
    return x, simulate_embedding(x, hill_cost(x), payload, seed=seed)


def jpeg_pair(seed, n=32, payload=0.4):
    rng = np.random.default_rng(seed)
    x = texture_grid(rng, n)
    return x, simulate_embedding(x, uerd_cost(x), payload, seed=seed)


def _units(img):
    return (img.coeffs if isinstance(img, JpegCoeffGrid) else np.asarray(img)).astype(np.int64)


def literal_spp(x, y, fs, fast, lo, hi):
    """Direct transcription of the pseudo-code with from-scratch distances."""
    wrap = (lambda v: x.with_coeffs(v)) if isinstance(x, JpegCoeffGrid) else (lambda v: v)
    z = _units(y).copy()
    xv = _units(x)
    dz = residual_distance(x, wrap(z), fs)
    n1, n2 = z.shape
    for i in range(n1):
        for j in range(n2):
            if fast:
                s = 4 * int(np.sign(xv[i, j] - z[i, j]))
                if s == 0 or not lo <= z[i, j] + s <= hi:
                    continue
                t = z.copy()
                t[i, j] += s
                dt = residual_distance(x, wrap(t), fs)
                if dt < dz:
                    z, dz = t, dt
                continue
            for s in (4, -4):
                while lo <= z[i, j] + s <= hi:
                    t = z.copy()
                    t[i, j] += s
                    dt = residual_distance(x, wrap(t), fs)
                    if not dt < dz:
                        break
                    z, dz = t, dt
    return z, dz


@pytest.mark.parametrize("seed", [6, 10, 14, 19])
@pytest.mark.parametrize("fast", [False, True])
def test_matches_literal_pseudo_code_spatial(fast, seed):
    x, y = spatial_pair(seed, n=16, payload=1.0)
    fs = learn_filter_set(x, "full", 3)
    z_ref, d_ref = literal_spp(x, y, fs, fast, 0, 255)
    res = run_spp(x, y, fs, SppConfig(algorithm="fast" if fast else "general"))
    assert res.accepted > 0
    np.testing.assert_array_equal(res.enhanced, z_ref)
    assert res.final_distance == pytest.approx(d_ref, abs=1e-6)


@pytest.mark.parametrize("seed", [3, 11, 17])
@pytest.mark.parametrize("fast", [False, True])
def test_matches_literal_pseudo_code_jpeg(fast, seed):
    x, y = jpeg_pair(seed, n=16, payload=1.0)
    fs = learn_filter_set(x)
    z_ref, d_ref = literal_spp(x, y, fs, fast, -COEFF_LIMIT, COEFF_LIMIT)
    res = run_spp(x, y, fs, SppConfig(algorithm="fast" if fast else "general"))
    assert res.accepted > 0
    np.testing.assert_array_equal(res.enhanced.coeffs, z_ref)
    assert res.final_distance == pytest.approx(d_ref, abs=1e-6)


@pytest.mark.parametrize("algo", [spp_general, spp_fast])
def test_identical_images_need_nothing(algo):
    x, _ = spatial_pair(3)
    res = algo(x, x.copy())
    assert res.accepted == 0 and res.initial_distance == 0 == res.final_distance
    np.testing.assert_array_equal(res.enhanced, x)
    g, _ = jpeg_pair(3)
    res = algo(g, g)
    assert res.accepted == 0 and res.enhanced == g


def test_single_change_general_vs_single_edit_search():
    rng = np.random.default_rng(4)
    for _ in range(5):
        x = texture_image(rng, 16)
        y = x.astype(np.int64)
        i, j = rng.integers(2, 14, 2)
        y[i, j] += 1 if y[i, j] < 255 else -1
        y = y.astype(np.uint8)
        fs = learn_filter_set(x, "full", 3)
        d0 = residual_distance(x, y, fs)
        best = d0
        for a in range(16):
            for b in range(16):
                for s in (4, -4):
                    t = y.astype(np.int64)
                    t[a, b] += s
                    if 0 <= t[a, b] <= 255:
                        best = min(best, residual_distance(x, t, fs))
        res = spp_general(x, y, fs)
        if best == d0:
            # no single edit helps, so the greedy scan cannot move at all
            assert res.accepted == 0
            np.testing.assert_array_equal(res.enhanced, y)
        assert res.final_distance <= best + 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans())
def test_run_invariants(seed, fast, jpeg):
    x, y = jpeg_pair(seed) if jpeg else spatial_pair(seed)
    res = (spp_fast if fast else spp_general)(x, y)
    yv, zv, xv = _units(y), _units(res.enhanced), _units(x)
    # message safety and range
    assert np.all((zv - yv) % 4 == 0)
    lo, hi = (-COEFF_LIMIT, COEFF_LIMIT) if jpeg else (0, 255)
    assert zv.min() >= lo and zv.max() <= hi
    key = TernaryKey.create(yv.size, yv.size // 3, h=5)
    np.testing.assert_array_equal(ternary_extract(res.enhanced, key), ternary_extract(y, key))
    # monotone descent and faithful bookkeeping
    trace = np.r_[res.initial_distance, res.trace]
    assert np.all(np.diff(trace) < 0)
    assert res.final_distance <= res.initial_distance
    assert res.final_distance == pytest.approx(
        residual_distance(x, res.enhanced, res.filters), abs=1e-6)
    assert res.initial_distance == pytest.approx(residual_distance(x, y, res.filters), abs=1e-6)
    # modification list reproduces Z
    rebuilt = yv.copy()
    for r, c, s in res.modifications():
        assert s in (4, -4)
        rebuilt[r, c] += s
    np.testing.assert_array_equal(rebuilt, zv)
    if fast:
        assert np.all(xv[res.rows, res.cols] != yv[res.rows, res.cols])
        np.testing.assert_array_equal(res.steps, 4 * np.sign(xv - yv)[res.rows, res.cols])
        assert len(set(zip(res.rows.tolist(), res.cols.tolist()))) == res.accepted
        changed = zv != yv
        assert np.all(np.abs(zv - xv)[changed] == 3)


def test_fast_modifications_are_general_candidates():
    x, y = spatial_pair(5)
    fast = spp_fast(x, y)
    # every fast edit is a single +-4 step from Y that stays in range, i.e. the first
    # move Algorithm 1 would try in one of its two directions at that unit
    for r, c, s in fast.modifications():
        assert s in (4, -4) and 0 <= int(y[r, c]) + s <= 255


def test_determinism():
    x, y = spatial_pair(6)
    a, b = spp_general(x, y), spp_general(x, y)
    np.testing.assert_array_equal(a.enhanced, b.enhanced)
    assert a.modifications() == b.modifications()
    np.testing.assert_array_equal(a.trace, b.trace)


def test_saturated_range_is_respected():
    rng = np.random.default_rng(7)
    x = rng.choice(np.array([0, 1, 2, 3, 252, 253, 254, 255], np.uint8), size=(24, 24))
    y = np.clip(x.astype(int) + rng.integers(-1, 2, x.shape), 0, 255).astype(np.uint8)
    for algo in (spp_fast, spp_general):
        z = algo(x, y, build_filter_set([0.5, -1, 0.5], "full")).enhanced.astype(int)
        assert z.min() >= 0 and z.max() <= 255


def test_max_steps_and_repeat():
    x, y = spatial_pair(8, payload=1.0)
    fs = learn_filter_set(x)
    free = run_spp(x, y, fs, SppConfig(algorithm="general"))
    capped = run_spp(x, y, fs, SppConfig(algorithm="general", max_steps=1))
    runs = {}
    for r, c in zip(capped.rows.tolist(), capped.cols.tolist()):
        runs[(r, c)] = runs.get((r, c), 0) + 1
    assert max(runs.values()) <= 2  # at most one step per direction
    assert free.final_distance <= free.initial_distance
    again = run_spp(x, y, fs, SppConfig(algorithm="fast", repeat=True))
    once = run_spp(x, y, fs, SppConfig(algorithm="fast"))
    assert again.final_distance <= once.final_distance
    assert again.final_distance == pytest.approx(residual_distance(x, again.enhanced, fs), abs=1e-6)


def test_combine_maps():
    x, y = spatial_pair(9)
    fs = learn_filter_set(x)
    res = run_spp(x, y, fs, SppConfig(combine="maps"))
    assert res.final_distance == pytest.approx(
        residual_distance(x, res.enhanced, fs, combine="maps"), abs=1e-6)
    assert res.final_distance <= res.initial_distance


def test_errors():
    x, y = spatial_pair(10)
    with pytest.raises(ValueError):
        spp_fast(x, y[:16])
    g, gy = jpeg_pair(10)
    with pytest.raises(ValueError):
        spp_fast(g, JpegCoeffGrid(gy.coeffs, np.ones(64)))
    with pytest.raises(TypeError):
        spp_fast(g, y)
    with pytest.raises(TypeError):
        spp_fast_jpeg(x, y)
    with pytest.raises(ValueError):
        SppConfig(algorithm="annealing")
    with pytest.raises(ValueError):
        SppConfig(combine="product")


def test_fast_jpeg_wrapper():
    g, gy = jpeg_pair(11)
    res = spp_fast_jpeg(g, gy)
    assert isinstance(res.enhanced, JpegCoeffGrid)
    assert res.final_distance <= res.initial_distance


def test_inputs_not_mutated():
    x, y = spatial_pair(12)
    xc, yc = x.copy(), y.copy()
    spp_general(x, y)
    np.testing.assert_array_equal(x, xc)
    np.testing.assert_array_equal(y, yc)


@pytest.mark.skipif(_backend.BACKEND != "cython", reason="compiled core not built")
@pytest.mark.parametrize("algorithm", ["fast", "general"])
@pytest.mark.parametrize("jpeg", [False, True])
def test_backends_agree(algorithm, jpeg):
    x, y = jpeg_pair(13, 16) if jpeg else spatial_pair(13, 20)
    fs = learn_filter_set(x)
    a = run_spp(x, y, fs, SppConfig(algorithm=algorithm, backend="python"))
    b = run_spp(x, y, fs, SppConfig(algorithm=algorithm, backend="cython"))
    assert a.modifications() == b.modifications()
    np.testing.assert_allclose(a.trace, b.trace, rtol=1e-9)
