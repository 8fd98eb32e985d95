"""Stego post-processing by hill climbing on the cover/stego residual distance.

Every accepted edit adds +-4 to one embedding unit, so the two lowest bits,
and therefore anything a ternary STC decoder extracts, are unchanged.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import get_core
from .filters import FilterSet, learn_filter_set
from .imaging import COEFF_LIMIT, JpegCoeffGrid, as_gray
from .residual import (UnitPatches, jpeg_patches, manhattan_distance, residual_stack,
                       spatial_patches)

STEP = 4


@dataclass(frozen=True)
class SppConfig:
    algorithm: str = "fast"  # "fast" (changed units, one opposite step) or "general"
    filter_kind: str | None = None  # None: domain default
    w: int | None = None
    max_steps: int = 0  # general mode: per-direction cap on +-4 steps, 0 = unbounded
    combine: str = "distances"  # or "maps": sum residual maps before the L1 distance
    repeat: bool = False  # sweep again until a sweep accepts nothing
    backend: str | None = None

    def __post_init__(self):
        if self.algorithm not in ("fast", "general"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.combine not in ("distances", "maps"):
            raise ValueError(f"unknown combine mode {self.combine!r}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")


@dataclass
class SppResult:
    enhanced: object
    rows: np.ndarray
    cols: np.ndarray
    steps: np.ndarray
    trace: np.ndarray
    initial_distance: float
    final_distance: float
    wall_time: float
    filters: FilterSet = field(repr=False, default=None)

    @property
    def accepted(self) -> int:
        return int(self.steps.shape[0])

    def modifications(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.steps.tolist()))


def _prepare(cover, stego):
    if isinstance(cover, JpegCoeffGrid) or isinstance(stego, JpegCoeffGrid):
        if not (isinstance(cover, JpegCoeffGrid) and isinstance(stego, JpegCoeffGrid)):
            raise TypeError("cover and stego must both be JPEG grids or both be images")
        if cover.shape != stego.shape:
            raise ValueError(f"shape mismatch: {cover.shape} vs {stego.shape}")
        if not np.array_equal(cover.quant, stego.quant):
            raise ValueError("cover and stego quantization tables differ")
        return "jpeg", cover.coeffs, stego.coeffs, -COEFF_LIMIT, COEFF_LIMIT
    x = as_gray(cover)
    y = as_gray(stego)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return "spatial", x, y, 0, 255


def run_spp(cover, stego, filters: FilterSet | None = None,
            config: SppConfig = SppConfig()) -> SppResult:
    """Post-process ``stego`` towards ``cover`` with the configured algorithm."""
    domain, x, y, lo, hi = _prepare(cover, stego)
    if filters is None:
        filters = learn_filter_set(cover, config.filter_kind, config.w)
    work = filters.summed() if config.combine == "maps" else filters
    core = get_core(config.backend)
    start = time.perf_counter()
    up: UnitPatches = (jpeg_patches(work, cover.quant) if domain == "jpeg"
                       else spatial_patches(work))
    z = np.array(y, dtype=np.int32, order="C")
    target = np.ascontiguousarray(x, dtype=np.int32)
    # residuals are linear, so Res(Z) - Res(X) is the response to the sparse Z - X
    err = np.zeros((len(work),) + z.shape)
    core.scatter(err, z - target, up.patches, up.bbox, up.block, up.pad_y, up.pad_x)
    d0 = core.l1_norm(err.reshape(-1))
    distance = d0
    fast = config.algorithm == "fast"
    rows, cols, steps, trace = [], [], [], []
    while True:
        r, c, s, t, distance = core.hill_climb(
            z, target, err, up.patches, up.bbox, up.block, up.pad_y, up.pad_x,
            lo, hi, fast, config.max_steps, distance,
        )
        rows += r
        cols += c
        steps += s
        trace += t
        if not (config.repeat and r):
            break
    elapsed = time.perf_counter() - start
    enhanced = stego.with_coeffs(z) if domain == "jpeg" else z.astype(np.uint8)
    return SppResult(
        enhanced=enhanced,
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        steps=np.asarray(steps, dtype=np.int64),
        trace=np.asarray(trace, dtype=np.float64),
        initial_distance=d0,
        final_distance=distance,
        wall_time=elapsed,
        filters=filters,
    )


def spp_general(cover, stego, filters=None, config: SppConfig | None = None) -> SppResult:
    """Visit every unit; try +4 then -4, repeating a direction while it helps."""
    cfg = config or SppConfig()
    return run_spp(cover, stego, filters, replace(cfg, algorithm="general"))


def spp_fast(cover, stego, filters=None, config: SppConfig | None = None) -> SppResult:
    """Visit only stego-changed units, one step of 4 against the embedding change."""
    cfg = config or SppConfig()
    return run_spp(cover, stego, filters, replace(cfg, algorithm="fast"))


def spp_fast_jpeg(cover: JpegCoeffGrid, stego: JpegCoeffGrid, filters=None,
                  config: SppConfig | None = None) -> SppResult:
    if not isinstance(cover, JpegCoeffGrid) or not isinstance(stego, JpegCoeffGrid):
        raise TypeError("spp_fast_jpeg needs JPEG coefficient grids")
    return spp_fast(cover, stego, filters, config)


def residual_distance(cover, image, filters: FilterSet, combine: str = "distances") -> float:
    """Distance between residuals of ``cover`` and ``image``, computed from scratch."""
    work = filters.summed() if combine == "maps" else filters
    return manhattan_distance(residual_stack(image, work), residual_stack(cover, work))
