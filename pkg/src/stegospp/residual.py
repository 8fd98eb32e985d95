"""Residual maps, their L1 distance, and local updates after a single-unit edit.

Residuals are same-size cross-correlations (kernel not flipped) with zero
padding, so every map is linear in the image and a one-unit change touches
only a small window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .filters import FilterSet
from .imaging import JpegCoeffGrid, basis_image, decompress


@dataclass(eq=False)
class ResidualStack:
    """One residual map per kernel of ``filters``, stacked as ``maps[k]``."""

    maps: np.ndarray
    filters: FilterSet

    def __post_init__(self):
        if self.maps.ndim != 3 or self.maps.shape[0] != len(self.filters):
            raise ValueError("need one map per kernel")

    @property
    def shape(self) -> tuple[int, int]:
        return self.maps.shape[1:]

    def copy(self) -> "ResidualStack":
        return ResidualStack(self.maps.copy(), self.filters)


def _real_image(image) -> np.ndarray:
    if isinstance(image, JpegCoeffGrid):
        return decompress(image)
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    return img


def residual_stack(image, filters: FilterSet) -> ResidualStack:
    """Correlate the (decompressed, for JPEG) image with every kernel."""
    img = _real_image(image)
    hy, hx = filters.max_half
    if img.shape[0] < 2 * hy + 1 or img.shape[1] < 2 * hx + 1:
        raise ValueError(f"image {img.shape} smaller than the largest kernel")
    maps = np.empty((len(filters),) + img.shape)
    for k, kern in enumerate(filters.kernels):
        maps[k] = ndimage.correlate(img, kern, mode="constant", cval=0.0)
    return ResidualStack(maps, filters)


def manhattan_distance(a: ResidualStack, b: ResidualStack) -> float:
    """Sum over kernels of the L1 distance between corresponding maps."""
    if a.maps.shape != b.maps.shape:
        raise ValueError(f"stack shapes differ: {a.maps.shape} vs {b.maps.shape}")
    return float(np.abs(a.maps - b.maps).sum())


# --------------------------------------------------------------------------- patches


@dataclass(frozen=True, eq=False)
class UnitPatches:
    """Residual response of a unit change, one patch set per unit type.

    ``patches[t, k]`` is the change of map ``k`` caused by adding 1 to a unit of
    type ``t``; its top-left corner sits at ``(i - i % block - pad_y,
    j - j % block - pad_x)`` for the unit at ``(i, j)``.  ``bbox[k]`` gives the
    ``[y0, y1) x [x0, x1)`` extent that can be nonzero for kernel ``k``.
    """

    patches: np.ndarray
    bbox: np.ndarray
    block: int
    pad_y: int
    pad_x: int

    def unit_type(self, i: int, j: int) -> int:
        return (i % self.block) * self.block + (j % self.block)

    def anchor(self, i: int, j: int) -> tuple[int, int]:
        return (i - i % self.block - self.pad_y, j - j % self.block - self.pad_x)


def _responses(deltas, filters: FilterSet, block: int) -> UnitPatches:
    hy, hx = filters.max_half
    ph, pw = block + 2 * hy, block + 2 * hx
    patches = np.zeros((len(deltas), len(filters), ph, pw))
    bbox = np.zeros((len(filters), 4), dtype=np.int64)
    for k, kern in enumerate(filters.kernels):
        ky, kx = kern.shape[0] // 2, kern.shape[1] // 2
        bbox[k] = (hy - ky, hy + block + ky, hx - kx, hx + block + kx)
        for t, delta in enumerate(deltas):
            canvas = np.zeros((ph, pw))
            canvas[hy : hy + block, hx : hx + block] = delta
            patches[t, k] = ndimage.correlate(canvas, kern, mode="constant", cval=0.0)
    return UnitPatches(np.ascontiguousarray(patches), bbox, block, hy, hx)


def spatial_patches(filters: FilterSet) -> UnitPatches:
    return _responses([np.ones((1, 1))], filters, 1)


def jpeg_patches(filters: FilterSet, quant) -> UnitPatches:
    """Patches for each of the 64 in-block frequencies, scaled by their quant step."""
    quant = np.asarray(quant).reshape(8, 8)
    deltas = [quant[u, v] * basis_image(u, v) for u in range(8) for v in range(8)]
    return _responses(deltas, filters, 8)


def _apply(stack: ResidualStack, up: UnitPatches, i: int, j: int, s: float, inplace: bool):
    out = stack if inplace else stack.copy()
    if s == 0:
        return out
    from ._pycore import apply_patch

    ay, ax = up.anchor(i, j)
    apply_patch(out.maps, up.patches, up.bbox, up.unit_type(i, j), ay, ax, float(s))
    return out


def _check_step(s: int) -> None:
    if int(s) != s or int(s) % 4:
        raise ValueError(f"step {s} is not a multiple of 4")


def incremental_update_spatial(stack: ResidualStack, i: int, j: int, s: int,
                               inplace: bool = False, patches: UnitPatches | None = None):
    """Residuals of ``image + s * delta_ij`` given the residuals of ``image``."""
    _check_step(s)
    n1, n2 = stack.shape
    if not (0 <= i < n1 and 0 <= j < n2):
        raise IndexError(f"unit ({i}, {j}) outside {n1}x{n2}")
    up = patches or spatial_patches(stack.filters)
    return _apply(stack, up, i, j, s, inplace)


def incremental_update_jpeg(stack: ResidualStack, grid: JpegCoeffGrid, block_row: int,
                            block_col: int, u: int, v: int, s: int, inplace: bool = False,
                            patches: UnitPatches | None = None):
    """Residuals after adding ``s`` to coefficient ``(u, v)`` of one 8x8 block."""
    _check_step(s)
    by, bx = grid.blocks
    if not (0 <= block_row < by and 0 <= block_col < bx and 0 <= u < 8 and 0 <= v < 8):
        raise IndexError(f"coefficient ({block_row}, {block_col}, {u}, {v}) out of range")
    if stack.shape != grid.shape:
        raise ValueError("stack and grid shapes differ")
    up = patches or jpeg_patches(stack.filters, grid.quant)
    return _apply(stack, up, 8 * block_row + u, 8 * block_col + v, s, inplace)
