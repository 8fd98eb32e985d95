"""Per-image linear-prediction filters used to compute residuals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imaging import FormatError, JpegCoeffGrid, decompress

RIDGE = 1e-8
# reciprocal condition number below which the normal equations are rejected
MIN_RCOND = 1e-12
KINDS = ("outer-only", "pair", "full")

DEFAULT_SPATIAL = ("full", 7)
DEFAULT_JPEG = ("pair", 3)


class LearningError(RuntimeError):
    """The least-squares system is degenerate; use a fixed filter instead."""


def _windows(img: np.ndarray, w: int):
    half = w // 2
    win = sliding_window_view(img, w, axis=1).reshape(-1, w)
    target = win[:, half]
    feats = np.delete(win, half, axis=1)
    return feats, target


def _normal_equations(img: np.ndarray, w: int):
    ata = np.zeros((w - 1, w - 1))
    aty = np.zeros(w - 1)
    # float addition commutes, so X and X.T yield bit-identical systems
    for view in (img, img.T):
        feats, target = _windows(view, w)
        ata = ata + feats.T @ feats
        aty = aty + feats.T @ target
    return ata, aty


def learn_base_filter(cover, w: int) -> np.ndarray:
    """Learn a 1 x w base filter whose center tap is -1.

    The w-1 prediction weights minimize the squared error of predicting each
    pixel from its row neighbours, pooled over the rows of the image and of
    its transpose.  Only windows fully inside the image are used.  A JPEG grid
    is decompressed first.
    """
    if w % 2 == 0 or not 3 <= w <= 15:
        raise ValueError(f"filter width must be odd and in [3, 15], got {w}")
    img = decompress(cover) if isinstance(cover, JpegCoeffGrid) else np.asarray(cover)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    img = img.astype(np.float64)
    n1, n2 = img.shape
    samples = n1 * max(n2 - w + 1, 0) + n2 * max(n1 - w + 1, 0)
    if samples < 10 * (w - 1):
        raise ValueError(f"image too small: {samples} samples for w={w}")
    ata, aty = _normal_equations(img, w)
    ata = ata + RIDGE * np.eye(w - 1)
    eig = np.linalg.eigvalsh(ata)
    if eig[0] <= MIN_RCOND * eig[-1]:
        raise LearningError(
            "prediction system is rank-deficient (flat image?); fall back to a fixed filter"
        )
    weights = np.linalg.solve(ata, aty)
    return np.insert(weights, w // 2, -1.0)


def residual_energy(image, taps) -> float:
    """Sum of squared residuals of ``taps`` over the pooled interior windows."""
    taps = np.asarray(taps, dtype=np.float64)
    img = np.asarray(image, dtype=np.float64)
    total = 0.0
    for view in (img, img.T):
        win = sliding_window_view(view, taps.shape[0], axis=1)
        total += float(np.sum((win @ taps) ** 2))
    return total


@dataclass(frozen=True, eq=False)
class FilterSet:
    """Kernels derived from a base filter; ``taps`` is None for hand-built sets."""

    kind: str
    w: int
    kernels: tuple
    taps: np.ndarray | None = None

    def __post_init__(self):
        if not self.kernels:
            raise ValueError("filter set is empty")
        ks = []
        for k in self.kernels:
            k = np.array(k, dtype=np.float64)
            if k.ndim == 1:
                k = k[None, :]
            if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
                raise ValueError(f"kernel shape {k.shape} must be 2-D with odd sides")
            if not np.all(np.isfinite(k)):
                raise ValueError("kernel taps must be finite")
            k.setflags(write=False)
            ks.append(k)
        object.__setattr__(self, "kernels", tuple(ks))

    @classmethod
    def from_kernels(cls, *kernels) -> "FilterSet":
        ks = [np.atleast_2d(np.asarray(k, dtype=np.float64)) for k in kernels]
        return cls("custom", max(max(k.shape) for k in ks), tuple(ks))

    def __len__(self) -> int:
        return len(self.kernels)

    @property
    def max_half(self) -> tuple[int, int]:
        return (max(k.shape[0] for k in self.kernels) // 2,
                max(k.shape[1] for k in self.kernels) // 2)

    def summed(self) -> "FilterSet":
        """Single kernel equal to the sum of all kernels (residual maps summed)."""
        hy, hx = self.max_half
        total = np.zeros((2 * hy + 1, 2 * hx + 1))
        for k in self.kernels:
            oy = hy - k.shape[0] // 2
            ox = hx - k.shape[1] // 2
            total[oy : oy + k.shape[0], ox : ox + k.shape[1]] += k
        return FilterSet(self.kind + "+sum", self.w, (total,), self.taps)

    def dumps(self) -> str:
        if self.taps is None:
            raise ValueError("only learned filter sets can be serialized")
        taps = " ".join(format(float(t), ".17g") for t in self.taps)
        return f"FILTERSET1\nkind {self.kind}\nw {self.w}\ntaps {taps}\n"

    @classmethod
    def loads(cls, text: str) -> "FilterSet":
        fields = {}
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "FILTERSET1":
            raise FormatError("line 1: expected 'FILTERSET1'")
        for lineno, line in enumerate(lines[1:], start=2):
            key, _, rest = line.strip().partition(" ")
            if key not in ("kind", "w", "taps"):
                raise FormatError(f"line {lineno}: unknown field {key!r}")
            fields[key] = (lineno, rest.strip())
        if set(fields) != {"kind", "w", "taps"}:
            raise FormatError("filter file needs kind, w and taps")
        kind = fields["kind"][1]
        try:
            w = int(fields["w"][1])
        except ValueError:
            raise FormatError(f"line {fields['w'][0]}: w is not an integer") from None
        try:
            taps = np.array([float(t) for t in fields["taps"][1].split()])
        except ValueError:
            raise FormatError(f"line {fields['taps'][0]}: bad tap value") from None
        if taps.shape[0] != w:
            raise FormatError(f"line {fields['taps'][0]}: expected {w} taps")
        try:
            return build_filter_set(taps, kind)
        except ValueError as exc:
            raise FormatError(str(exc)) from None


def build_filter_set(base, kind: str = "full") -> FilterSet:
    """Kernels from ``base``: outer-only {B (x) B^T}, pair {B, B^T}, full {B, B^T, B (x) B^T}."""
    taps = np.asarray(base, dtype=np.float64).ravel()
    w = taps.shape[0]
    if w % 2 == 0 or w < 3:
        raise ValueError("base filter length must be odd and >= 3")
    if kind not in KINDS:
        raise ValueError(f"unknown filter set kind {kind!r}; expected one of {KINDS}")
    row = taps[None, :]
    col = taps[:, None]
    outer = np.outer(taps, taps)
    kernels = {"outer-only": (outer,), "pair": (row, col), "full": (row, col, outer)}[kind]
    t = taps.copy()
    t.setflags(write=False)
    return FilterSet(kind, w, kernels, t)


def learn_filter_set(cover, kind: str | None = None, w: int | None = None) -> FilterSet:
    """Learn the base filter from ``cover`` and build the set (domain defaults if unset)."""
    dkind, dw = DEFAULT_JPEG if isinstance(cover, JpegCoeffGrid) else DEFAULT_SPATIAL
    kind = kind or dkind
    w = w or dw
    return build_filter_set(learn_base_filter(cover, w), kind)
