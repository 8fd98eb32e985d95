"""Image containers and I/O.

Spatial images are plain 2-D ``uint8`` numpy arrays.  JPEG images are held as
quantized DCT coefficient grids (:class:`JpegCoeffGrid`) laid out in place:
coefficient ``(u, v)`` of block ``(r, c)`` lives at ``coeffs[8*r + u, 8*c + v]``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

COEFF_LIMIT = 2048

# IJG luminance table (quality 50).
_LUMA_Q50 = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)


class FormatError(ValueError):
    """Raised for malformed PGM / JCG input."""


def as_gray(image, min_size: int = 1) -> np.ndarray:
    """Validate and return ``image`` as a 2-D uint8 array (no copy if possible)."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise ValueError(f"image {arr.shape} smaller than {min_size}x{min_size}")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
            raise ValueError("pixel values must be integers")
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("pixel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


# --------------------------------------------------------------------------- PGM


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        ch = data[pos : pos + 1]
        if ch == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError(f"unexpected end of PGM header at byte {start}")
    return data[start:pos], pos


def load_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM file."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic != b"P5":
        raise FormatError(f"unsupported PGM variant {magic!r} at byte 0 (only P5)")
    fields = []
    for name in ("width", "height", "maxval"):
        offset = pos
        tok, pos = _read_token(data, pos)
        if not tok.isdigit():
            raise FormatError(f"bad {name} {tok!r} at byte {offset}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"maxval {maxval} != 255 (header ends at byte {pos})")
    if width < 1 or height < 1:
        raise FormatError(f"empty image {width}x{height} in header ending at byte {pos}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError(f"missing whitespace after header at byte {pos}")
    pos += 1
    need = width * height
    if len(data) - pos < need:
        raise FormatError(
            f"truncated payload: expected {need} bytes from byte {pos}, "
            f"file ends at byte {len(data)}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return pixels.reshape(height, width).copy()


def save_pgm(image, path) -> None:
    """Write ``image`` as canonical P5: ``P5\\n<w> <h>\\n255\\n`` + row-major bytes."""
    img = as_gray(image)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(img).tobytes())


# --------------------------------------------------------------------------- JCG


@dataclass(frozen=True, eq=False)
class JpegCoeffGrid:
    """Quantized DCT coefficients of a grayscale JPEG plus its quantization table."""

    coeffs: np.ndarray
    quant: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs)
        quant = np.asarray(self.quant)
        if coeffs.ndim != 2 or coeffs.shape[0] % 8 or coeffs.shape[1] % 8 or coeffs.size == 0:
            raise ValueError(f"coefficient grid shape {coeffs.shape} not a multiple of 8")
        if not np.issubdtype(coeffs.dtype, np.integer):
            if not np.all(coeffs == np.round(coeffs)):
                raise ValueError("coefficients must be integers")
        coeffs = coeffs.astype(np.int32)
        if np.abs(coeffs).max() > COEFF_LIMIT:
            raise ValueError(f"coefficient magnitude exceeds {COEFF_LIMIT}")
        quant = quant.astype(np.int32).reshape(8, 8)
        if quant.min() < 1:
            raise ValueError("quantization entries must be >= 1")
        coeffs.setflags(write=False)
        quant.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "quant", quant)

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape

    @property
    def blocks(self) -> tuple[int, int]:
        return self.coeffs.shape[0] // 8, self.coeffs.shape[1] // 8

    def with_coeffs(self, coeffs) -> "JpegCoeffGrid":
        return JpegCoeffGrid(coeffs, self.quant)

    def quant_grid(self) -> np.ndarray:
        """Quantization step of every coefficient position, tiled to the grid shape."""
        by, bx = self.blocks
        return np.tile(self.quant, (by, bx))

    def __eq__(self, other):
        if not isinstance(other, JpegCoeffGrid):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs) and np.array_equal(self.quant, other.quant)


def _blocks_to_rows(coeffs: np.ndarray) -> np.ndarray:
    h, w = coeffs.shape
    return coeffs.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3).reshape(-1, 64)


def _rows_to_blocks(rows: np.ndarray, height: int, width: int) -> np.ndarray:
    by, bx = height // 8, width // 8
    return rows.reshape(by, bx, 8, 8).transpose(0, 2, 1, 3).reshape(height, width)


def _parse_ints(line: str, lineno: int, count: int) -> list[int]:
    toks = line.split()
    if len(toks) != count:
        raise FormatError(f"line {lineno}: expected {count} integers, got {len(toks)}")
    try:
        return [int(t) for t in toks]
    except ValueError:
        bad = next(t for t in toks if not t.lstrip("+-").isdigit())
        raise FormatError(f"line {lineno}: non-integer token {bad!r}") from None


def load_jcg(path) -> JpegCoeffGrid:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError("line 1: empty file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "JCG1":
        raise FormatError("line 1: expected 'JCG1 <width> <height>'")
    width, height = _parse_ints(" ".join(head[1:]), 1, 2)
    if width <= 0 or height <= 0 or width % 8 or height % 8:
        raise FormatError(f"line 1: dimensions {width}x{height} not divisible by 8")
    if len(lines) < 2:
        raise FormatError("line 2: missing quantization table")
    quant = _parse_ints(lines[1], 2, 64)
    if min(quant) < 1:
        raise FormatError("line 2: quantization entry < 1")
    nblocks = (width // 8) * (height // 8)
    if len(lines) - 2 != nblocks:
        raise FormatError(
            f"line {len(lines) + 1}: expected {nblocks} block lines, got {len(lines) - 2}"
        )
    rows = np.empty((nblocks, 64), dtype=np.int32)
    for k in range(nblocks):
        vals = _parse_ints(lines[2 + k], 3 + k, 64)
        if max(abs(v) for v in vals) > COEFF_LIMIT:
            raise FormatError(f"line {3 + k}: coefficient magnitude exceeds {COEFF_LIMIT}")
        rows[k] = vals
    return JpegCoeffGrid(_rows_to_blocks(rows, height, width), np.array(quant).reshape(8, 8))


def save_jcg(grid: JpegCoeffGrid, path) -> None:
    height, width = grid.shape
    out = [f"JCG1 {width} {height}", " ".join(str(int(q)) for q in grid.quant.ravel())]
    for row in _blocks_to_rows(grid.coeffs):
        out.append(" ".join(str(int(v)) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def load_image(path):
    """Load a ``.pgm`` as an array or a ``.jcg`` as a :class:`JpegCoeffGrid`."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".jcg":
        return load_jcg(path)
    if ext in (".pgm", ".pnm"):
        return load_pgm(path)
    raise FormatError(f"unknown image extension {ext!r} (expected .pgm or .jcg)")


def save_image(image, path) -> None:
    if isinstance(image, JpegCoeffGrid):
        save_jcg(image, path)
    else:
        save_pgm(image, path)


# --------------------------------------------------------------------------- DCT


@lru_cache(maxsize=1)
def dct_matrix() -> np.ndarray:
    """Orthonormal 8-point DCT-II matrix ``C`` (rows are basis vectors)."""
    k = np.arange(8)[:, None]
    n = np.arange(8)[None, :]
    c = np.cos((2 * n + 1) * k * np.pi / 16) * np.sqrt(2 / 8)
    c[0] /= np.sqrt(2)
    c.setflags(write=False)
    return c


def dct_block(block) -> np.ndarray:
    c = dct_matrix()
    return c @ np.asarray(block, dtype=np.float64) @ c.T


def idct_block(block) -> np.ndarray:
    """Orthonormal 2-D inverse DCT of an 8x8 block."""
    c = dct_matrix()
    return c.T @ np.asarray(block, dtype=np.float64) @ c


def basis_image(u: int, v: int) -> np.ndarray:
    """Spatial 8x8 pattern produced by a unit coefficient at frequency ``(u, v)``."""
    c = dct_matrix()
    return np.outer(c[u], c[v])


def _blockwise(arr: np.ndarray, op) -> np.ndarray:
    h, w = arr.shape
    blocks = arr.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    c = dct_matrix()
    if op == "idct":
        out = np.einsum("ki,abkl,lj->abij", c, blocks, c, optimize=True)
    else:
        out = np.einsum("ik,abkl,jl->abij", c, blocks, c, optimize=True)
    return out.transpose(0, 2, 1, 3).reshape(h, w)


def decompress(grid: JpegCoeffGrid) -> np.ndarray:
    """Dequantize, inverse-DCT and level-shift, without rounding or clamping."""
    deq = grid.coeffs.astype(np.float64) * grid.quant_grid()
    return _blockwise(deq, "idct") + 128.0


def quant_table(quality: int) -> np.ndarray:
    """IJG-scaled luminance quantization table for ``quality`` in [1, 100]."""
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in [1, 100]")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    q = (_LUMA_Q50 * scale + 50) // 100
    return np.clip(q, 1, 255).astype(np.int32)


def compress(image, quality: int = 75) -> JpegCoeffGrid:
    """Quantize an image (dimensions multiple of 8) into a coefficient grid."""
    img = as_gray(image)
    if img.shape[0] % 8 or img.shape[1] % 8:
        raise ValueError("image dimensions must be multiples of 8")
    q = quant_table(quality)
    coef = _blockwise(img.astype(np.float64) - 128.0, "dct")
    qgrid = np.tile(q, (img.shape[0] // 8, img.shape[1] // 8))
    return JpegCoeffGrid(np.round(coef / qgrid).astype(np.int32), q)
