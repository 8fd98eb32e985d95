"""Syndrome-trellis codes: binary Viterbi embedding, the two-layer ternary
construction, and the check that multiple-of-4 edits leave extraction intact.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._backend import core
from .imaging import COEFF_LIMIT, FormatError, JpegCoeffGrid

JPEG_PARITY_OFFSET = 2048


class EmbeddingError(RuntimeError):
    """No stego vector satisfies the syndrome under the given costs."""


def default_submatrix(h: int, width: int) -> np.ndarray:
    """Fixed pseudo-random h x width submatrix whose columns have top and bottom bits set."""
    if not 1 <= h <= 12:
        raise ValueError("constraint height must be in [1, 12]")
    rng = np.random.default_rng(0x5EC0DE + 4099 * h + width)
    cols = rng.integers(0, 1 << h, size=width)
    cols |= 1 | (1 << (h - 1))
    return ((cols[None, :] >> np.arange(h)[:, None]) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class StcCode:
    """Parity-check matrix H built by sliding ``sub_matrix`` down the diagonal.

    Message bit ``i`` owns cover columns ``[floor(i*n/m), floor((i+1)*n/m))``;
    column ``c`` of that block carries column ``c`` of the submatrix in rows
    ``i .. i+h-1`` (rows past ``m`` are dropped).
    """

    sub_matrix: np.ndarray
    cover_len: int
    msg_len: int

    def __post_init__(self):
        sub = np.asarray(self.sub_matrix, dtype=np.uint8)
        if sub.ndim != 2 or not np.isin(sub, (0, 1)).all():
            raise ValueError("submatrix must be a 2-D binary matrix")
        h, b = sub.shape
        if not 1 <= h <= 12:
            raise ValueError(f"constraint height {h} outside [1, 12]")
        if sub[0, 0] != 1:
            raise ValueError("first row of the submatrix must start with 1")
        if self.msg_len < 0 or self.cover_len < 1 or self.msg_len > self.cover_len:
            raise ValueError("need 0 <= msg_len <= cover_len")
        if self.msg_len and b < self.width:
            raise ValueError(f"submatrix width {b} < required {self.width}")
        sub.setflags(write=False)
        object.__setattr__(self, "sub_matrix", sub)

    @classmethod
    def default(cls, cover_len: int, msg_len: int, h: int = 7) -> "StcCode":
        width = -(-cover_len // msg_len) if msg_len else 1
        return cls(default_submatrix(h, width), cover_len, msg_len)

    @property
    def h(self) -> int:
        return self.sub_matrix.shape[0]

    @property
    def width(self) -> int:
        return -(-self.cover_len // self.msg_len) if self.msg_len else 1

    @cached_property
    def block_ends(self) -> np.ndarray:
        i = np.arange(1, self.msg_len + 1, dtype=np.int64)
        return (i * self.cover_len) // self.msg_len

    @cached_property
    def column_masks(self) -> np.ndarray:
        """h-bit integer per cover column (bit r = submatrix row r)."""
        weights = (1 << np.arange(self.h, dtype=np.int64))[:, None]
        sub_cols = (self.sub_matrix.astype(np.int64) * weights).sum(axis=0)
        masks = np.zeros(self.cover_len, dtype=np.int64)
        starts = np.concatenate(([0], self.block_ends[:-1]))
        for start, end in zip(starts, self.block_ends):
            masks[start:end] = sub_cols[: end - start]
        return masks

    @cached_property
    def _block_of_column(self) -> np.ndarray:
        return np.searchsorted(self.block_ends, np.arange(self.cover_len), side="right")

    def parity_check_matrix(self) -> np.ndarray:
        """Dense H (msg_len x cover_len); only sensible for small codes."""
        H = np.zeros((self.msg_len, self.cover_len), dtype=np.uint8)
        starts = np.concatenate(([0], self.block_ends[:-1]))
        for i, (start, end) in enumerate(zip(starts, self.block_ends)):
            rows = min(self.h, self.msg_len - i)
            H[i : i + rows, start:end] = self.sub_matrix[:rows, : end - start]
        return H

    def syndrome(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).ravel() & 1
        if bits.shape[0] != self.cover_len:
            raise ValueError(f"expected {self.cover_len} bits, got {bits.shape[0]}")
        out = np.zeros(self.msg_len + self.h, dtype=np.int64)
        blk = self._block_of_column
        masks = self.column_masks
        for r in range(self.h):
            hit = bits & (masks >> r) & 1
            np.add.at(out, blk + r, hit)
        return (out[: self.msg_len] & 1).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, StcCode):
            return NotImplemented
        return (
            self.cover_len == other.cover_len
            and self.msg_len == other.msg_len
            and np.array_equal(self.sub_matrix, other.sub_matrix)
        )


def _bits(values, n: int | None = None, name: str = "bits") -> np.ndarray:
    arr = np.asarray(values).ravel()
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name}: expected length {n}, got {arr.shape[0]}")
    return np.ascontiguousarray(arr, dtype=np.uint8)


def stc_embed_binary(cover_bits, costs, message, code: StcCode) -> np.ndarray:
    """Stego bits with syndrome ``message`` of minimum total flip cost."""
    return _embed_binary(cover_bits, costs, message, code)[0]


def _embed_binary(cover_bits, costs, message, code: StcCode):
    x = _bits(cover_bits, code.cover_len, "cover_bits")
    msg = _bits(message, code.msg_len, "message")
    rho = np.ascontiguousarray(np.asarray(costs, dtype=np.float64).ravel())
    if rho.shape[0] != code.cover_len:
        raise ValueError("costs length does not match cover length")
    if np.isnan(rho).any() or (rho < 0).any():
        raise ValueError("costs must be non-negative")
    stego, total = core.viterbi(x, rho, code.column_masks, code.block_ends, msg, code.h)
    if not np.isfinite(total):
        raise EmbeddingError("syndrome unreachable with finite cost")
    return np.asarray(stego, dtype=np.uint8), float(total)


def stc_extract_binary(stego_bits, code: StcCode) -> np.ndarray:
    return code.syndrome(_bits(stego_bits, code.cover_len, "stego_bits"))


# --------------------------------------------------------------------------- ternary


@dataclass(frozen=True)
class TernaryKey:
    """Layer codes for the 2nd-LSB plane (embedded first) and the 1st-LSB plane."""

    layer2: StcCode
    layer1: StcCode

    def __post_init__(self):
        if self.layer2.cover_len != self.layer1.cover_len:
            raise ValueError("layer codes cover different numbers of units")

    @property
    def cover_len(self) -> int:
        return self.layer2.cover_len

    @property
    def msg_len(self) -> int:
        return self.layer2.msg_len + self.layer1.msg_len

    @classmethod
    def create(cls, cover_len: int, msg_len: int, h: int = 7,
               layer2_len: int | None = None) -> "TernaryKey":
        """Default key; the message is split evenly unless ``layer2_len`` is given."""
        if layer2_len is None:
            layer2_len = (msg_len + 1) // 2
        if not 0 <= layer2_len <= msg_len:
            raise ValueError("layer2_len must lie in [0, msg_len]")
        return cls(
            StcCode.default(cover_len, layer2_len, h),
            StcCode.default(cover_len, msg_len - layer2_len, h),
        )

    def dumps(self) -> str:
        lines = ["TKEY1", f"units {self.cover_len}"]
        for name, code in (("layer2", self.layer2), ("layer1", self.layer1)):
            rows = " ".join("".join(str(int(b)) for b in row) for row in code.sub_matrix)
            lines.append(f"{name} {code.msg_len} {rows}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TernaryKey":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "TKEY1":
            raise FormatError("line 1: expected 'TKEY1'")
        try:
            tag, units = lines[1].split()
            if tag != "units":
                raise ValueError
            n = int(units)
        except (ValueError, IndexError):
            raise FormatError("line 2: expected 'units <n>'") from None
        codes = {}
        for lineno, line in enumerate(lines[2:4], start=3):
            toks = line.split()
            if len(toks) < 3 or toks[0] not in ("layer2", "layer1"):
                raise FormatError(f"line {lineno}: expected 'layerN <msg_len> <rows...>'")
            rows = toks[2:]
            if len({len(r) for r in rows}) != 1 or any(set(r) - {"0", "1"} for r in rows):
                raise FormatError(f"line {lineno}: submatrix rows must be equal-length bit strings")
            try:
                sub = np.array([[int(c) for c in r] for r in rows], dtype=np.uint8)
                codes[toks[0]] = StcCode(sub, n, int(toks[1]))
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
        if set(codes) != {"layer2", "layer1"}:
            raise FormatError("key must define layer2 and layer1")
        return cls(codes["layer2"], codes["layer1"])


def _unit_values(image) -> tuple[np.ndarray, int, int, int]:
    """Flattened int64 unit values plus the parity offset and value range."""
    if isinstance(image, JpegCoeffGrid):
        return (image.coeffs.astype(np.int64).ravel(), JPEG_PARITY_OFFSET,
                -COEFF_LIMIT, COEFF_LIMIT)
    arr = np.asarray(image)
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError("unit values must be integers")
    return arr.astype(np.int64).ravel(), 0, 0, 255


def parity_planes(values, offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(1st LSB, 2nd LSB) of ``values + offset``."""
    v = np.asarray(values, dtype=np.int64) + offset
    return (v & 1).astype(np.uint8), ((v >> 1) & 1).astype(np.uint8)


def ternary_extract(image, key: TernaryKey) -> np.ndarray:
    """Layer-2 syndrome followed by layer-1 syndrome of the unit values."""
    values, offset, _, _ = _unit_values(image)
    if values.shape[0] != key.cover_len:
        raise ValueError(f"key expects {key.cover_len} units, image has {values.shape[0]}")
    b1, b2 = parity_planes(values, offset)
    return np.concatenate((key.layer2.syndrome(b2), key.layer1.syndrome(b1)))


def ternary_embed(cover, rho_plus, rho_minus, message, key: TernaryKey):
    """Embed ``message`` with changes in {-1, 0, +1} using two binary STC layers.

    The 2nd-LSB plane is coded first; each unit's flip cost is that of the
    cheapest +-1 change achieving the other bit.  The 1st-LSB plane is then
    coded over the candidates that keep the chosen 2nd LSB (units whose 2nd LSB
    was flipped are wet).  Returns an object of the same kind as ``cover``.
    """
    values, offset, lo, hi = _unit_values(cover)
    n = values.shape[0]
    if n != key.cover_len:
        raise ValueError(f"key expects {key.cover_len} units, cover has {n}")
    msg = _bits(message, key.msg_len, "message")
    rp = np.asarray(rho_plus, dtype=np.float64).ravel()
    rm = np.asarray(rho_minus, dtype=np.float64).ravel()
    if rp.shape[0] != n or rm.shape[0] != n:
        raise ValueError("cost maps do not match the cover size")
    rp = np.where(values + 1 > hi, np.inf, rp)
    rm = np.where(values - 1 < lo, np.inf, rm)

    b1, b2 = parity_planes(values, offset)
    r = (values + offset) & 3
    # the single +-1 neighbour whose 2nd LSB differs: -1 for residues 0, 2; +1 for 1, 3
    flip2_up = (r & 1).astype(bool)
    cost2 = np.where(flip2_up, rp, rm)
    y2 = stc_embed_binary(b2, cost2, msg[: key.layer2.msg_len], key.layer2)
    moved = y2 != b2
    base = values + np.where(moved, np.where(flip2_up, 1, -1), 0)

    # unchanged 2nd LSB: flip 1st LSB by +1 on even residues, -1 on odd ones
    up1 = r % 2 == 0
    cost1 = np.where(moved, np.inf, np.where(up1, rp, rm))
    base_b1 = ((base + offset) & 1).astype(np.uint8)
    y1 = stc_embed_binary(base_b1, cost1, msg[key.layer2.msg_len :], key.layer1)
    out = base + np.where(y1 != base_b1, np.where(up1, 1, -1), 0)

    if isinstance(cover, JpegCoeffGrid):
        return cover.with_coeffs(out.reshape(cover.shape))
    arr = np.asarray(cover)
    return out.reshape(arr.shape).astype(arr.dtype)


def embedding_cost(cover, stego, rho_plus, rho_minus) -> float:
    """Sum of +1/-1 change costs between ``cover`` and ``stego``."""
    x, _, _, _ = _unit_values(cover)
    y, _, _, _ = _unit_values(stego)
    d = y - x
    if np.abs(d).max(initial=0) > 1:
        raise ValueError("changes larger than 1")
    rp = np.asarray(rho_plus, dtype=np.float64).ravel()
    rm = np.asarray(rho_minus, dtype=np.float64).ravel()
    return float(rp[d == 1].sum() + rm[d == -1].sum())


def check_robustness(stego, delta, key: TernaryKey) -> bool:
    """True iff every entry of ``delta`` is a multiple of 4 and extraction is unchanged."""
    values, _, _, _ = _unit_values(stego)
    d = np.asarray(delta)
    shape = stego.shape if isinstance(stego, JpegCoeffGrid) else np.asarray(stego).shape
    if d.shape != shape:
        raise ValueError(f"delta shape {d.shape} != stego shape {shape}")
    d = d.astype(np.int64).ravel()
    multiple_of_4 = bool(np.all(d % 4 == 0))
    moved = values + d
    if isinstance(stego, JpegCoeffGrid):
        b1, b2 = parity_planes(moved, JPEG_PARITY_OFFSET)
    else:
        b1, b2 = parity_planes(moved)
    after = np.concatenate((key.layer2.syndrome(b2), key.layer1.syndrome(b1)))
    unchanged = bool(np.array_equal(after, ternary_extract(stego, key)))
    if multiple_of_4 and not unchanged:
        raise AssertionError("multiple-of-4 edit changed the extracted message")
    return multiple_of_4 and unchanged


def bits_from_hex(text: str, nbits: int) -> np.ndarray:
    """First ``nbits`` bits of a hex string, most significant bit first."""
    text = text.strip().lower().removeprefix("0x")
    try:
        raw = bytes.fromhex(text if len(text) % 2 == 0 else text + "0")
    except ValueError:
        raise FormatError("message is not a hex string") from None
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if bits.shape[0] < nbits:
        raise FormatError(f"message has {bits.shape[0]} bits, key needs {nbits}")
    return bits[:nbits].copy()


def bits_to_hex(bits) -> str:
    return np.packbits(_bits(bits)).tobytes().hex()
