"""Modification statistics and corpus reports comparing the two SPP algorithms."""
from __future__ import annotations

import csv
import io
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .costs import cost_map, simulate_embedding
from .filters import learn_filter_set
from .imaging import JpegCoeffGrid, load_image
from .spp import SppResult, spp_fast, spp_general

WINDOW = 5
IMAGE_EXTS = (".pgm", ".pnm", ".jcg")
COLUMNS = ("id", "domain", "payload", "r_pm", "d_y", "locality", "opposition",
           "amp4_share", "d_yx", "d_zx", "time_general", "time_fast", "error")


class UndefinedStatistic(ValueError):
    """The statistic has an empty denominator (e.g. no modifications)."""


def _units(image) -> np.ndarray:
    if isinstance(image, JpegCoeffGrid):
        return image.coeffs.astype(np.int64)
    return np.asarray(image).astype(np.int64)


def _same_shape(*arrays) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def post_modification_rate(stego, enhanced) -> float:
    """Fraction of units where ``enhanced`` differs from ``stego``."""
    y, z = _units(stego), _units(enhanced)
    _same_shape(y, z)
    return int(np.count_nonzero(z != y)) / y.size


def modification_density(cover, stego) -> float:
    """Mean fill |B|/25 over the fully interior 5x5 windows holding a modification."""
    x, y = _units(cover), _units(stego)
    _same_shape(x, y)
    changed = (x != y).astype(np.int64)
    if not changed.any():
        raise UndefinedStatistic("no modifications: density is undefined")
    if min(changed.shape) < WINDOW:
        raise ValueError(f"image smaller than the {WINDOW}x{WINDOW} window")
    # window sums from a 2-D prefix table
    c = np.pad(changed.cumsum(0).cumsum(1), ((1, 0), (1, 0)))
    counts = (c[WINDOW:, WINDOW:] - c[:-WINDOW, WINDOW:]
              - c[WINDOW:, :-WINDOW] + c[:-WINDOW, :-WINDOW])
    hit = counts[counts > 0]
    if hit.size == 0:
        raise UndefinedStatistic("modifications lie only outside full windows")
    return float(hit.sum() / (WINDOW * WINDOW * hit.size))


def _ratio(num: int, den: int, what: str) -> float:
    if den == 0:
        raise UndefinedStatistic(f"{what}: empty set")
    return num / den


def locality_ratio(cover, stego, enhanced) -> float:
    """Share of post-modified units that the embedding had already changed."""
    x, y, z = _units(cover), _units(stego), _units(enhanced)
    _same_shape(x, y, z)
    post = z != y
    return _ratio(int(np.count_nonzero(post & (y != x))), int(np.count_nonzero(post)),
                  "locality ratio")


def opposition_ratio(cover, stego, enhanced) -> float:
    """Among post-modifications at stego-changed units, the share undoing the change's sign."""
    x, y, z = _units(cover), _units(stego), _units(enhanced)
    _same_shape(x, y, z)
    sel = (z != y) & (y != x)
    opposite = np.sign(z - y)[sel] == -np.sign(y - x)[sel]
    return _ratio(int(np.count_nonzero(opposite)), int(np.count_nonzero(sel)),
                  "opposition ratio")


def amplitude_histogram(stego, enhanced) -> dict[int, int]:
    """Counts of |Z - Y| over post-modified units."""
    y, z = _units(stego), _units(enhanced)
    _same_shape(y, z)
    amp = np.abs(z - y)
    vals, counts = np.unique(amp[amp != 0], return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedStatistic("zero variance")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


@dataclass
class ModStats:
    r_pm: float
    d_y: float | None
    locality: float | None
    opposition: float | None
    amplitudes: dict = field(default_factory=dict)
    d_yx: float = 0.0
    d_zx: float = 0.0
    time_general: float | None = None
    time_fast: float | None = None

    @property
    def amp4_share(self) -> float | None:
        total = sum(self.amplitudes.values())
        return self.amplitudes.get(4, 0) / total if total else None


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedStatistic:
        return None


def mod_stats(cover, stego, general: SppResult, fast: SppResult | None = None,
              algorithm: str = "fast") -> ModStats:
    """Statistics of one pair.

    Locality, opposition and amplitudes describe the general (exhaustive) run,
    where they are informative; the rate and final distance follow
    ``algorithm``.
    """
    chosen = fast if algorithm == "fast" and fast is not None else general
    return ModStats(
        r_pm=post_modification_rate(stego, chosen.enhanced),
        d_y=_maybe(modification_density, cover, stego),
        locality=_maybe(locality_ratio, cover, stego, general.enhanced),
        opposition=_maybe(opposition_ratio, cover, stego, general.enhanced),
        amplitudes=amplitude_histogram(stego, general.enhanced),
        d_yx=chosen.initial_distance,
        d_zx=chosen.final_distance,
        time_general=general.wall_time,
        time_fast=fast.wall_time if fast is not None else None,
    )


# --------------------------------------------------------------------------- batch


@dataclass(frozen=True)
class ReportConfig:
    payload: float = 0.4
    cost: str | None = None  # domain default
    seed: int = 0
    algorithm: str = "fast"
    filter_kind: str | None = None
    w: int | None = None
    timing: bool = False  # wall times make the CSV non-reproducible


def corpus_pairs(root) -> list[tuple[str, str, str | None]]:
    """``(id, cover_path, stego_path_or_None)`` sorted by file name.

    ``root`` either holds ``cover/`` and optionally ``stego/`` with matching
    names, or is itself a flat directory of covers.
    """
    cover_dir = os.path.join(root, "cover")
    stego_dir = os.path.join(root, "stego")
    if not os.path.isdir(cover_dir):
        cover_dir, stego_dir = root, None
    names = sorted(n for n in os.listdir(cover_dir)
                   if os.path.splitext(n)[1].lower() in IMAGE_EXTS)
    pairs = []
    for name in names:
        stego = os.path.join(stego_dir, name) if stego_dir else None
        if stego is not None and not os.path.exists(stego):
            stego = None
        pairs.append((os.path.splitext(name)[0], os.path.join(cover_dir, name), stego))
    return pairs


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _image_seed(seed: int, name: str) -> int:
    # independent of corpus ordering and of the worker that runs it
    return (seed * 0x9E3779B1 + zlib.crc32(name.encode())) % 2**63


def _row(item) -> dict:
    (ident, cover_path, stego_path), config = item
    row = dict.fromkeys(COLUMNS, "")
    row["id"] = ident
    try:
        cover = load_image(cover_path)
        jpeg = isinstance(cover, JpegCoeffGrid)
        row["domain"] = "jpeg" if jpeg else "spatial"
        if stego_path is None:
            rho = cost_map(cover, config.cost)
            stego = simulate_embedding(cover, rho, config.payload,
                                       seed=_image_seed(config.seed, ident))
            row["payload"] = _fmt(float(config.payload))
        else:
            stego = load_image(stego_path)
        filters = learn_filter_set(cover, config.filter_kind, config.w)
        general = spp_general(cover, stego, filters)
        fast = spp_fast(cover, stego, filters)
        st = mod_stats(cover, stego, general, fast, config.algorithm)
        row.update(r_pm=_fmt(st.r_pm), d_y=_fmt(st.d_y), locality=_fmt(st.locality),
                   opposition=_fmt(st.opposition), amp4_share=_fmt(st.amp4_share),
                   d_yx=_fmt(st.d_yx), d_zx=_fmt(st.d_zx))
        if config.timing:
            row.update(time_general=_fmt(st.time_general), time_fast=_fmt(st.time_fast))
    except Exception as exc:  # row-level failure; the batch continues
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def batch_report(root, config: ReportConfig = ReportConfig(), jobs: int = 1) -> list[dict]:
    items = [(pair, config) for pair in corpus_pairs(root)]
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_row, items))
    return [_row(it) for it in items]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def write_report(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
