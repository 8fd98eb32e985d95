"""Shared generators and brute-force oracles for the test suite."""
import itertools

import numpy as np
from scipy import ndimage

from stegospp.imaging import compress


def fractal(rng, n=64, beta=2.0):
    """1/f^beta noise, zero mean and unit variance."""
    f = np.fft.fftfreq(n)
    fx, fy = np.meshgrid(f, f)
    r = np.hypot(fx, fy)
    r[0, 0] = 1.0
    spec = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / r ** (beta / 2)
    im = np.real(np.fft.ifft2(spec))
    return (im - im.mean()) / im.std()


def texture_image(rng, n=64):
    im = 128 + 35 * fractal(rng, n, rng.uniform(1.6, 2.6)) + rng.normal(size=(n, n)) * 2
    return np.clip(np.round(im), 0, 255).astype(np.uint8)


def texture_grid(rng, n=64, quality=75):
    return compress(texture_image(rng, n), quality)


def naive_correlate(img, kern):
    """Same-size zero-padded cross-correlation with explicit loops."""
    img = np.asarray(img, dtype=np.float64)
    kh, kw = kern.shape
    cy, cx = kh // 2, kw // 2
    out = np.zeros_like(img)
    n1, n2 = img.shape
    for i in range(n1):
        for j in range(n2):
            acc = 0.0
            for a in range(kh):
                for b in range(kw):
                    y, x = i + a - cy, j + b - cx
                    if 0 <= y < n1 and 0 <= x < n2:
                        acc += kern[a, b] * img[y, x]
            out[i, j] = acc
    return out


def naive_idct(block):
    """Direct-summation orthonormal 2-D inverse DCT."""
    out = np.zeros((8, 8))
    for x in range(8):
        for y in range(8):
            acc = 0.0
            for u in range(8):
                for v in range(8):
                    cu = np.sqrt(1 / 8) if u == 0 else np.sqrt(2 / 8)
                    cv = np.sqrt(1 / 8) if v == 0 else np.sqrt(2 / 8)
                    acc += (cu * cv * block[u, v] * np.cos((2 * x + 1) * u * np.pi / 16)
                            * np.cos((2 * y + 1) * v * np.pi / 16))
            out[x, y] = acc
    return out


def dense_h(code):
    """Materialize the parity-check matrix by sliding the submatrix column by column."""
    sub = np.asarray(code.sub_matrix)
    h, _ = sub.shape
    n, m = code.cover_len, code.msg_len
    H = np.zeros((m, n), dtype=np.uint8)
    for i in range(m):
        lo, hi = (i * n) // m, ((i + 1) * n) // m
        for k, j in enumerate(range(lo, hi)):
            for r in range(h):
                if i + r < m:
                    H[i + r, j] = sub[r, k]
    return H


def all_bit_vectors(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8)


def brute_force_coset(H, cover_bits, costs, message):
    """Minimum flip cost over every y with H y = message (mod 2)."""
    ys = all_bit_vectors(H.shape[1])
    ok = np.all((ys @ H.T) % 2 == message, axis=1)
    if not ok.any():
        return np.inf
    flips = ys[ok] != cover_bits
    return float((flips * costs).sum(axis=1).min())


def scipy_correlate(img, kern):
    return ndimage.correlate(np.asarray(img, dtype=np.float64), kern, mode="constant")


PHOTO_SOURCES = ("camera", "moon", "astronaut", "coffee", "chelsea", "rocket", "brick",
                 "grass", "gravel", "cell", "clock", "immunohistochemistry", "coins",
                 "retina", "hubble_deep_field", "text", "page", "horse")


def _gray(im):
    im = np.asarray(im, dtype=np.float64)
    if im.ndim == 3:
        im = im[..., :3] @ np.array([0.2125, 0.7154, 0.0721])
        if im.max() <= 1.0:
            im = im * 255
    elif im.max() <= 1.0:
        im = im * 255
    return np.clip(np.round(im), 0, 255).astype(np.uint8)


def photo_tiles(count=100, size=256, stride=128, min_std=8.0):
    """Deterministic grayscale crops of the images bundled with scikit-image.

    Sources are visited round-robin so the corpus mixes all of them; within a
    source tiles go in (row, column) order.  Flat tiles are skipped.
    Transposed tiles are appended only if the plain ones run out.
    """
    from skimage import data

    per_source = []
    for name in PHOTO_SOURCES:
        found = []
        try:
            img = _gray(getattr(data, name)())
        except Exception:  # image missing from this scikit-image build
            continue
        for r in range(0, img.shape[0] - size + 1, stride):
            for c in range(0, img.shape[1] - size + 1, stride):
                t = img[r : r + size, c : c + size]
                if t.std() > min_std and np.count_nonzero(hill_cost_nonwet(t)) > t.size // 2:
                    found.append((f"{name}_{r}_{c}", t))
        per_source.append(found)
    tiles = [t for group in itertools.zip_longest(*per_source) for t in group if t is not None]
    if len(tiles) < count:
        tiles += [(f"{n}_T", t.T.copy()) for n, t in tiles[: count - len(tiles)]]
    return tiles[:count]


def hill_cost_nonwet(img):
    from stegospp.costs import WET_COST, hill_cost

    return hill_cost(img) < WET_COST


def smooth_field(rng, n=128, noise=1e-3):
    i, j = np.mgrid[:n, :n]
    img = 128.0
    for _ in range(4):
        period = rng.uniform(60, 200)
        fi, fj = rng.uniform(-1, 1, 2)
        img = img + rng.uniform(20, 60) * np.sin(2 * np.pi * (fi * i + fj * j) / period
                                                 + rng.uniform(0, 6))
    return img + rng.normal(scale=noise, size=(n, n))
