"""Embedding costs and the payload-matched embedding simulator.

Only one spatial cost (HILL-style) and one JPEG cost (UERD-style) are
provided: just enough to produce realistic stegos to post-process.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .imaging import COEFF_LIMIT, JpegCoeffGrid, as_gray

WET_COST = 1e10
MAX_PAYLOAD = math.log2(3)

HILL_HIGHPASS = np.array([[-1, 2, -1], [2, -4, 2], [-1, 2, -1]], dtype=np.float64)
HILL_AVG1 = 3
HILL_AVG2 = 15


class CapacityError(ValueError):
    """Requested payload exceeds what the cover can carry."""


def hill_cost(cover) -> np.ndarray:
    """HILL-style cost: ``avg15(1 / avg3(|KB * X|))``, capped at :data:`WET_COST`.

    Kernels: the 3x3 KB high-pass above, then 3x3 and 15x15 box averages, all
    with symmetric boundary extension.
    """
    x = as_gray(cover).astype(np.float64)
    r = np.abs(ndimage.correlate(x, HILL_HIGHPASS, mode="reflect"))
    w = ndimage.uniform_filter(r, HILL_AVG1, mode="reflect")
    with np.errstate(divide="ignore"):
        rho = np.where(w > 0, 1.0 / np.maximum(w, 1e-300), WET_COST)
    rho = np.minimum(rho, WET_COST)
    rho = ndimage.uniform_filter(rho, HILL_AVG2, mode="reflect")
    return np.minimum(rho, WET_COST)


def uerd_cost(grid: JpegCoeffGrid) -> np.ndarray:
    """UERD-style cost: quant step over local block energy.

    Block energy is the sum of |dequantized AC coefficients|; each block is
    weighted by its own energy plus a quarter of its 8 neighbours' (missing
    neighbours count as zero).
    """
    by, bx = grid.blocks
    deq = np.abs(grid.coeffs.astype(np.float64) * grid.quant_grid())
    blocks = deq.reshape(by, 8, bx, 8).transpose(0, 2, 1, 3)
    energy = blocks.sum(axis=(2, 3)) - blocks[:, :, 0, 0]
    ring = np.ones((3, 3))
    ring[1, 1] = 0.0
    local = energy + 0.25 * ndimage.correlate(energy, ring, mode="constant", cval=0.0)
    local_full = np.kron(local, np.ones((8, 8)))
    q = grid.quant_grid().astype(np.float64)
    with np.errstate(divide="ignore"):
        rho = np.where(local_full > 0, q / np.maximum(local_full, 1e-300), WET_COST)
    return np.minimum(rho, WET_COST)


def ternary_entropy(p_plus, p_minus) -> float:
    """Total entropy in bits of independent {+1, -1, 0} changes."""
    total = 0.0
    for p in (p_plus, p_minus, 1.0 - p_plus - p_minus):
        p = np.asarray(p)
        mask = p > 0
        total -= float(np.sum(p[mask] * np.log2(p[mask])))
    return total


def change_probabilities(lam: float, rho_plus, rho_minus):
    """Gibbs probabilities ``exp(-lam*rho) / (1 + exp(-lam*rho+) + exp(-lam*rho-))``."""
    ep = np.exp(-lam * rho_plus)
    em = np.exp(-lam * rho_minus)
    z = 1.0 + ep + em
    return ep / z, em / z


def solve_lambda(rho_plus, rho_minus, message_bits: float, rel_tol: float = 1e-4,
                 max_iter: int = 60):
    """Find lambda whose ternary entropy equals ``message_bits``.

    Starts from the bracket [1e-5, 1e5] and doubles / halves it until it
    contains the target, then bisects geometrically.  Returns
    ``(lambda, entropy, iterations)``.
    """
    def entropy(lam):
        return ternary_entropy(*change_probabilities(lam, rho_plus, rho_minus))

    options = 1 + (rho_plus < WET_COST).astype(int) + (rho_minus < WET_COST).astype(int)
    # the bound itself is only reached at lambda = 0, so treat it as infeasible
    if message_bits >= float(np.sum(np.log2(options))) * (1 - 1e-12):
        raise CapacityError("payload exceeds the entropy bound of this cover")
    lo, hi = 1e-5, 1e5
    h_lo = entropy(lo)
    while h_lo < message_bits:
        lo /= 2.0
        h_lo = entropy(lo)
    h_hi = entropy(hi)
    while h_hi > message_bits:
        hi *= 2.0
        h_hi = entropy(hi)
    lam, h, it = hi, h_hi, 0
    while it < max_iter:
        it += 1
        lam = math.sqrt(lo * hi)
        h = entropy(lam)
        if abs(h - message_bits) <= rel_tol * message_bits:
            break
        if h > message_bits:
            lo = lam
        else:
            hi = lam
    return lam, h, it


def embedding_units(cover):
    """Unit values, +1/-1 range masks and the payload denominator for a cover."""
    if isinstance(cover, JpegCoeffGrid):
        values = cover.coeffs.astype(np.int64)
        ac = np.ones((8, 8), dtype=bool)
        ac[0, 0] = False
        ac = np.tile(ac, cover.blocks)
        usable = ac & (values != 0)
        return values, usable, int(usable.sum()), -COEFF_LIMIT, COEFF_LIMIT
    values = as_gray(cover).astype(np.int64)
    return values, np.ones(values.shape, dtype=bool), values.size, 0, 255


def directional_costs(cover, rho):
    """Split one cost map into (rho+, rho-) with wet and out-of-range units blocked."""
    values, usable, _, lo, hi = embedding_units(cover)
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != values.shape:
        raise ValueError(f"cost map {rho.shape} does not match cover {values.shape}")
    if not np.all(np.isfinite(rho)) or (rho < 0).any():
        raise ValueError("costs must be finite and non-negative")
    rho = np.where(usable, np.minimum(rho, WET_COST), WET_COST)
    rho_plus = np.where(values + 1 > hi, np.inf, rho)
    rho_minus = np.where(values - 1 < lo, np.inf, rho)
    return rho_plus, rho_minus


def simulate_embedding(cover, rho, payload: float, seed: int = 0, return_info: bool = False):
    """Optimal-simulator stego: independent +-1 changes at the payload-matched lambda.

    ``payload`` is in bits per pixel (spatial) or bits per nonzero AC
    coefficient (JPEG).  Saturated units lose their blocked direction.
    """
    if not 0 < payload <= MAX_PAYLOAD:
        raise CapacityError(f"payload {payload} outside (0, {MAX_PAYLOAD:.4f}]")
    values, _, units, _, _ = embedding_units(cover)
    if units == 0:
        raise CapacityError("cover has no usable embedding units")
    rho_plus, rho_minus = directional_costs(cover, rho)
    message_bits = payload * units
    lam, h, _ = solve_lambda(rho_plus, rho_minus, message_bits)
    p_plus, p_minus = change_probabilities(lam, rho_plus, rho_minus)
    rng = np.random.default_rng(seed)
    u = rng.random(values.shape)
    change = np.where(u < p_plus, 1, np.where(u < p_plus + p_minus, -1, 0))
    out = values + change
    stego = cover.with_coeffs(out) if isinstance(cover, JpegCoeffGrid) else out.astype(np.uint8)
    if return_info:
        return stego, {"lambda": lam, "entropy": h, "message_bits": message_bits,
                       "p_plus": p_plus, "p_minus": p_minus}
    return stego


def cost_map(cover, kind: str | None = None) -> np.ndarray:
    """Dispatch to :func:`hill_cost` or :func:`uerd_cost` (default by domain)."""
    if kind is None:
        kind = "uerd" if isinstance(cover, JpegCoeffGrid) else "hill"
    if kind == "hill":
        if isinstance(cover, JpegCoeffGrid):
            raise ValueError("hill cost needs a spatial cover")
        return hill_cost(cover)
    if kind == "uerd":
        if not isinstance(cover, JpegCoeffGrid):
            raise ValueError("uerd cost needs a JPEG coefficient grid")
        return uerd_cost(cover)
    raise ValueError(f"unknown cost {kind!r}")
