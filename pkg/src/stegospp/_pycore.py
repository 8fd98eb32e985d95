"""Reference kernels in numpy/pure Python.

Same signatures and semantics as the compiled ``_core`` extension; used when the
extension is not built and as the comparison point in tests and benchmarks.
"""
import numpy as np

# a step must beat the current distance by more than accumulated rounding noise;
# otherwise moves with an exact-zero effect can be accepted on a -1e-14 delta
GAIN_TOL = 1e-9


def viterbi(cover_bits, costs, masks, block_ends, message, h):
    """Minimum-cost stego bits for a syndrome-trellis code.

    ``masks[j]`` is the h-bit column of the submatrix used by cover column ``j``
    (bit r = row offset r); ``block_ends[i]`` is the exclusive end column of
    message bit ``i``.  Returns ``(stego_bits, total_cost)``; cost is ``inf`` when
    no trellis path exists.
    """
    n = cover_bits.shape[0]
    nstates = 1 << h
    idx = np.arange(nstates)
    cost = np.full(nstates, np.inf)
    cost[0] = 0.0
    path = np.zeros((n, nstates), dtype=np.uint8)
    half = nstates >> 1
    j = 0
    for i, end in enumerate(block_ends):
        while j < end:
            rho = costs[j]
            if cover_bits[j]:
                c0, c1 = rho, 0.0
            else:
                c0, c1 = 0.0, rho
            stay = cost + c0
            flip = cost[idx ^ masks[j]] + c1
            take = flip < stay
            path[j] = take
            cost = np.where(take, flip, stay)
            j += 1
        shifted = np.full(nstates, np.inf)
        shifted[:half] = cost[(idx[:half] << 1) | int(message[i])]
        cost = shifted
    # trailing columns with no message bit (only when n > block_ends[-1])
    while j < n:
        rho = costs[j]
        c0, c1 = (rho, 0.0) if cover_bits[j] else (0.0, rho)
        stay = cost + c0
        flip = cost[idx ^ masks[j]] + c1
        take = flip < stay
        path[j] = take
        cost = np.where(take, flip, stay)
        j += 1

    state = int(np.argmin(cost))
    total = float(cost[state])
    stego = np.zeros(n, dtype=np.uint8)
    if not np.isfinite(total):
        return stego, total
    j = n - 1
    while j >= (block_ends[-1] if len(block_ends) else 0):
        y = path[j, state]
        stego[j] = y
        if y:
            state ^= int(masks[j])
        j -= 1
    for i in range(len(block_ends) - 1, -1, -1):
        state = ((state << 1) | int(message[i])) & (nstates - 1)
        start = block_ends[i - 1] if i else 0
        while j >= start:
            y = path[j, state]
            stego[j] = y
            if y:
                state ^= int(masks[j])
            j -= 1
    return stego, total


def _clip_ranges(ay, ax, box, height, width):
    y0 = max(box[0], -ay)
    y1 = min(box[1], height - ay)
    x0 = max(box[2], -ax)
    x1 = min(box[3], width - ax)
    return y0, y1, x0, x1


def _delta(err, patches, bbox, t, ay, ax, s):
    _, height, width = err.shape
    total = 0.0
    for k in range(err.shape[0]):
        y0, y1, x0, x1 = _clip_ranges(ay, ax, bbox[k], height, width)
        if y0 >= y1 or x0 >= x1:
            continue
        diff = err[k, ay + y0 : ay + y1, ax + x0 : ax + x1]
        total += float(np.sum(np.abs(diff + s * patches[t, k, y0:y1, x0:x1]) - np.abs(diff)))
    return total


def apply_patch(maps, patches, bbox, t, ay, ax, s):
    _, height, width = maps.shape
    for k in range(maps.shape[0]):
        y0, y1, x0, x1 = _clip_ranges(ay, ax, bbox[k], height, width)
        if y0 >= y1 or x0 >= x1:
            continue
        maps[k, ay + y0 : ay + y1, ax + x0 : ax + x1] += s * patches[t, k, y0:y1, x0:x1]


def scatter(err, diff, patches, bbox, block, pad_y, pad_x):
    """Add the residual response of every nonzero entry of ``diff`` to ``err``."""
    for i, j in zip(*np.nonzero(diff)):
        t = (i % block) * block + (j % block)
        apply_patch(err, patches, bbox, t, i - i % block - pad_y, j - j % block - pad_x,
                    float(diff[i, j]))


def l1_norm(values):
    return float(np.abs(values).sum())


def hill_climb(z, target, err, patches, bbox, block, pad_y, pad_x, lo, hi,
               fast, max_steps, distance):
    """Greedy post-modification of ``z`` (in place).

    ``err`` holds the residual maps of ``z`` minus those of the cover and is
    kept in sync with every accepted step; ``distance`` is its L1 norm.

    ``fast`` visits only units where ``target != z`` with a single step of
    ``4 * sign(target - z)``; otherwise every unit tries +4 then -4 repeatedly
    until a step fails to lower the distance.  Returns lists of accepted rows,
    columns, steps and the distance after each acceptance, plus the final
    distance.
    """
    n1, n2 = z.shape
    rows, cols, steps, trace = [], [], [], []
    for i in range(n1):
        bi = i - i % block
        for j in range(n2):
            bj = j - j % block
            t = (i % block) * block + (j % block)
            ay = bi - pad_y
            ax = bj - pad_x
            if fast:
                diff = int(target[i, j]) - int(z[i, j])
                if diff == 0:
                    continue
                s = 4 if diff > 0 else -4
                v = int(z[i, j]) + s
                if v < lo or v > hi:
                    continue
                d = _delta(err, patches, bbox, t, ay, ax, s)
                if d < -GAIN_TOL * (1.0 + distance):
                    z[i, j] = v
                    apply_patch(err, patches, bbox, t, ay, ax, s)
                    distance += d
                    rows.append(i)
                    cols.append(j)
                    steps.append(s)
                    trace.append(distance)
                continue
            for s in (4, -4):
                taken = 0
                while True:
                    v = int(z[i, j]) + s
                    if v < lo or v > hi or (max_steps > 0 and taken >= max_steps):
                        break
                    d = _delta(err, patches, bbox, t, ay, ax, s)
                    if not d < -GAIN_TOL * (1.0 + distance):
                        break
                    z[i, j] = v
                    apply_patch(err, patches, bbox, t, ay, ax, s)
                    distance += d
                    taken += 1
                    rows.append(i)
                    cols.append(j)
                    steps.append(s)
                    trace.append(distance)
    return rows, cols, steps, trace, distance
