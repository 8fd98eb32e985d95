# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: syndrome-trellis Viterbi and the post-processing hill climb.

Mirrors ``_pycore`` exactly; see that module for the argument conventions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

# a step must beat the current distance by more than accumulated rounding noise;
# otherwise moves with an exact-zero effect can be accepted on a -1e-14 delta
cdef double GAIN_TOL = 1e-9

cnp.import_array()


def viterbi(const cnp.uint8_t[::1] cover_bits, const double[::1] costs,
            const cnp.int64_t[::1] masks, const cnp.int64_t[::1] block_ends,
            const cnp.uint8_t[::1] message, int h):
    cdef Py_ssize_t n = cover_bits.shape[0]
    cdef Py_ssize_t nblocks = block_ends.shape[0]
    cdef Py_ssize_t nstates = 1 << h
    cdef Py_ssize_t half = nstates >> 1
    cdef Py_ssize_t i, j, s, end, start, tail
    cdef double rho, c0, c1, stay, flip, total
    cdef long mask, state, msg
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] path_arr = np.zeros((n, nstates), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] path = path_arr
    cdef double[::1] cost = np.full(nstates, INFINITY)
    cdef double[::1] nxt = np.empty(nstates)
    cdef double[::1] tmp
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] stego_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] stego = stego_arr
    cost[0] = 0.0

    j = 0
    for i in range(nblocks + 1):
        end = block_ends[i] if i < nblocks else n
        while j < end:
            rho = costs[j]
            if cover_bits[j]:
                c0 = rho
                c1 = 0.0
            else:
                c0 = 0.0
                c1 = rho
            mask = masks[j]
            for s in range(nstates):
                stay = cost[s] + c0
                flip = cost[s ^ mask] + c1
                if flip < stay:
                    nxt[s] = flip
                    path[j, s] = 1
                else:
                    nxt[s] = stay
            tmp = cost
            cost = nxt
            nxt = tmp
            j += 1
        if i < nblocks:
            msg = message[i]
            for s in range(half):
                nxt[s] = cost[(s << 1) | msg]
            for s in range(half, nstates):
                nxt[s] = INFINITY
            tmp = cost
            cost = nxt
            nxt = tmp

    state = 0
    total = cost[0]
    for s in range(1, nstates):
        if cost[s] < total:
            total = cost[s]
            state = s
    if total == INFINITY:
        return stego_arr, total

    tail = block_ends[nblocks - 1] if nblocks > 0 else 0
    j = n - 1
    while j >= tail:
        if path[j, state]:
            stego[j] = 1
            state ^= masks[j]
        j -= 1
    for i in range(nblocks - 1, -1, -1):
        state = ((state << 1) | message[i]) & (nstates - 1)
        start = block_ends[i - 1] if i > 0 else 0
        while j >= start:
            if path[j, state]:
                stego[j] = 1
                state ^= masks[j]
            j -= 1
    return stego_arr, total


cdef inline double _delta(const double* err, const double* pat, const cnp.int64_t* bbox,
                          Py_ssize_t nk, Py_ssize_t height, Py_ssize_t width,
                          Py_ssize_t ph, Py_ssize_t pw, Py_ssize_t ay, Py_ssize_t ax,
                          double s) noexcept nogil:
    cdef Py_ssize_t k, py, px, y0, y1, x0, x1
    cdef const double* erow
    cdef const double* prow
    cdef double total = 0.0, diff
    for k in range(nk):
        y0 = bbox[4 * k] if bbox[4 * k] > -ay else -ay
        y1 = bbox[4 * k + 1] if bbox[4 * k + 1] < height - ay else height - ay
        x0 = bbox[4 * k + 2] if bbox[4 * k + 2] > -ax else -ax
        x1 = bbox[4 * k + 3] if bbox[4 * k + 3] < width - ax else width - ax
        for py in range(y0, y1):
            erow = err + (k * height + ay + py) * width + ax
            prow = pat + (k * ph + py) * pw
            for px in range(x0, x1):
                diff = erow[px]
                total += fabs(diff + s * prow[px]) - fabs(diff)
    return total


cdef inline void _apply(double* maps, const double* pat, const cnp.int64_t* bbox,
                        Py_ssize_t nk, Py_ssize_t height, Py_ssize_t width,
                        Py_ssize_t ph, Py_ssize_t pw, Py_ssize_t ay, Py_ssize_t ax,
                        double s) noexcept nogil:
    cdef Py_ssize_t k, py, px, y0, y1, x0, x1
    cdef double* erow
    cdef const double* prow
    for k in range(nk):
        y0 = bbox[4 * k] if bbox[4 * k] > -ay else -ay
        y1 = bbox[4 * k + 1] if bbox[4 * k + 1] < height - ay else height - ay
        x0 = bbox[4 * k + 2] if bbox[4 * k + 2] > -ax else -ax
        x1 = bbox[4 * k + 3] if bbox[4 * k + 3] < width - ax else width - ax
        for py in range(y0, y1):
            erow = maps + (k * height + ay + py) * width + ax
            prow = pat + (k * ph + py) * pw
            for px in range(x0, x1):
                erow[px] += s * prow[px]


cdef struct Geometry:
    Py_ssize_t nk, height, width, ph, pw, stride


cdef inline Geometry _geometry(double[:, :, ::1] maps, const double[:, :, :, ::1] patches):
    cdef Geometry g
    g.nk = maps.shape[0]
    g.height = maps.shape[1]
    g.width = maps.shape[2]
    g.ph = patches.shape[2]
    g.pw = patches.shape[3]
    g.stride = patches.shape[1] * g.ph * g.pw
    return g


def apply_patch(double[:, :, ::1] maps, const double[:, :, :, ::1] patches,
                const cnp.int64_t[:, ::1] bbox, Py_ssize_t t, Py_ssize_t ay, Py_ssize_t ax,
                double s):
    cdef Geometry g = _geometry(maps, patches)
    _apply(&maps[0, 0, 0], &patches[0, 0, 0, 0] + t * g.stride, &bbox[0, 0],
           g.nk, g.height, g.width, g.ph, g.pw, ay, ax, s)


def scatter(double[:, :, ::1] err, const cnp.int32_t[:, ::1] diff,
            const double[:, :, :, ::1] patches, const cnp.int64_t[:, ::1] bbox,
            Py_ssize_t block, Py_ssize_t pad_y, Py_ssize_t pad_x):
    cdef Geometry g = _geometry(err, patches)
    cdef double* e = &err[0, 0, 0]
    cdef const double* p = &patches[0, 0, 0, 0]
    cdef const cnp.int64_t* b = &bbox[0, 0]
    cdef Py_ssize_t i, j, t
    with nogil:
        for i in range(diff.shape[0]):
            for j in range(diff.shape[1]):
                if diff[i, j] != 0:
                    t = (i % block) * block + (j % block)
                    _apply(e, p + t * g.stride, b, g.nk, g.height, g.width, g.ph, g.pw,
                           i - i % block - pad_y, j - j % block - pad_x, <double>diff[i, j])


def l1_norm(const double[::1] values):
    cdef Py_ssize_t i, n = values.shape[0]
    cdef double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    with nogil:
        for i in range(0, n - 3, 4):
            a0 += fabs(values[i])
            a1 += fabs(values[i + 1])
            a2 += fabs(values[i + 2])
            a3 += fabs(values[i + 3])
        for i in range(n - n % 4, n):
            a0 += fabs(values[i])
    return (a0 + a1) + (a2 + a3)


def hill_climb(cnp.int32_t[:, ::1] z, target, double[:, :, ::1] err,
               const double[:, :, :, ::1] patches,
               const cnp.int64_t[:, ::1] bbox, Py_ssize_t block, Py_ssize_t pad_y,
               Py_ssize_t pad_x, long lo, long hi, bint fast, long max_steps,
               double distance):
    cdef Py_ssize_t n1 = z.shape[0], n2 = z.shape[1]
    cdef Py_ssize_t i, j, t, ay, ax, d_i
    cdef long v, diff, s, taken
    cdef double d
    cdef const cnp.int32_t[:, ::1] tgt
    cdef Geometry g = _geometry(err, patches)
    cdef double* e = &err[0, 0, 0]
    cdef const double* p0 = &patches[0, 0, 0, 0]
    cdef const double* pat
    cdef const cnp.int64_t* b = &bbox[0, 0]
    rows, cols, steps, trace = [], [], [], []
    if fast:
        tgt = target
    for i in range(n1):
        for j in range(n2):
            t = (i % block) * block + (j % block)
            pat = p0 + t * g.stride
            ay = i - i % block - pad_y
            ax = j - j % block - pad_x
            if fast:
                diff = tgt[i, j] - z[i, j]
                if diff == 0:
                    continue
                s = 4 if diff > 0 else -4
                v = z[i, j] + s
                if v < lo or v > hi:
                    continue
                d = _delta(e, pat, b, g.nk, g.height, g.width, g.ph, g.pw, ay, ax, <double>s)
                if d < -GAIN_TOL * (1.0 + distance):
                    z[i, j] = v
                    _apply(e, pat, b, g.nk, g.height, g.width, g.ph, g.pw, ay, ax, <double>s)
                    distance += d
                    rows.append(i)
                    cols.append(j)
                    steps.append(s)
                    trace.append(distance)
                continue
            for d_i in range(2):
                s = 4 if d_i == 0 else -4
                taken = 0
                while True:
                    v = z[i, j] + s
                    if v < lo or v > hi or (max_steps > 0 and taken >= max_steps):
                        break
                    d = _delta(e, pat, b, g.nk, g.height, g.width, g.ph, g.pw, ay, ax,
                               <double>s)
                    if not d < -GAIN_TOL * (1.0 + distance):
                        break
                    z[i, j] = v
                    _apply(e, pat, b, g.nk, g.height, g.width, g.ph, g.pw, ay, ax, <double>s)
                    distance += d
                    taken += 1
                    rows.append(i)
                    cols.append(j)
                    steps.append(s)
                    trace.append(distance)
    return rows, cols, steps, trace, distance
