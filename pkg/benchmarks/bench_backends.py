"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_backends.py [--size 128] [--repeat 3]

Times STC Viterbi embedding, the residual-difference scatter and both SPP
algorithms on the same inputs for each available backend, and checks that
the backends produce identical results.
"""
import argparse
import time

import numpy as np

from stegospp import SppConfig, hill_cost, learn_filter_set, run_spp, simulate_embedding
from stegospp._backend import get_core
from stegospp.residual import spatial_patches
from stegospp.stc import StcCode


def _texture(rng, n):
    f = np.fft.fftfreq(n)
    amp = 1.0 / np.maximum(np.hypot(*np.meshgrid(f, f)), 1.0 / n) ** 1.5
    field = np.fft.ifft2(amp * np.exp(2j * np.pi * rng.random((n, n)))).real
    field = 128 + 50 * field / field.std()
    return np.clip(np.round(field + rng.normal(scale=2, size=(n, n))), 0, 255).astype(np.uint8)


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(size, rng):
    x = _texture(rng, size)
    fs = learn_filter_set(x)
    y = simulate_embedding(x, hill_cost(x), 0.4, seed=1)

    n = x.size
    code = StcCode.default(n, n // 4, h=7)
    bits = rng.integers(0, 2, n).astype(np.uint8)
    rho = rng.random(n)
    msg = rng.integers(0, 2, code.msg_len).astype(np.uint8)

    def viterbi(core):
        return lambda: core.viterbi(bits, rho, code.column_masks, code.block_ends, msg, code.h)

    up = spatial_patches(fs)
    diff = (y.astype(np.int32) - x.astype(np.int32))

    def scatter(core):
        def run():
            err = np.zeros((len(fs),) + x.shape)
            core.scatter(err, diff, up.patches, up.bbox, up.block, up.pad_y, up.pad_x)
            return err
        return run

    def spp(algorithm):
        def make(core_name):
            cfg = SppConfig(algorithm=algorithm, backend=core_name)
            return lambda: run_spp(x, y, fs, cfg).enhanced
        return make

    return [
        ("stc viterbi", lambda name: viterbi(get_core(name))),
        ("scatter", lambda name: scatter(get_core(name))),
        ("spp fast", spp("fast")),
        ("spp general", spp("general")),
    ]


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        get_core("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled kernels not built; timing the fallback only")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in backends) + "   speedup  agree")
    for name, make in cases(args.size, rng):
        results = {b: _best(make(b), args.repeat) for b in backends}
        cells = "".join(f"{results[b][0] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            ratio = results["python"][0] / results["cython"][0]
            agree = _same(results["python"][1], results["cython"][1])
            print(f"{name:<14}{cells}{ratio:>9.1f}x  {'yes' if agree else 'NO'}")
        else:
            print(f"{name:<14}{cells}")


if __name__ == "__main__":
    main()
