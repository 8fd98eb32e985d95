"""``stegospp`` command line: learn filters, embed, post-process, verify, report.

Exit codes: 0 success, 1 verification mismatch, 2 algorithmic failure,
64 usage error, 65 malformed input data.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analytics, costs, stc
from .costs import CapacityError
from .filters import KINDS, FilterSet, LearningError, learn_filter_set
from .imaging import FormatError, JpegCoeffGrid, load_image, save_image
from .spp import SppConfig, run_spp

EXIT_MISMATCH = 1
EXIT_ALGORITHM = 2
EXIT_USAGE = 64
EXIT_DATA = 65
SUMMARY_CAP = 100_000
OUTPUT_DIR_ENV = "STEGOSPP_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------- paths


def _out_path(path: str) -> str:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise UsageError(f"output directory does not exist: {parent}")
    if os.path.isdir(path):
        raise UsageError(f"output path is a directory: {path}")
    return path


def _in_file(path: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"no such file: {path}")
    return path


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except UnicodeDecodeError:
        raise FormatError(f"{path}: not a UTF-8 text file") from None


def _odd_width(text: str) -> int:
    try:
        w = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if w % 2 == 0 or not 3 <= w <= 15:
        raise argparse.ArgumentTypeError(f"w must be odd and in [3, 15], got {w}")
    return w


def _payload(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < p <= costs.MAX_PAYLOAD:
        raise argparse.ArgumentTypeError(f"payload must lie in (0, {costs.MAX_PAYLOAD:.4f}]")
    return p


def _seed(text: str) -> int:
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return s


def _load_key(path: str, image) -> stc.TernaryKey:
    key = stc.TernaryKey.loads(_read_text(path))
    n = image.coeffs.size if isinstance(image, JpegCoeffGrid) else np.asarray(image).size
    if key.cover_len != n:
        raise FormatError(f"{path}: key is for {key.cover_len} units, image has {n}")
    return key


# --------------------------------------------------------------------------- commands


def cmd_learn_filters(args) -> int:
    cover_path = _in_file(args.cover)
    out = _out_path(args.out)
    fs = learn_filter_set(load_image(cover_path), args.set, args.w)
    _write_text(out, fs.dumps())
    taps = " ".join(format(float(t), ".4f") for t in fs.taps)
    print(f"{fs.kind} w={fs.w} kernels={len(fs)} taps: {taps}")
    return 0


def cmd_make_key(args) -> int:
    cover_path = _in_file(args.cover)
    out = _out_path(args.out)
    cover = load_image(cover_path)
    _, _, units, _, _ = costs.embedding_units(cover)
    n = cover.coeffs.size if isinstance(cover, JpegCoeffGrid) else cover.size
    msg_len = int(np.floor(args.payload * units))
    if msg_len < 1:
        raise CapacityError("payload too small for a single message bit")
    key = stc.TernaryKey.create(n, msg_len, h=args.h)
    _write_text(out, key.dumps())
    print(f"key: {n} units, {msg_len} message bits")
    return 0


def cmd_embed(args) -> int:
    cover_path = _in_file(args.cover)
    key_path = _in_file(args.key) if args.key else None
    if (args.key is None) != (args.message is None):
        raise UsageError("--key and --message must be given together")
    out = _out_path(args.out)
    cover = load_image(cover_path)
    rho = costs.cost_map(cover, args.cost)
    if key_path is None:
        stego = costs.simulate_embedding(cover, rho, args.payload, seed=args.seed)
    else:
        key = _load_key(key_path, cover)
        bits = stc.bits_from_hex(args.message, key.msg_len)
        rho_plus, rho_minus = costs.directional_costs(cover, rho)
        stego = stc.ternary_embed(cover, rho_plus, rho_minus, bits, key)
        if not np.array_equal(stc.ternary_extract(stego, key), bits):
            raise stc.EmbeddingError("embedded message does not extract back")
    save_image(stego, out)
    return 0


def cmd_extract(args) -> int:
    stego = load_image(_in_file(args.stego))
    key = _load_key(_in_file(args.key), stego)
    print(stc.bits_to_hex(stc.ternary_extract(stego, key)))
    return 0


def _summary(result, algorithm: str, domain: str, timing: bool) -> dict:
    mods = result.modifications()
    out = {
        "algorithm": algorithm,
        "domain": domain,
        "filters": {"kind": result.filters.kind, "w": result.filters.w},
        "initial_distance": result.initial_distance,
        "final_distance": result.final_distance,
        "accepted": result.accepted,
        "modifications": [list(m) for m in mods[:SUMMARY_CAP]],
        "modifications_truncated": len(mods) > SUMMARY_CAP,
    }
    if timing:
        out["wall_time"] = result.wall_time
    return out


def cmd_spp(args) -> int:
    cover_path = _in_file(args.cover)
    stego_path = _in_file(args.stego)
    filters_path = _in_file(args.filters) if args.filters else None
    out = _out_path(args.out)
    summary_path = _out_path(args.summary) if args.summary else None
    cover, stego = load_image(cover_path), load_image(stego_path)
    filters = FilterSet.loads(_read_text(filters_path)) if filters_path else None
    config = SppConfig(algorithm=args.algorithm, filter_kind=args.set, w=args.w)
    result = run_spp(cover, stego, filters, config)
    save_image(result.enhanced, out)
    domain = "jpeg" if isinstance(cover, JpegCoeffGrid) else "spatial"
    summary = _summary(result, args.algorithm, domain, args.timing)
    text = json.dumps(summary, sort_keys=True) + "\n"
    if summary_path:
        _write_text(summary_path, text)
    print(f"D_YX={result.initial_distance:.6g} D_ZX={result.final_distance:.6g} "
          f"accepted={result.accepted}")
    return 0


def cmd_verify(args) -> int:
    stego = load_image(_in_file(args.stego))
    enhanced = load_image(_in_file(args.enhanced))
    key = _load_key(_in_file(args.key), stego)
    _load_key(args.key, enhanced)
    same = np.array_equal(stc.ternary_extract(stego, key), stc.ternary_extract(enhanced, key))
    print("match" if same else "MISMATCH")
    return 0 if same else EXIT_MISMATCH


def cmd_stats(args) -> int:
    if not os.path.isdir(args.corpus):
        raise UsageError(f"no such directory: {args.corpus}")
    out = _out_path(args.out)
    config = analytics.ReportConfig(payload=args.payload, cost=args.cost, seed=args.seed,
                                    algorithm=args.algorithm, timing=args.timing)
    rows = analytics.batch_report(args.corpus, config, jobs=args.jobs)
    analytics.write_report(rows, out)
    failed = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} rows, {failed} failed")
    return 0


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stegospp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("learn-filters", help="learn a residual filter set from a cover")
    c.add_argument("--cover", required=True)
    c.add_argument("--w", type=_odd_width, default=None, help="filter width (odd, 3-15)")
    c.add_argument("--set", choices=KINDS, default=None)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_learn_filters)

    c = sub.add_parser("make-key", help="create a ternary STC key sized for a cover")
    c.add_argument("--cover", required=True)
    c.add_argument("--payload", type=_payload, default=0.4)
    c.add_argument("--h", type=int, choices=range(1, 13), default=7, metavar="H")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_make_key)

    c = sub.add_parser("embed", help="produce a stego image")
    c.add_argument("--cover", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--cost", choices=("hill", "uerd"), default=None)
    c.add_argument("--payload", type=_payload, default=0.4)
    c.add_argument("--seed", type=_seed, default=0)
    c.add_argument("--key", help="embed a real message with this key instead of simulating")
    c.add_argument("--message", help="hex message (with --key)")
    c.set_defaults(func=cmd_embed)

    c = sub.add_parser("extract", help="print the hex message carried by a stego")
    c.add_argument("--stego", required=True)
    c.add_argument("--key", required=True)
    c.set_defaults(func=cmd_extract)

    c = sub.add_parser("spp", help="post-process a stego image")
    c.add_argument("--cover", required=True)
    c.add_argument("--stego", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--algorithm", choices=("fast", "general"), default="fast")
    c.add_argument("--filters", help="filter file from learn-filters (default: learn)")
    c.add_argument("--set", choices=KINDS, default=None)
    c.add_argument("--w", type=_odd_width, default=None)
    c.add_argument("--summary", help="write a JSON run summary here")
    c.add_argument("--timing", action="store_true", help="include wall time in the summary")
    c.set_defaults(func=cmd_spp)

    c = sub.add_parser("verify", help="check that post-processing kept the message")
    c.add_argument("--stego", required=True)
    c.add_argument("--enhanced", required=True)
    c.add_argument("--key", required=True)
    c.set_defaults(func=cmd_verify)

    c = sub.add_parser("stats", help="CSV report over a corpus directory")
    c.add_argument("--corpus", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--payload", type=_payload, default=0.4)
    c.add_argument("--cost", choices=("hill", "uerd"), default=None)
    c.add_argument("--seed", type=_seed, default=0)
    c.add_argument("--algorithm", choices=("fast", "general"), default="fast")
    c.add_argument("--timing", action="store_true", help="fill the time columns")
    c.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"stegospp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LearningError, CapacityError, stc.EmbeddingError,
            analytics.UndefinedStatistic) as exc:
        print(f"stegospp: {exc}", file=sys.stderr)
        return EXIT_ALGORITHM
    except (FormatError, ValueError) as exc:
        print(f"stegospp: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"stegospp: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
