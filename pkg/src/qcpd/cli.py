"""Command-line front end.

Exit codes: 0 success, 1 internal/numerical failure, 2 bad input or usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .admm import AdmmConfig
from .cpd import AlsConfig, cp_als
from .layers import rank_for_shape, select_rank
from .quantize import QuantScheme
from .tensor import reconstruct, rel_error
from .tensorfile import TensorFileError, read_tensor, write_tensor


class UsageError(Exception):
    pass


def _ints(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"extents must be positive, got {text!r}")
    return vals


def _hw(text: str) -> tuple[int, int]:
    vals = _ints(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected H,W, got {text!r}")
    return vals


def _add_solver_args(p: argparse.ArgumentParser, *, rank_required=True) -> None:
    p.add_argument("--input", required=True, help="tensor file")
    g = p.add_mutually_exclusive_group(required=rank_required)
    g.add_argument("--rank", type=int)
    g.add_argument("--rate", type=float, help="parameter reduction rate; picks the rank")
    p.add_argument("--bits", type=int, choices=range(2, 9), default=8, metavar="{2..8}")
    p.add_argument("--scheme", choices=("minmax", "mse"), default="mse")
    p.add_argument("--asymmetric", action="store_true", help="asymmetric grid (minmax only)")
    p.add_argument("--init", choices=("random", "als-balanced"), default="als-balanced")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--als-iters", type=int, default=10)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--inner-max", type=int, default=20)
    p.add_argument("--outer-max", type=int, default=200)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--report", type=Path, help="JSON report path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcpd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic low-rank tensor")
    p.add_argument("--shape", type=_ints, required=True, help="e.g. 64,64,9")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0, help="relative noise norm")
    p.add_argument("--bits", type=int, choices=range(2, 9), metavar="{2..8}",
                   help="draw on-grid factors with this bit-width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path, required=True)

    p = sub.add_parser("factorize", help="unconstrained CP-ALS")
    p.add_argument("--input", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--rank", type=int)
    g.add_argument("--rate", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--als-iters", type=int, default=100)
    p.add_argument("--report", type=Path)

    p = sub.add_parser("qfactorize", help="quantization-aware CP / matrix factorization")
    _add_solver_args(p)
    p.add_argument("--trace", type=Path, help="CSV trace path")
    p.add_argument("--hw", type=_hw, help="layer input H,W for MAC/BOP counts")
    p.add_argument("--act-bits", type=int, default=8)

    p = sub.add_parser("compare", help="successive vs joint, random vs ALS init")
    _add_solver_args(p)

    p = sub.add_parser("compress-conv", help="compress a T x S x D x D kernel")
    _add_solver_args(p)
    p.add_argument("--hw", type=_hw, default=(8, 8), help="probe / BOP input H,W")
    p.add_argument("--act-bits", type=int, default=8)
    p.add_argument("--output-prefix", type=Path, help="write <prefix>_{first,mid,last}.qtns")
    return parser


def _configs(args, rank: int) -> tuple[AdmmConfig, AlsConfig, str]:
    if args.asymmetric and args.scheme == "mse":
        raise UsageError("--asymmetric is only available with --scheme minmax")
    try:
        scheme = QuantScheme(args.scheme, not args.asymmetric)
        cfg = AdmmConfig(
            bits=args.bits,
            scheme=scheme,
            eps=args.eps,
            inner_max=args.inner_max,
            outer_max=args.outer_max,
            patience=args.patience,
        )
        als = AlsConfig(rank=rank, max_iters=args.als_iters, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfg, als, args.init.replace("-", "_")


def _load(path) -> np.ndarray:
    try:
        return read_tensor(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _rank(args, shape) -> int:
    if args.rank is not None:
        if args.rank < 1:
            raise UsageError("--rank must be >= 1")
        return args.rank
    if not args.rate > 0:
        raise UsageError("--rate must be positive")
    return rank_for_shape(shape, args.rate)


def _emit(obj: dict, path: Path | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _check_ndim(t, allowed=(2, 3)):
    if t.ndim not in allowed:
        raise UsageError(f"unsupported tensor order {t.ndim}; expected one of {allowed}")


def cmd_gen(args) -> None:
    try:
        syn = bench.synthetic_tensor(args.shape, args.rank, args.noise, args.bits, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_tensor(args.output, syn.tensor)
    label = "e_quant floor of generating factors" if args.bits else "rel_error of generating factors"
    print(f"{label}: {syn.floor:.6e}")


def cmd_factorize(args) -> None:
    t = _load(args.input)
    _check_ndim(t)
    rank = _rank(args, t.shape)
    t0 = time.perf_counter()
    factors, errors = cp_als(t, AlsConfig(rank, args.als_iters, seed=args.seed), return_errors=True)
    _emit(
        {
            "shape": list(t.shape),
            "rank": rank,
            "seed": args.seed,
            "rel_error": rel_error(t, reconstruct(factors)) if np.any(t) else 0.0,
            "sweeps": len(errors) - 1,
            "params_before": int(np.prod(t.shape)),
            "params_after": int(rank * sum(t.shape)),
            "wall_time": time.perf_counter() - t0,
        },
        args.report,
    )


def cmd_qfactorize(args) -> None:
    t = _load(args.input)
    _check_ndim(t)
    rank = _rank(args, t.shape)
    cfg, als, init = _configs(args, rank)
    if not np.any(t):
        raise UsageError("input tensor is all zeros")
    try:
        report, q = bench.qfactorize_report(t, rank, cfg, als, init, hw=args.hw, act_bits=args.act_bits)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(report, args.report)
    if args.trace is not None:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", "e_quant", "rel_error"])
            for row in q.trace:
                w.writerow([row[0], repr(row[1]), repr(row[2])])


def cmd_compare(args) -> None:
    t = _load(args.input)
    _check_ndim(t)
    rank = _rank(args, t.shape)
    cfg, als, _ = _configs(args, rank)
    if not np.any(t):
        raise UsageError("input tensor is all zeros")
    _emit(bench.compare_report(t, rank, cfg, als), args.report)


def cmd_compress_conv(args) -> None:
    k4 = _load(args.input)
    _check_ndim(k4, (4,))
    if k4.shape[2] != k4.shape[3] or k4.shape[2] % 2 == 0:
        raise UsageError(f"kernel spatial dims must be square and odd, got {k4.shape[2:]}")
    if not np.any(k4):
        raise UsageError("kernel is all zeros")
    rank = args.rank
    if rank is None:
        if not args.rate > 0:
            raise UsageError("--rate must be positive")
        rank = select_rank(k4.shape[:3], args.rate)
    cfg, als, init = _configs(args, rank)
    report, weights, _ = bench.compress_conv(
        k4, cfg, als, init, rank=rank, hw=args.hw, act_bits=args.act_bits, probe_seed=args.seed
    )
    report["rate"] = args.rate
    if args.output_prefix is not None:
        files = {}
        for name in ("first", "mid", "last"):
            path = Path(f"{args.output_prefix}_{name}.qtns")
            write_tensor(path, getattr(weights, name))
            files[name] = path.name
        report["files"] = files
    _emit(report, args.report)


COMMANDS = {
    "gen": cmd_gen,
    "factorize": cmd_factorize,
    "qfactorize": cmd_qfactorize,
    "compare": cmd_compare,
    "compress-conv": cmd_compress_conv,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (UsageError, TensorFileError) as exc:
        print(f"qcpd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"qcpd {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
