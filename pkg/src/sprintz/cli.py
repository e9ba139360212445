"""Command-line interface: ``sprintz {compress,decompress,bench-throughput,bench-ratio}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .codec import CodecConfig, decode_stream, encode_stream
from .exceptions import SprintzError
from .quantize import Quantizer, load_delimited, load_raw

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

DTYPES = {"u8": 8, "u16": 16}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_codec_flags(p):
    p.add_argument("--forecaster", choices=["delta", "fire"], default="delta")
    p.add_argument("--entropy", type=_on_off, default=False, metavar="{on,off}")
    p.add_argument("--group", type=int, default=2, help="block headers per header group")
    p.add_argument("--learn-shift", type=int, default=1, help="FIRE learning rate is 2**-SHIFT")


def build_parser():
    parser = _Parser(prog="sprintz", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compress", help="compress a raw or delimited file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dtype", choices=sorted(DTYPES), default="u8")
    p.add_argument("--ncols", type=int, help="columns per sample (required for raw input)")
    p.add_argument("--format", choices=["raw", "delimited"], default="raw")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--skip-label", action="store_true", help="drop the first column of delimited input")
    p.add_argument("--header", action="store_true", help="delimited input starts with a header line")
    p.add_argument("--sidecar", help="quantization metadata path (default: OUTPUT.quant.json)")
    p.add_argument("--verify", action="store_true", help="decompress and compare before exiting")
    _add_codec_flags(p)

    p = sub.add_parser("decompress", help="decompress to raw samples (or delimited reals)")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dequantize", metavar="SIDECAR",
                   help="write delimited real values using this quantization sidecar")
    p.add_argument("--delimiter", default=",")

    p = sub.add_parser("bench-throughput", help="speed sweep over column counts on random data")
    p.add_argument("--sweep-ncols", type=_int_list, default=[1, 2, 4, 8, 16, 32, 64])
    p.add_argument("--dtype", choices=sorted(DTYPES), action="append",
                   help="bitwidths to test (repeatable; default both)")
    p.add_argument("--nvalues", type=int, default=1_000_000)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="CSV report path; a JSON summary goes next to it")

    p = sub.add_parser("bench-ratio", help="compression ratios and mean ranks over datasets")
    p.add_argument("datadir", nargs="?", help="directory of datasets")
    p.add_argument("--ucr", action="store_true", help="DATADIR is a UCR-format archive")
    p.add_argument("--synthetic", type=int, metavar="N",
                   help="use N seeded synthetic smooth datasets instead of DATADIR")
    p.add_argument("--dtype", choices=sorted(DTYPES), action="append")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--external", nargs=3, action="append", default=[],
                   metavar=("NAME", "COMPRESS_CMD", "DECOMPRESS_CMD"),
                   help="external codec; commands use {input} and {output} placeholders")
    p.add_argument("--report", help="CSV report path; a JSON summary goes next to it")
    return parser


def _bitwidths(dtypes):
    return sorted({DTYPES[d] for d in dtypes}) if dtypes else [8, 16]


def _write_reports(rows, fields, summary, report):
    if report:
        bench.write_csv(rows, report, fields)
        bench.write_json(summary, Path(report).with_suffix(".json"))
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def cmd_compress(args):
    w = DTYPES[args.dtype]
    try:
        CodecConfig(w, 1, args.forecaster, args.entropy, args.group, args.learn_shift)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "raw":
        if args.ncols is None:
            raise UsageError("--ncols is required for raw input")
        X = load_raw(args.input, f"u{w // 8}", args.ncols)
        quantizer = None
    else:
        reals = load_delimited(args.input, args.delimiter, args.skip_label, args.header)
        if args.ncols is not None and reals.shape[1] != args.ncols:
            raise SprintzError(f"file has {reals.shape[1]} columns, --ncols says {args.ncols}")
        quantizer = Quantizer(bitwidth=w).fit(reals)
        X = quantizer.transform(reals)
    config = CodecConfig(w, X.shape[1], args.forecaster, args.entropy, args.group, args.learn_shift)
    t0 = time.perf_counter()
    blob = encode_stream(X, config)
    elapsed = time.perf_counter() - t0
    Path(args.output).write_bytes(blob)
    if quantizer is not None:
        quantizer.save_sidecar(args.sidecar or f"{args.output}.quant.json")
    raw_bytes = X.size * w // 8
    ratio = raw_bytes / len(blob)
    print(f"{raw_bytes} -> {len(blob)} bytes, ratio {ratio:.3f}, "
          f"{raw_bytes / 1e6 / max(elapsed, 1e-9):.1f} MB/s")
    if args.verify and not np.array_equal(decode_stream(blob), X):
        print("verification failed: round trip mismatch", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_decompress(args):
    blob = Path(args.input).read_bytes()
    t0 = time.perf_counter()
    X = decode_stream(blob)
    elapsed = time.perf_counter() - t0
    if args.dequantize:
        reals = Quantizer.from_sidecar(args.dequantize).inverse_transform(X)
        np.savetxt(args.output, reals, delimiter=args.delimiter, fmt="%.17g")
    else:
        Path(args.output).write_bytes(X.tobytes())
    print(f"{len(blob)} -> {X.nbytes} bytes, {X.nbytes / 1e6 / max(elapsed, 1e-9):.1f} MB/s")
    return EXIT_OK


def cmd_bench_throughput(args):
    if args.reps < 1 or args.nvalues < 1 or not args.sweep_ncols or min(args.sweep_ncols) < 1:
        raise UsageError("--reps, --nvalues and every --sweep-ncols entry must be positive")
    rows = bench.throughput_sweep(args.sweep_ncols, _bitwidths(args.dtype), args.nvalues,
                                  args.reps, args.seed)
    summary = {"seed": args.seed, "reps": args.reps, "nvalues": args.nvalues, "rows": rows}
    _write_reports(rows, bench.THROUGHPUT_FIELDS, summary, args.report)
    return EXIT_OK


def cmd_bench_ratio(args):
    if args.synthetic:
        datasets = bench.synthetic_smooth_datasets(args.synthetic, seed=args.seed)
    elif args.datadir:
        datasets = bench.load_datasets(args.datadir, ucr=args.ucr)
    else:
        raise UsageError("give a DATADIR or --synthetic N")
    externals = [c for c in (bench.external_codec_adapter(*e) for e in args.external) if c]
    rows = bench.ratio_benchmark(datasets, _bitwidths(args.dtype), externals=externals)
    ranks = bench.mean_ranks(rows)
    wins = bench.pairwise_wins(rows, "SprintzFIRE", "SprintzDelta")
    summary = {
        "seed": args.seed,
        "datasets": len(datasets),
        "mean_ranks": {str(w): r for w, r in ranks.items()},
        "fire_vs_delta_wins": {str(w): {"wins": a, "of": b} for w, (a, b) in wins.items()},
    }
    _write_reports(rows, bench.RATIO_FIELDS, summary, args.report)
    for w, r in ranks.items():
        order = " < ".join(f"{c} ({v:.2f})" for c, v in sorted(r.items(), key=lambda kv: kv[1]))
        print(f"w={w} mean ranks: {order}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "bench-throughput": cmd_bench_throughput,
    "bench-ratio": cmd_bench_ratio,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sprintz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except bench.VerificationError as exc:
        print(f"sprintz: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (OSError, ValueError, SprintzError) as exc:
        print(f"sprintz: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
