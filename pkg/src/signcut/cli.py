"""Command line interface.

Machine-readable results go to stdout as ``key=value`` pairs; diagnostics go
to stderr. Exit codes: 0 success, 2 I/O or format error, 3 invalid
configuration.
"""

import argparse
import sys

import numpy as np

from .containers import (
    FormatError,
    read_ppm,
    read_raw,
    read_scd,
    write_ppm,
    write_raw,
    write_scd,
)
from .decompose import DecomposeConfig, MemoryBudgetExceeded, decompose, expand
from .metrics import (
    StorageModel,
    compression_rate,
    emit_curve,
    quantize_half,
    relative_error,
    width_for_compression,
    write_curve_csv,
)
from .search import InstanceTooLarge, SearchConfig, brute_force_cut

DEFAULT_SEED = 0x5EED
EXIT_OK, EXIT_IO, EXIT_CONFIG = 0, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fmt(x):
    return format(float(x), ".17g")


def _emit(**fields):
    print(" ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in fields.items()))


def _read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def _write_bytes(path, data):
    with open(path, "wb") as fh:
        fh.write(data)


def load_tensor(path):
    """Read a DTEN or P6 file; returns ``(array, kind)`` with kind ``dten`` or ``ppm``."""
    data = _read_bytes(path)
    if data[:4] == b"DTEN":
        return read_raw(data), "dten"
    if data[:2] == b"P6":
        return read_ppm(data), "ppm"
    raise FormatError(f"{path}: unrecognized file format (expected DTEN or P6)")


def _storage_model(args, shape, kind):
    source_bits = args.source_bits
    if source_bits is None:
        source_bits = 8 if kind == "ppm" else 16
    channel_axis = 2 if kind == "ppm" and args.channel_mode == "scalars" else None
    return StorageModel(shape, args.coeff_bits, source_bits, channel_axis)


def resolve_width(args, model):
    if (args.width is None) == (args.rate is None):
        raise ConfigError("exactly one of --width or --rate is required")
    if args.width is not None:
        if args.width < 0:
            raise ConfigError("--width must be non-negative")
        return args.width
    if not 0.0 < args.rate <= 1.0:
        raise ConfigError("--rate must lie in (0, 1]")
    return width_for_compression(None, model, args.rate)


def _decompose_config(args, width):
    try:
        return DecomposeConfig(
            width=width,
            flush_width=args.flush_width,
            method=args.method,
            search=SearchConfig(args.seed, args.restarts, args.max_sweeps),
            memory_budget=args.memory_budget,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _run_decomposition(args):
    A, kind = load_tensor(args.input)
    if args.channel_mode == "scalars" and kind != "ppm":
        raise ConfigError("--channel-mode scalars requires a PPM input")
    model = _storage_model(args, A.shape, kind)
    width = resolve_width(args, model)
    channel_axis = model.channel_axis
    return A, model, width, channel_axis


def cmd_decompose(args):
    A, model, width, channel_axis = _run_decomposition(args)
    if args.dry_run:
        _emit(width=width, rate=compression_rate(width, model))
        return EXIT_OK
    cfg = _decompose_config(args, width)
    d, report = decompose(A, cfg, channel_axis)
    payload = write_scd(d, args.coeff_bits)
    stored = read_scd(payload)
    _write_bytes(args.output, payload)
    if args.curve:
        with open(args.curve, "w", newline="") as fh:
            write_curve_csv(emit_curve(report, model), fh)
    rel = relative_error(A, expand(stored)) if np.any(A) else 0.0
    _emit(width=d.width, rate=compression_rate(d.width, model), rel_err=rel)
    return EXIT_OK


def cmd_curve(args):
    A, model, width, channel_axis = _run_decomposition(args)
    d, report = decompose(A, _decompose_config(args, width), channel_axis)
    with open(args.output, "w", newline="") as fh:
        write_curve_csv(emit_curve(report, model), fh)
    _emit(width=d.width, rate=compression_rate(d.width, model), rel_err=report.relative_errors[-1])
    return EXIT_OK


def cmd_reconstruct(args):
    d = read_scd(_read_bytes(args.input), args.truncate)
    out = expand(d)
    fmt = args.format or ("ppm" if args.output.lower().endswith(".ppm") else "dten")
    if fmt == "ppm":
        if out.ndim != 3 or out.shape[2] != 3:
            raise ConfigError(f"PPM output needs an (h, w, 3) tensor, got {out.shape}")
        _write_bytes(args.output, write_ppm(out))
    else:
        _write_bytes(args.output, write_raw(out, "f64"))
    _emit(width=d.width)
    return EXIT_OK


def _parse_shape(text):
    try:
        shape = tuple(int(p) for p in text.lower().replace(",", "x").split("x"))
    except ValueError:
        raise ConfigError(f"cannot parse shape {text!r}")
    if not shape or any(n <= 0 for n in shape):
        raise ConfigError(f"shape entries must be positive: {text!r}")
    return shape


def cmd_width(args):
    if not 0.0 < args.rate <= 1.0:
        raise ConfigError("--rate must lie in (0, 1]")
    model = StorageModel(_parse_shape(args.shape), args.coeff_bits, args.source_bits)
    _emit(width=width_for_compression(None, model, args.rate))
    return EXIT_OK


def cmd_quantize(args):
    A, _ = load_tensor(args.input)
    Q, saturated = quantize_half(A, args.format, return_saturated=True)
    _write_bytes(args.output, write_raw(Q, "f64"))
    rel = relative_error(A, Q) if np.any(A) else 0.0
    _emit(format=args.format, rel_err=rel, saturated=saturated)
    return EXIT_OK


def cmd_oracle(args):
    A, _ = load_tensor(args.input)
    result = brute_force_cut(A)
    _emit(value=result.value)
    return EXIT_OK


def _add_width_args(p):
    p.add_argument("--width", type=int, help="number of sign terms")
    p.add_argument("--rate", type=float, help="target compression rate in (0, 1]")
    p.add_argument("--method", choices=["greedy", "lstsq"], default="greedy")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--flush-width", type=int, default=32)
    p.add_argument("--coeff-bits", type=int, choices=[32, 64], default=32)
    p.add_argument(
        "--source-bits", type=int, default=None,
        help="bits per source entry for rate accounting (default 16, or 8 for PPM)",
    )
    p.add_argument("--channel-mode", choices=["signs", "scalars"], default="signs")
    p.add_argument("--memory-budget", type=int, default=None, help="bytes")


def build_parser():
    parser = _Parser(prog="signcut", description="Signed cut decompositions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", help="decompose a DTEN or PPM file into SCD")
    p.add_argument("input")
    p.add_argument("output")
    _add_width_args(p)
    p.add_argument("--curve", help="also write the error curve as CSV")
    p.add_argument("--dry-run", action="store_true", help="only resolve the width")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", help="expand an SCD file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--truncate", type=int, default=None, help="keep the first W terms")
    p.add_argument("--format", choices=["dten", "ppm"], default=None)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("curve", help="write width, compression rate, relative error CSV")
    p.add_argument("input")
    p.add_argument("output")
    _add_width_args(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("width", help="width for a target compression rate")
    p.add_argument("--shape", required=True, help="e.g. 1024x4096")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--coeff-bits", type=int, default=32)
    p.add_argument("--source-bits", type=int, default=16)
    p.set_defaults(func=cmd_width)

    p = sub.add_parser("quantize", help="round to bf16 or f16 and report the error")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=["bf16", "f16"], default="bf16")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("oracle", help="exact signed cut norm of a small tensor")
    p.add_argument("input")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, FormatError) as exc:
        print(f"signcut: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, MemoryBudgetExceeded, InstanceTooLarge) as exc:
        print(f"signcut: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # invalid tensor contents, e.g. NaN or empty axes
        print(f"signcut: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
