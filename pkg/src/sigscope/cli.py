"""Command-line front end.

Exit codes: 0 on success, 1 on invalid arguments or configuration, 2 when
``--check`` is given and a gating acceptance check fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .experiments import (
    ConfigError,
    ExperimentConfig,
    run_conjecture,
    run_hurst_recovery,
    run_moment_identity,
    run_qv_recovery,
)
from .signatures import geometric_signature, ito_discrete_signature
from .stochastic_paths import FbmSpec, SamplePath, simulate_bm, simulate_fbm
from .tensor_algebra import MemoryBudgetError

EXIT_OK, EXIT_INVALID, EXIT_CHECK_FAILED = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default; 2 is reserved for failed checks
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _window(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like 'a,b', got {text!r}") from None
    return lo, hi


def _matrix(text: str) -> list[list[float]]:
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"matrix must look like '1,0;0,1', got {text!r}") from None
    if any(len(r) != len(rows) for r in rows):
        raise argparse.ArgumentTypeError(f"matrix {text!r} is not square")
    return rows


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int)
    common.add_argument("--steps", type=int)
    common.add_argument("--depth", type=int)
    common.add_argument("--dim", type=int)
    common.add_argument("--norm", choices=["l1", "l2"])
    common.add_argument("--hurst", type=float)
    common.add_argument("--t", type=float, help="time horizon")
    common.add_argument("--window", type=_window, help="level window 'a,b'")
    common.add_argument("--out", type=Path, help="write output here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--check", action="store_true", help="exit 2 if a gating check fails")

    parser = _Parser(prog="sigscope", description="Signature asymptotics of stochastic paths.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="simulate a BM or fBM path")

    p = sub.add_parser("signature", parents=[common], help="signature of a path")
    p.add_argument("--kind", choices=["geometric", "ito"], default="geometric")
    p.add_argument("--input", type=Path, help="CSV path (t,x1..xd); simulated if omitted")

    p = sub.add_parser("estimate-qv", parents=[common], help="quadratic variation from Itô signatures")
    p.add_argument("--qv", type=float)
    p.add_argument("--mode", choices=["closed-form", "path"])

    sub.add_parser("estimate-hurst", parents=[common], help="Hurst parameter from fWIS signatures")
    sub.add_parser("moment-identity", parents=[common], help="E||B^n||^2 = d^n t^n / n!")

    p = sub.add_parser("conjecture", parents=[common], help="probe L(VB) = |det V| kappa_d t")
    p.add_argument("--matrix", type=_matrix, action="append", help="'a,b;c,d' (repeatable)")
    return parser


def _simulated_path(args) -> SamplePath:
    dim = args.dim or 1
    steps = args.steps or 1000
    horizon = args.t or 1.0
    if args.hurst is not None:
        return simulate_fbm(FbmSpec(args.hurst, horizon, steps, dim), args.seed)
    return simulate_bm(dim, horizon, steps, args.seed)


def _signature_csv(sig) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["level", "index", "value"])
    for n in range(sig.depth + 1):
        for i, v in enumerate(sig.level(n)):
            writer.writerow([n, i, f"{v:.17g}"])
    return buf.getvalue()


def _emit(text: str, out: Path | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _config(args, experiment: str, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        experiment=experiment,
        dim=args.dim,
        depth=args.depth,
        steps=args.steps,
        trials=args.trials,
        seed=args.seed,
        norm=args.norm,
        hurst=args.hurst,
        t=args.t,
        window=args.window,
        **extra,
    )


def _dispatch(args) -> int:
    if args.command == "simulate":
        path = _simulated_path(args)
        text = path.to_csv() if args.format == "csv" else json.dumps(path.to_dict())
        _emit(text, args.out)
        return EXIT_OK

    if args.command == "signature":
        path = SamplePath.from_csv(args.input) if args.input else _simulated_path(args)
        depth = args.depth or 4
        engine = geometric_signature if args.kind == "geometric" else ito_discrete_signature
        sig = engine(path, depth)
        _emit(_signature_csv(sig) if args.format == "csv" else sig.to_json(), args.out)
        return EXIT_OK

    if args.command == "estimate-qv":
        report = run_qv_recovery(_config(args, "qv-recovery", qv=args.qv, mode=args.mode))
    elif args.command == "estimate-hurst":
        report = run_hurst_recovery(_config(args, "hurst-recovery"))
    elif args.command == "moment-identity":
        report = run_moment_identity(_config(args, "moment-identity"))
    elif args.command == "conjecture":
        report = run_conjecture(_config(args, "conjecture", matrices=args.matrix))
    else:  # pragma: no cover - argparse restricts the choices
        raise _UsageError(f"unknown command {args.command}")

    _emit(report.to_csv() if args.format == "csv" else report.to_json(), args.out)
    for check in report.checks:
        status = "PASS" if check["passed"] else "FAIL"
        gate = "" if check["gating"] else " (informational)"
        print(f"[{status}] {check['name']}{gate}", file=sys.stderr)
    if args.check and not report.passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return _dispatch(args)
    except (ConfigError, ValueError, MemoryBudgetError, OSError) as exc:
        print(f"sigscope: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
