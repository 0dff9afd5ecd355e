"""Command-line entry point.

Exit codes: 0 success, 1 missing or malformed input (including unknown
flags), 2 failed validation, 3 soundness violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .clt_transfer import CoefficientArray, rr_error_bound, transfer_bound
from .errors import ConfigurationError, GPTBError, HypothesisError
from .gaussian_core import CorrelationMatrix, mc_sup_tail, orthant_prob_oracle
from .pickands import CSV_COLUMNS, E_OVER_2, pickands_lower_surrogate
from .prime_process import (
    PrimeProcessConfig,
    block_decoupling_error,
    build_block_matrix,
    corollary2_experiment,
    halasz_bound_instance,
    halasz_parameters,
)
from .suite import ROW_FIELDS, run_suite
from .tail_bounds import BoundConfig, prop1_bound

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_UNSOUND = 0, 1, 2, 3


class InputError(Exception):
    """Missing or malformed input (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    config_echo: dict
    seed: int
    tool_version: str = __version__
    started: str = ""
    finished: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _read_json(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def _load_matrix(obj, base: Path | None = None) -> CorrelationMatrix:
    if isinstance(obj, str):
        path = Path(obj)
        if base is not None and not path.is_absolute():
            path = base / path
        obj = _read_json(str(path))
    try:
        return CorrelationMatrix.from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad correlation matrix: {exc}") from exc


def _emit(args, manifest: RunManifest, payload: dict | None = None, rows: list[dict] | None = None,
          columns=None) -> None:
    manifest.finished = _now()
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        buf.write("# manifest: " + json.dumps(_jsonable(manifest.to_dict()), sort_keys=True) + "\n")
        writer = csv.DictWriter(buf, fieldnames=list(columns or rows[0].keys()) if (columns or rows) else [],
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(v) for k, v in row.items()})
        text = buf.getvalue()
    else:
        body = dict(payload or {})
        if rows is not None and "rows" not in body:
            body["rows"] = rows
        body["manifest"] = manifest.to_dict()
        text = json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_bound(args) -> int:
    cfg_obj = _read_json(args.config)
    if not isinstance(cfg_obj, dict) or "matrix" not in cfg_obj:
        raise InputError("config must be a JSON object with a 'matrix' entry")
    base = Path(args.config).parent
    m = _load_matrix(cfg_obj.pop("matrix"), base)
    manifest = RunManifest("bound", cfg_obj, args.seed, started=_now())
    try:
        cfg = BoundConfig.from_dict(cfg_obj)
        res = prop1_bound(m, cfg, allow_boundary=bool(args.allow_boundary))
    except ConfigurationError as exc:
        report = exc.report.to_dict() if exc.report is not None else None
        _emit(args, manifest, {"error": str(exc), "validation": report})
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    _emit(args, manifest, res.to_dict(), rows=res.csv_rows())
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _read_json(args.suite)
    if not isinstance(spec, dict):
        raise InputError("suite spec must be a JSON object")
    manifest = RunManifest("sweep", spec, args.seed, started=_now())
    rows = run_suite(spec, workers=args.threads)
    failed = [r for r in rows if not r.passed]
    summary = {"instances": len(rows), "passed": len(rows) - len(failed), "failed": len(failed)}
    _emit(args, manifest, {"summary": summary}, rows=[r.to_dict() for r in rows], columns=ROW_FIELDS)
    print(f"passed {summary['passed']} / {summary['instances']}", file=sys.stderr)
    for r in failed:
        print(f"UNSOUND {r.family}[{r.index}] n={r.n} u={r.u}: bound {r.bound!r} > reference "
              f"{r.reference!r} (+4se {4 * r.std_err!r})", file=sys.stderr)
    return EXIT_UNSOUND if failed else EXIT_OK


def cmd_pickands(args) -> int:
    echo = {"alpha": args.alpha, "u": args.u, "b": args.b, "a": args.a, "delta": args.delta}
    manifest = RunManifest("pickands", echo, args.seed, started=_now())
    evals = [pickands_lower_surrogate(al, u, args.b, args.a, args.delta)
             for al in args.alpha for u in args.u]
    _emit(args, manifest, {"evaluations": [e.to_dict() for e in evals]},
          rows=[e.csv_row() for e in evals], columns=CSV_COLUMNS)
    return EXIT_OK


def _auto_or_float(v: str):
    return v if v == "auto" else float(v)


def cmd_primeproc(args) -> int:
    cfg = PrimeProcessConfig(args.x, _auto_or_float(args.y), _auto_or_float(args.E), args.K,
                             args.M, args.block, args.B)
    manifest = RunManifest("primeproc", cfg.to_dict() | {"samples": args.samples}, args.seed, started=_now())
    report = build_block_matrix(cfg)
    bound = halasz_bound_instance(cfg, matrix=report.exact)
    u, H, delta = halasz_parameters(cfg)
    out = {
        "config": cfg.to_dict(),
        "u": u, "H": H, "delta": delta,
        "covariance": report.to_dict(matrices=args.matrices),
        "halasz_bound": bound.to_dict(),
        "shape_scalar": bound.bound * cfg.loglog_x ** 2 / math.sqrt(max(math.log(cfg.loglog_x), 1e-300)),
    }
    sound = True
    if args.samples > 0:
        est = mc_sup_tail(report.exact, u, args.samples, args.seed, workers=args.threads)
        out["mc_sup_tail"] = est.to_dict()
        sound = bound.bound <= est.p_hat + 4.0 * est.std_err
        if (cfg.B + 1) * cfg.M <= 4096 and cfg.B >= 1:
            out["decoupling_error"] = block_decoupling_error(cfg)
            exp = corollary2_experiment(cfg, args.samples, args.seed, workers=args.threads)
            out["corollary2"] = exp.to_dict()
            sound = sound and exp.sound
    out["sound"] = sound
    _emit(args, manifest, out)
    return EXIT_OK if sound else EXIT_UNSOUND


def cmd_clt_error(args) -> int:
    obj = _read_json(args.coeffs)
    try:
        coeffs = CoefficientArray.from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad coefficient file: {exc}") from exc
    echo = {"coeffs": args.coeffs, "a": args.a, "b": args.b, "mode": args.mode, "samples": args.samples}
    manifest = RunManifest("clt-error", echo, args.seed, started=_now())
    rep = rr_error_bound(coeffs, args.a, args.b, args.mode)
    out = {"error": rep.to_dict()}
    code = EXIT_OK
    if args.samples > 0:
        tr = transfer_bound(coeffs, args.a, args.b, args.samples, args.seed, args.mode)
        out["transfer"] = tr.to_dict()
        code = EXIT_OK if tr.holds else EXIT_UNSOUND
    _emit(args, manifest, out, rows=[rep.to_dict()])
    return code


def cmd_mc(args) -> int:
    m = _load_matrix(args.matrix)
    manifest = RunManifest("mc", {"matrix": args.matrix, "u": args.u, "samples": args.samples},
                           args.seed, started=_now())
    est = mc_sup_tail(m, args.u, args.samples, args.seed, workers=args.threads)
    _emit(args, manifest, est.to_dict(), rows=[est.to_dict()])
    return EXIT_OK


def cmd_oracle(args) -> int:
    m = _load_matrix(args.matrix)
    th = args.thresholds if len(args.thresholds) > 1 else args.thresholds * m.n
    manifest = RunManifest("oracle", {"matrix": args.matrix, "thresholds": th}, args.seed, started=_now())
    p = orthant_prob_oracle(m, th)
    row = {"orthant_probability": p, "sup_tail": 1.0 - p}
    _emit(args, manifest, row, rows=[row])
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def common(defaults: bool) -> argparse.ArgumentParser:
        c = _Parser(add_help=False)
        d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
        c.add_argument("--seed", type=int, default=d(0), help="64-bit unsigned seed")
        c.add_argument("--threads", type=int, default=d(1), help="Monte-Carlo worker threads")
        c.add_argument("--out", default=d(None), help="output file (default stdout)")
        c.add_argument("--format", choices=("json", "csv"), default=d(None),
                       help="output format (default json; csv for pickands)")
        return c

    # global flags may appear before or after the subcommand
    p = _Parser(prog="gptb", description="Gaussian supremum tail bounds and their verification.",
                parents=[common(True)])
    local = common(False)
    p.add_argument("--version", action="version", version=f"gptb {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("bound", parents=[local], help="lower bound for P(max Z > u)")
    s.add_argument("config", help="JSON: BoundConfig fields plus 'matrix' (object or path)")
    s.add_argument("--allow-boundary", action="store_true",
                   help="accept (c, d) pairs whose margin is exactly zero")
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("sweep", parents=[local], help="soundness sweep over a suite spec")
    s.add_argument("suite", help="JSON suite specification")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("pickands", parents=[local], help="Pickands-constant surrogates")
    s.add_argument("--alpha", type=float, nargs="+", required=True)
    s.add_argument("--u", type=float, nargs="+", required=True)
    s.add_argument("--b", type=float, default=E_OVER_2)
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=None, help="default: alpha")
    s.set_defaults(func=cmd_pickands, preferred_format="csv")

    s = sub.add_parser("primeproc", parents=[local], help="prime-indexed process report")
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--y", default="auto")
    s.add_argument("--E", default="auto")
    s.add_argument("--K", type=float, default=2.0)
    s.add_argument("--M", type=int, default=None)
    s.add_argument("--B", type=int, default=None)
    s.add_argument("--block", type=int, default=0)
    s.add_argument("--samples", type=lambda v: int(float(v)), default=0)
    s.add_argument("--matrices", action="store_true", help="include both matrices in the report")
    s.set_defaults(func=cmd_primeproc)

    s = sub.add_parser("clt-error", parents=[local], help="Rademacher-to-Gaussian transfer error")
    s.add_argument("--coeffs", required=True)
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--b", type=float, required=True)
    s.add_argument("--mode", choices=("exact", "max"), default="exact")
    s.add_argument("--samples", type=lambda v: int(float(v)), default=0)
    s.set_defaults(func=cmd_clt_error)

    s = sub.add_parser("mc", parents=[local], help="Monte-Carlo estimate of P(max Z > u)")
    s.add_argument("--matrix", required=True)
    s.add_argument("--u", type=float, required=True)
    s.add_argument("--samples", type=lambda v: int(float(v)), default=1_000_000)
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("oracle", parents=[local], help="exact P(Z <= thresholds), n <= 3")
    s.add_argument("--matrix", required=True)
    s.add_argument("--thresholds", type=float, nargs="+", required=True)
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = getattr(args, "preferred_format", "json")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigurationError, HypothesisError, GPTBError, ValueError) as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
