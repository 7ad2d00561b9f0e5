"""Command-line front end.

Subcommands: ``check``, ``simulate``, ``limit``, ``compare`` and ``bounds``.
Exit codes: 0 success or PASS, 1 usage or input error, 2 FAIL,
3 INDETERMINATE.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .diameter import NotEnoughPairs, RateSpec
from .experiments import (KS_TOLERANCE, Ecdf, body_dict, default_rate, ks_distance,
                          run_bounds_check, run_limit, simulate_statistics)
from .geometry import GeometryError, PoleCaps, PSuperellipsoid, check_body, parse_body
from .limitlaw import (DEFAULT_B, EmptyProcess, LambdaBeta, UniformDensity,
                       limit_config_for)
from .sampling import DistributionSpec

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_INDETERMINATE = 0, 1, 2, 3
VERDICT_EXIT = {"PASS": EXIT_OK, "FAIL": EXIT_FAIL, "INDETERMINATE": EXIT_INDETERMINATE}


class InputError(Exception):
    """Bad user input; ``field`` names the offending flag."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# --------------------------------------------------------------------------
# Run configuration
# --------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Command name plus the parsed parameters, as echoed in every report."""

    command: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, "params": dict(sorted(self.params.items()))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(data["command"], dict(data["params"]))

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def to_argv(self) -> list:
        """Flags that reproduce this configuration."""
        argv = [self.command]
        for key, value in sorted(self.params.items()):
            if value is None:
                continue
            if key == "csv_files":
                argv.extend(value)
                continue
            flag = "--" + key.replace("_", "-")
            if isinstance(value, (list, tuple)) and value and isinstance(value[0], list):
                argv += [flag, ";".join(",".join(repr(float(v)) for v in row) for row in value)]
            elif isinstance(value, (list, tuple)):
                argv += [flag, ",".join(repr(float(v)) for v in value)]
            elif isinstance(value, float):
                argv += [flag, repr(value)]
            else:
                argv += [flag, str(value)]
        return argv


_CONFIG_KEYS = {
    "check": ("body", "axes", "p", "a", "hl", "hr", "tol"),
    "simulate": ("body", "axes", "p", "dist", "n", "reps", "mode", "norm_p", "k", "seed"),
    "limit": ("body", "axes", "p", "a", "hl", "hr", "intensity", "b", "reps", "k", "seed"),
    "compare": ("csv_files", "column"),
    "bounds": ("d", "e", "beta", "axes", "n", "reps", "t_grid", "seed"),
}


def run_config(args) -> RunConfig:
    params = {}
    for key in _CONFIG_KEYS[args.command]:
        value = getattr(args, key, None)
        if isinstance(value, tuple):
            value = list(value)
        params[key] = value
    return RunConfig(args.command, params)


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------

def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _matrix(text: str) -> list:
    """``0.4`` (1x1), ``1,2`` (diagonal) or ``1,0.1;0.1,2`` (rows)."""
    try:
        if ";" in text:
            return [[float(v) for v in row.split(",")] for row in text.split(";")]
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse matrix {text!r}")
    return np.diag(vals).tolist()


def _add_body(p: argparse.ArgumentParser, polecaps: bool = True) -> None:
    kinds = ["ellipsoid", "psuperellipsoid"] + (["polecaps"] if polecaps else [])
    p.add_argument("--body", choices=kinds, default="ellipsoid")
    p.add_argument("--axes", type=_float_list, help="half-axes, descending, comma separated")
    p.add_argument("--p", type=float, help="exponent of the p-superellipsoid")
    if polecaps:
        p.add_argument("--a", type=float, help="half-diameter of a pole-cap body")
        p.add_argument("--hl", type=_matrix, help="left pole Hessian")
        p.add_argument("--hr", type=_matrix, help="right pole Hessian")


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path; a JSON sidecar is written next to it")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: DIAMLIMIT_THREADS or 1); never changes output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diamlimit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="pole-curvature conditions for a unique diameter")
    _add_body(p)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("simulate", help="scaled statistics of simulated clouds")
    _add_body(p, polecaps=False)
    p.add_argument("--dist", default="uniform", help="uniform | pearson:<beta> | uniform-p:<p>")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=["poissonized", "fixed"], default="poissonized")
    p.add_argument("--norm-p", type=float, default=None)
    _add_run(p)

    p = sub.add_parser("limit", help="truncated approximation of the limit law")
    _add_body(p)
    p.add_argument("--intensity", default=None,
                   help="uniform:<p_l>,<p_r> | lambda:<alpha_l>,<alpha_r>,<beta>[,<beta_r>]")
    p.add_argument("--b", "--truncation", dest="b", type=float, default=DEFAULT_B)
    _add_run(p)

    p = sub.add_parser("compare", help="two-sample KS distance of two CSV files")
    p.add_argument("csv_files", nargs=2)
    p.add_argument("--column", type=int, default=1, help="1-based value column")

    p = sub.add_parser("bounds", help="bounds check with several equal major half-axes")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--e", type=int, required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--axes", type=_float_list, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--t-grid", type=_float_list, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    return parser


def _body(args):
    kind = args.body
    if kind in ("ellipsoid", "psuperellipsoid"):
        if args.axes is None:
            raise InputError("--axes", f"required for --body {kind}")
        if kind == "psuperellipsoid" and args.p is None:
            raise InputError("--p", "required for --body psuperellipsoid")
    else:
        for name in ("a", "hl", "hr"):
            if getattr(args, name) is None:
                raise InputError(f"--{name}", "required for --body polecaps")
    try:
        return parse_body(kind, args.axes, args.p, getattr(args, "a", None),
                          getattr(args, "hl", None), getattr(args, "hr", None))
    except GeometryError as exc:
        raise InputError("--axes" if kind != "polecaps" else "--hl/--hr",
                         f"{type(exc).__name__}: {exc}")


def _intensities(text: Optional[str]):
    if text is None:
        return None
    name, _, rest = text.partition(":")
    try:
        vals = [float(v) for v in rest.split(",")]
        if name == "uniform" and len(vals) == 2:
            return UniformDensity(vals[0]), UniformDensity(vals[1])
        if name == "lambda" and len(vals) in (3, 4):
            beta_r = vals[3] if len(vals) == 4 else vals[2]
            return vals, beta_r
    except ValueError as exc:
        raise InputError("--intensity", str(exc))
    raise InputError("--intensity", f"cannot parse {text!r}")


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------

def format_csv(values: np.ndarray) -> str:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    k = values.shape[1]
    header = "value" if k == 1 else ",".join(f"value_{i + 1}" for i in range(k))
    buf = io.StringIO(newline="")
    buf.write(header + "\n")
    for row in values:
        buf.write(",".join("%.17g" % v for v in row) + "\n")
    return buf.getvalue()


def read_csv(path: str, column: int = 1) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise InputError("csv_files", f"no such file {path}")
    lines = p.read_text().splitlines()
    if len(lines) < 2:
        raise InputError("csv_files", f"{path} has no values")
    try:
        return np.array([float(line.split(",")[column - 1]) for line in lines[1:] if line])
    except (ValueError, IndexError) as exc:
        raise InputError("--column", f"{path}: {exc}")


def _sidecar_path(out: str) -> Path:
    return Path(out).with_suffix(".json")


def _write_outputs(args, csv_text: str, report: dict, stdout) -> None:
    if args.out:
        Path(args.out).write_bytes(csv_text.encode())
        _sidecar_path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        stdout.write(csv_text)


def _emit_json(report: dict, stdout) -> None:
    stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_check(args, stdout) -> int:
    body = _body(args)
    try:
        report = check_body(body, tol=args.tol)
    except GeometryError as exc:
        field_name = "--hl/--hr" if isinstance(body, PoleCaps) else "--axes"
        raise InputError(field_name, f"{type(exc).__name__}: {exc}")
    out = report.to_dict()
    out["config"] = run_config(args).to_dict()
    _emit_json(out, stdout)
    return VERDICT_EXIT[report.verdict]


def cmd_simulate(args, stdout) -> int:
    body = _body(args)
    try:
        dist = DistributionSpec.parse(args.dist)
    except ValueError as exc:
        raise InputError("--dist", str(exc))
    if dist.kind == "pearson2" and isinstance(body, PSuperellipsoid):
        raise InputError("--dist", "Pearson Type II needs --body ellipsoid")
    if args.n < 1:
        raise InputError("--n", "must be >= 1")
    if args.reps < 1:
        raise InputError("--reps", "must be >= 1")
    if args.k < 1:
        raise InputError("--k", "must be >= 1")
    norm_p = args.norm_p
    if norm_p is None:
        norm_p = body.p if isinstance(body, PSuperellipsoid) else (
            dist.p if dist.kind == "uniform_p" else 2.0)
    if norm_p < 1:
        raise InputError("--norm-p", "must be >= 1")
    rate = default_rate(body, dist, norm_p)
    try:
        res = simulate_statistics(body, dist, rate, args.n, args.reps, args.mode, args.seed,
                                  args.k, norm_p, args.threads)
    except NotEnoughPairs as exc:
        raise InputError("--k", str(exc))
    report = {"config": run_config(args).to_dict(), "seed": args.seed,
              "rate": rate.to_dict(), "runtime_seconds": res.runtime_seconds,
              "counts": res.count_stats(), "reps": args.reps}
    _write_outputs(args, format_csv(res.values), report, stdout)
    return EXIT_OK


def cmd_limit(args, stdout) -> int:
    body = _body(args)
    if args.reps < 1:
        raise InputError("--reps", "must be >= 1")
    if args.k < 1:
        raise InputError("--k", "must be >= 1")
    if not args.b > 0:
        raise InputError("--b", "must be positive")
    parsed = _intensities(args.intensity)
    dist = DistributionSpec("uniform")
    intensities = None
    if parsed is not None and isinstance(parsed[0], UniformDensity):
        intensities = parsed
    elif parsed is not None:
        (al, ar, bl), br = parsed
        if isinstance(body, PoleCaps) or isinstance(body, PSuperellipsoid):
            raise InputError("--intensity", "lambda intensities need --body ellipsoid")
        try:
            intensities = (LambdaBeta(al, bl, body.half_axes), LambdaBeta(ar, br, body.half_axes))
        except ValueError as exc:
            raise InputError("--intensity", str(exc))
    try:
        config = limit_config_for(body, dist, args.b, intensities)
        res = run_limit(config, None, args.reps, args.k, args.seed, args.threads)
    except (GeometryError, TypeError) as exc:
        raise InputError("--intensity", f"intensity/geometry mismatch: {exc}")
    except ValueError as exc:
        raise InputError("--k", str(exc))
    except EmptyProcess as exc:
        raise InputError("--b", str(exc))
    report = {"config": run_config(args).to_dict(), "seed": args.seed,
              "limit": config.to_dict(), "masses": config.masses(),
              "retries": res.retries, "runtime_seconds": res.runtime_seconds,
              "reps": args.reps}
    _write_outputs(args, format_csv(res.values), report, stdout)
    return EXIT_OK


def cmd_compare(args, stdout) -> int:
    a = read_csv(args.csv_files[0], args.column)
    b = read_csv(args.csv_files[1], args.column)
    ks = ks_distance(Ecdf(a), Ecdf(b))
    hashes = [hashlib.sha256(Path(f).read_bytes()).hexdigest() for f in args.csv_files]
    configs = []
    for f in args.csv_files:
        side = _sidecar_path(f)
        configs.append(hashlib.sha256(side.read_bytes()).hexdigest() if side.is_file() else None)
    report = {"ks": ks, "counts": [int(a.size), int(b.size)], "files": list(args.csv_files),
              "csv_sha256": hashes, "sidecar_sha256": configs,
              "tolerance": KS_TOLERANCE, "tolerance_note": "calibrated, not sourced",
              "config": run_config(args).to_dict()}
    _emit_json(report, stdout)
    return EXIT_OK


def cmd_bounds(args, stdout) -> int:
    try:
        report = run_bounds_check(args.d, args.e, args.beta, args.axes, args.n, args.reps,
                                  args.t_grid, args.seed, args.threads)
    except GeometryError as exc:
        raise InputError("--e", f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        raise InputError("--axes" if "axes" in str(exc) else "--beta", str(exc))
    out = report.to_dict()
    out["run_config"] = run_config(args).to_dict()
    _emit_json(out, stdout)
    return EXIT_OK


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "limit": cmd_limit,
            "compare": cmd_compare, "bounds": cmd_bounds}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "threads", None) is None and "DIAMLIMIT_THREADS" in os.environ:
        try:
            args.threads = int(os.environ["DIAMLIMIT_THREADS"])
        except ValueError:
            stderr.write("error: DIAMLIMIT_THREADS must be an integer\n")
            return EXIT_INPUT
    try:
        return COMMANDS[args.command](args, stdout)
    except InputError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
