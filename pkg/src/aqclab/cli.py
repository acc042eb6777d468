"""Command-line entry point: ``aqclab <kind> [--config FILE] [--out DIR] ...``.

Exit codes: 0 success, 2 invalid configuration or usage, 3 solver or integrator
failure, 4 malformed input file, 1 anything else.  Every failure writes a JSON
error record to stderr and, when the output directory is known, to
``error.json`` inside it.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .config import KINDS, ConfigError, ExperimentConfig
from .errors import ContractError, ConvergenceError, FormatError, IntegratorError
from .evolution import BracketError
from .experiments import run_experiment
from .gaps import GapProfile, compare_profiles
from .io import sha256, write_json

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_SOLVER, EXIT_FORMAT = 0, 1, 2, 3, 4


def _versions():
    return {"aqclab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "pyyaml": yaml.__version__}


def _common(p):
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="64-bit seed")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--grid", type=int, help="number of s samples")
    p.add_argument("--tol", type=float, help="eigensolver residual tolerance")
    p.add_argument("--n", type=int, help="qubit count")
    p.add_argument("--target", type=int, help="target basis index")
    p.add_argument("--family", choices=["separable", "grover", "sat", "random-final", "gh1",
                                        "shift"])
    p.add_argument("--cnf", dest="cli_cnf", help="DIMACS CNF file")
    p.add_argument("--clauses", type=int, help="clause count for seeded random 3-SAT")
    p.add_argument("--T", type=float, help="total evolution time")


def build_parser():
    parser = argparse.ArgumentParser(prog="aqclab",
                                     description="Adiabatic-algorithm spectral experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment named by the config's kind")
    _common(run)
    for kind in KINDS:
        _common(sub.add_parser(kind, help=f"{kind} experiment"))
    cmp_ = sub.add_parser("compare", help="compare two gap-profile JSON files")
    cmp_.add_argument("profile_a", type=Path)
    cmp_.add_argument("profile_b", type=Path)
    cmp_.add_argument("--out", type=Path, help="write the report here (default: stdout)")
    return parser


_OVERRIDES = {"seed": "seed", "threads": "threads", "grid": "grid", "tol": "tol", "n": "n",
              "target": "target", "family": "family", "cli_cnf": "cnf", "clauses": "clauses",
              "T": "T"}


def config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config is not None:
        if not args.config.exists():
            raise ConfigError({"--config": f"file {args.config} does not exist"})
        base = yaml.safe_load(args.config.read_text()) or {}
        if not isinstance(base, dict):
            raise ConfigError({"<root>": "config must be a mapping"})
    if args.command != "run":
        if "kind" in base and base["kind"] != args.command:
            raise ConfigError({"kind": f"config says {base['kind']!r} but the subcommand is "
                                       f"{args.command!r}"})
        base["kind"] = args.command
    for attr, key in _OVERRIDES.items():
        value = getattr(args, attr, None)
        if value is not None:
            base[key] = value
    if args.out is not None:
        base["out"] = str(args.out)
    cnf = base.get("cnf")
    if cnf and args.config is not None and args.cli_cnf is None and not Path(cnf).is_absolute():
        # paths inside a config file are relative to that file
        base["cnf"] = str(args.config.parent / cnf)
    return ExperimentConfig.from_dict(base)


def _error_record(exc, code):
    rec = {"status": "error", "exit_code": code, "type": type(exc).__name__, "message": str(exc)}
    for attr in ("fields", "line", "s", "t", "best_residual"):
        value = getattr(exc, attr, None)
        if value is not None:
            rec[attr] = value
    if isinstance(exc, BracketError):
        rec["curve"] = [list(c) for c in exc.curve]
    return rec


def _classify(exc):
    if isinstance(exc, ConfigError):
        return EXIT_USAGE
    if isinstance(exc, FormatError):
        return EXIT_FORMAT
    if isinstance(exc, (ConvergenceError, IntegratorError, BracketError)):
        return EXIT_SOLVER
    if isinstance(exc, ContractError):
        return EXIT_USAGE
    return EXIT_ERROR


def _fail(exc, out):
    code = _classify(exc)
    rec = _error_record(exc, code)
    if code == EXIT_ERROR:
        rec["traceback"] = traceback.format_exc()
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "error.json", rec)
    print(json.dumps(rec, default=str), file=sys.stderr)
    return code


def run_config(cfg: ExperimentConfig, out=None):
    """Run one experiment and write its manifest; returns the manifest dict."""
    out = Path(out if out is not None else (cfg.out or f"runs/{cfg.kind}"))
    t0 = time.perf_counter()
    files, summary = run_experiment(cfg, out)
    wall = time.perf_counter() - t0
    # the output location is not part of what the run computes
    echo = dataclasses.replace(cfg, out=None)
    (out / "config.yaml").write_text(echo.to_yaml())
    files = [out / "config.yaml"] + files
    manifest = {
        "status": "ok",
        "kind": cfg.kind,
        "config": echo.to_dict(),
        "out": str(out),
        "versions": _versions(),
        "seeds": {"seed": cfg.seed},
        "wall_time_s": wall,
        "outputs": {str(f.relative_to(out)): {"sha256": sha256(f), "bytes": f.stat().st_size}
                    for f in files},
        "summary": summary,
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = getattr(args, "out", None)
    try:
        if args.command == "compare":
            a = GapProfile.from_json(args.profile_a)
            b = GapProfile.from_json(args.profile_b)
            report = compare_profiles(a, b)
            if out is not None:
                write_json(out, report)
            else:
                print(json.dumps(report, indent=2))
            return EXIT_OK
        cfg = config_from_args(args)
        out = out or cfg.out or Path("runs") / cfg.kind
        manifest = run_config(cfg, out)
        print(json.dumps({"status": "ok", "out": str(out), "summary": manifest["summary"]},
                         default=str))
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        return _fail(exc, out if args.command != "compare" else None)


if __name__ == "__main__":
    sys.exit(main())
