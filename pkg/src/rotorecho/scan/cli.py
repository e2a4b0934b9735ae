"""Command line front end.

    rotorecho <subcommand> [--config FILE] [--out DIR] [--workers N]
                           [--seed U64] [--check]

Subcommands: echo-series | coupling-scan | hbar-scan | equilibrate |
bipartite | rmt-check.  Flags override config values.  Exit codes:
0 success, 2 configuration error, 3 physics-layer error, 4 self-check
failure (with --check).
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from ..echo import EchoError
from ..reduced import CentralError
from ..bipartite import BipartiteError
from ..rmt import RmtError
from ..rotor import BoundarySpreadError, RotorError
from ..states import StateError
from .config import EXPERIMENTS, ConfigError, ScanConfig, load_config
from .csvio import read_csv
from .experiments import FIT_HEADER, PhysicsRunError, RunResult, run
from .fitting import loglog_fit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_CHECK = 4

PHYSICS_ERRORS = (RotorError, BoundarySpreadError, EchoError, CentralError,
                  BipartiteError, RmtError, StateError, PhysicsRunError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotorecho",
        description="batch experiments on decoherence by a chaotic kicked-rotor "
                    "environment")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--workers", type=int, help="scan-point worker processes")
        p.add_argument("--seed", type=int, help="run seed (overrides config)")
        p.add_argument("--check", action="store_true",
                       help="validate outputs after the run; exit 4 on failure")
    return parser


def config_from_args(args) -> ScanConfig:
    cfg = ScanConfig(experiment=args.experiment)
    if args.config is not None:
        cfg = load_config(args.config, cfg)
        if cfg.experiment != args.experiment:
            cfg = replace(cfg, experiment=args.experiment)
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validated()


def _check_fit_files(out: Path, manifest: dict, failures: list):
    """Re-fit each scan CSV from disk; must reproduce the manifest exactly."""
    pairs = [("hbar_scan.csv", "fit_mean", 1), ("hbar_scan.csv", "fit_std", 2),
             ("dhs_scan.csv", "fit_dhs", 1)]
    for scan_name, fit_key, col in pairs:
        scan_path = out / scan_name
        if not scan_path.exists() or fit_key not in manifest:
            continue
        _, rows = read_csv(scan_path)
        fit = loglog_fit([r[0] for r in rows], [r[col] for r in rows])
        recorded = manifest[fit_key]
        for name in FIT_HEADER:
            if getattr(fit, name if name != "n_points" else "n_points") != recorded[name]:
                failures.append(f"{fit_key}.{name} does not reproduce from {scan_name}")


def _check_series_files(out: Path, failures: list):
    for path in sorted(out.glob("series_h*.csv")):
        _, rows = read_csv(path)
        if rows[0][0] != 0 or abs(rows[0][1] - 1) > 1e-12 or abs(rows[0][2]) > 1e-12:
            failures.append(f"{path.name}: series does not start at f(0)=1")
        for r in rows:
            if abs(r[3] - (r[1] ** 2 + r[2] ** 2)) > 1e-12:
                failures.append(f"{path.name}: F != |f|^2 at t={int(r[0])}")
                break
            if r[3] < 0 or r[3] > 1 + 1e-10:
                failures.append(f"{path.name}: F out of range at t={int(r[0])}")
                break


def _check_equilibrate_files(out: Path, failures: list):
    for path in sorted(out.glob("equilibrate_h*.csv")):
        _, rows = read_csv(path)
        for r in rows:
            if r[1] > r[4] + 1e-12:
                failures.append(
                    f"{path.name}: trace distance exceeds its bound at t={int(r[0])}")
                break


def _check_bipartite(manifest: dict, failures: list):
    sd = manifest.get("sudden_death")
    if sd is None:
        failures.append("bipartite manifest lacks sudden_death metadata")
        return
    analytic = 3.0 - 2.0 * math.sqrt(2.0)
    if abs(sd["bisection_root_F"] - analytic) > 1e-10:
        failures.append("sudden-death bisection root drifted from 3 - 2*sqrt(2)")
    if "discrepancy_note" not in sd:
        failures.append("sudden-death metadata lacks the printed-value discrepancy note")


def self_check(result: RunResult) -> list:
    failures: list = []
    out = result.out_dir
    manifest = result.manifest
    for f in result.files:
        if not Path(f).exists():
            failures.append(f"declared output {f} missing")
    _check_fit_files(out, manifest, failures)
    _check_series_files(out, failures)
    _check_equilibrate_files(out, failures)
    if manifest.get("experiment") == "bipartite":
        _check_bipartite(manifest, failures)
    return failures


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PHYSICS_ERRORS as exc:
        print(f"physics error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    for f in result.files:
        print(f"wrote {f}")
    if args.check:
        failures = self_check(result)
        if failures:
            for msg in failures:
                print(f"self-check failed: {msg}", file=sys.stderr)
            return EXIT_CHECK
        print("self-check passed")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
