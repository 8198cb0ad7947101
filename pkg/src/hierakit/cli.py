"""``hierakit`` command-line driver.

Usage::

    hierakit <command> [--config path.json] [--seed N] [--out DIR]
                       [--tol name=value ...] [--suite group,...] [--parallel]

Each command prints one line per check and exits with status 0 when every
check passes and 1 otherwise (2 for configuration errors).  With ``--out`` the
JSON report is written to ``DIR/<command>.json`` and, for the sweep commands,
the data to ``DIR/<command>.csv``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from .config import COMMANDS, SUITE_GROUPS, ConfigError, load_config, parse_tolerance
from .report import write_csv
from .suites import run_command

__all__ = ["main", "build_parser"]

_HELP = {
    "verify-algebra": "Lie-algebra identities of the hierarchy brackets, coefficients, Casimirs and gradients",
    "converge-bracket": "convergence of the N-body bracket to the limiting bracket as N grows (CSV: N,k,norm_diff)",
    "flow-equivalence": "Hamiltonian vector fields against the BBGKY and GP right-hand sides",
    "morphism": "Poisson-map identities of the density-matrix, reduced-density and factorization maps",
    "commuting-diagram": "exact N-body flow then reduced densities against the RK4 BBGKY flow (CSV: t,k,diff_norm)",
    "nls-gp": "split-step NLS and the factorized GP hierarchy (CSV: t,mass_drift,energy_drift,gp_residual)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hierakit", description="Numerical checks for BBGKY and GP hierarchies.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log integrator diagnostics")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--seed", type=int, help="integer seed for all random instances")
        p.add_argument("--out", help="directory for the JSON report and CSV data")
        p.add_argument(
            "--tol",
            action="append",
            default=[],
            metavar="NAME=VALUE",
            help="override a tolerance (repeatable)",
        )
        p.add_argument(
            "--suite",
            help=f"comma-separated subset of check groups: {', '.join(SUITE_GROUPS[name])}",
        )
        p.add_argument("--parallel", action="store_true", help="run independent check groups in threads")
        p.add_argument("--json", action="store_true", help="print the JSON report instead of the summary")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        overrides = dict(parse_tolerance(t) for t in args.tol)
        suite = [s.strip() for s in args.suite.split(",") if s.strip()] if args.suite else None
        cfg = load_config(
            args.command,
            args.config,
            seed=args.seed,
            output=args.out,
            tolerances=overrides,
            suite=suite,
        )
    except (ConfigError, OSError) as exc:
        print(f"hierakit: {exc}", file=sys.stderr)
        return 2

    result = run_command(cfg, parallel=args.parallel)
    report = result.report
    if cfg.output:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        if result.csv_columns:
            path = write_csv(out / f"{cfg.command}.csv", result.csv_columns, result.csv_rows)
            report.csv_path = str(path)
        (out / f"{cfg.command}.json").write_text(report.to_json() + "\n")
    print(report.to_json() if args.json else report.summary())
    return 0 if report.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
