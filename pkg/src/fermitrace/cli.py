"""Command line entry point.

Exit codes: 0 all assertions passed, 1 assertion failure, 2 configuration or
capacity error.
"""
from __future__ import annotations

import argparse
import sys

from .harness import (ConfigError, SweepConfig, emit, run_assumption_check,
                      run_convergence_study, run_fock_checks, run_kac_check,
                      run_state_dump)
from .manybody import CapacityError

_RUNNERS = {
    "converge": (run_convergence_study,
                 "exact vs mean-field distances over the epsilon sweep"),
    "assumptions": (run_assumption_check,
                    "scaled structure functionals of the reference states"),
    "fock-checks": (run_fock_checks,
                    "randomized operator-identity suite on the small Fock space"),
    "kac-check": (run_kac_check,
                  "dilated slow-time flow versus the standard flow"),
    "state-dump": (run_state_dump,
                   "build and persist the first cell's initial state"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermitrace",
        description="spectral mean-field fermion dynamics and its exact-oracle checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _RUNNERS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--workers", type=int, help="parallel cells (overrides config)")
        p.add_argument("--seed", type=int, help="rng seed (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = SweepConfig.from_toml(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.workers is not None:
            cfg.workers = args.workers
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
    except (ConfigError, CapacityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    runner = _RUNNERS[args.command][0]
    try:
        report = runner(cfg)
    except (ConfigError, CapacityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for path in emit(report, cfg.out_dir):
        print(path)
    passed = bool(report.get("all_passed", True))
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
