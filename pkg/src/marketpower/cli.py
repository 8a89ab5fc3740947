"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 stage failure, 3 estimation
diagnostic (a main regime fit could not be estimated, e.g. separation).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import MarketPowerError
from .monte_carlo import McConfig
from .pipeline import STAGES, load_config, run_stages, with_overrides
from .synthetic import SynthConfig, generate_market, with_hours, write_synthetic

EXIT_OK, EXIT_VALIDATION, EXIT_STAGE, EXIT_DIAGNOSTIC = 0, 1, 2, 3


def _common(p, config=True):
    if config:
        p.add_argument("--config", required=True, type=Path, help="key = value pipeline config")
    p.add_argument("--seed", type=int, help="override the Monte Carlo seed")
    p.add_argument("--jobs", type=int, help="worker processes for the Monte Carlo stage")
    p.add_argument("--hedge-rate", type=float, help="override the hedge rate in [0, 1]")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marketpower", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "validate the input files",
        "dispatch": "Monte Carlo competitive benchmark and dispatch deviations",
        "slope": "fuel-price regimes and piecewise supply-curve slopes",
        "incentives": "net profit from withholding and push-in",
        "fit": "regime-split logit fits",
        "report": "summary tables and binned calibration curves",
        "pipeline": "all stages",
    }
    for name, text in helps.items():
        _common(sub.add_parser(name, help=text))
    s = sub.add_parser("synth", help="write a synthetic market with planted deviations")
    _common(s, config=False)
    s.add_argument("--units", type=int, default=40)
    s.add_argument("--companies", type=int, default=6)
    s.add_argument("--hours", type=int, default=8760)
    s.add_argument("--iterations", type=int, default=200)
    s.add_argument("--null", action="store_true", help="plant no deviations")
    return parser


def _synth(args) -> int:
    base = with_hours(SynthConfig(), args.hours)
    cfg = replace(
        base,
        n_units=args.units, n_companies=args.companies,
        seed=args.seed if args.seed is not None else 0,
        hedge_rate=args.hedge_rate if args.hedge_rate is not None else base.hedge_rate,
        mc=McConfig(iterations=args.iterations, seed=args.seed if args.seed is not None else 0),
    )
    if args.null:
        cfg = replace(cfg, withhold_beta=(float("-inf"), 0.0), pushin_beta=(float("-inf"), 0.0))
    synth = generate_market(cfg, jobs=args.jobs or 1)
    out = write_synthetic(synth, args.out or Path("synthetic"), cfg)
    print(f"wrote synthetic market to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = with_overrides(load_config(args.config), args.seed, args.jobs, args.hedge_rate, args.out)
        stages = STAGES if args.command == "pipeline" else (args.command,)
        bundle = run_stages(cfg, stages)
    except MarketPowerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", EXIT_STAGE)
    if "fit" in stages and bundle.diagnostics:
        for line in bundle.diagnostics:
            print(f"diagnostic: {line}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    print(f"{args.command}: done ({', '.join(bundle.completed)}) -> {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
