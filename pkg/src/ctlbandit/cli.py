"""Command line entry point: ``ctlbandit run`` and ``ctlbandit compare``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .experiment import ALGOS, ConfigError, emit_csv, load_config, run_experiment

logger = logging.getLogger("ctlbandit")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _common(parser):
    parser.add_argument("--config", required=True, help="flat key = value TOML file")
    parser.add_argument("--seed", type=int, help="override seed_base")
    parser.add_argument("--out", help="override out_dir")
    parser.add_argument("--replicas", type=int, help="override replicas")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true")
    verbosity.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctlbandit", description="Multi-agent sparse bandit experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one algorithm over seeded replicas")
    _common(run)
    run.add_argument("--algo", choices=ALGOS)
    compare = sub.add_parser("compare", help="run several algorithms on matched environment streams")
    _common(compare)
    compare.add_argument("--algos", required=True, help="comma-separated, e.g. cctl,dctl,sa_lasso")
    return parser


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed_base"] = args.seed
    if args.out is not None:
        out["out_dir"] = args.out
    if args.replicas is not None:
        out["replicas"] = args.replicas
    if getattr(args, "algo", None):
        out["algo"] = args.algo
    return out


def _run_one(cfg, out_dir):
    resolved, traces, summary = run_experiment(cfg)
    emit_csv(summary, traces, out_dir, resolved)
    logger.info(
        "%s: mean cumulative regret per agent at T=%d: %.3f (sd %.3f), lambda0=%g",
        resolved.algo, resolved.T, summary.final_mean, summary.sd_cum_regret[-1], resolved.lambda0,
    )
    return resolved, summary


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means a runtime failure
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = load_config(args.config).replace(**_overrides(args))
        if args.command == "compare":
            algos = [a.strip() for a in args.algos.split(",") if a.strip()]
            bad = [a for a in algos if a not in ALGOS]
            if bad or not algos:
                raise ConfigError(f"unknown algorithm(s): {', '.join(bad) or '<none>'}")
            configs = [cfg.replace(algo=a) for a in algos]
        else:
            configs = [cfg]
    except (ConfigError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            _run_one(configs[0], cfg.out_dir)
        else:
            rows = []
            for c in configs:
                resolved, summary = _run_one(c, Path(cfg.out_dir) / c.algo)
                rows.append([c.algo, resolved.lambda0, summary.final_mean, summary.final_se, summary.comm_indices.mean()])
            path = Path(cfg.out_dir) / "comparison.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["algo", "lambda0", "final_mean_cum_regret", "final_se", "mean_comm_indices"])
                w.writerows([[a, repr(float(l)), repr(m), repr(se), repr(float(ci))] for a, l, m, se, ci in rows])
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.error("%s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
