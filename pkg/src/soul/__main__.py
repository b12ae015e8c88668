"""Command line entry point: ``python -m soul {run,report} ...``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ARMS, ConfigError, ExperimentConfig, paper_config
from .harness import AXES, ReportError, report, run_sweep, summarize

log = logging.getLogger("soul")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _csv_list(text: str, cast=str) -> list:
    return [cast(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soul", description="Federated unlearning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep and write results.csv")
    run.add_argument("--config", help="JSON experiment config; flags override it")
    run.add_argument("--paper-params", action="store_true",
                     help="start from the published constants (50 drones, 200 rounds, ...)")
    run.add_argument("--arm", action="append", choices=ARMS,
                     help="arm to run (repeatable); default: all arms in the config")
    run.add_argument("--axis", choices=AXES, default="unlearn_clients")
    run.add_argument("--values", help="comma-separated axis values; default: the config's value")
    run.add_argument("--seeds", type=int, help="number of seeds (master_seed, master_seed+1, ...)")
    run.add_argument("--rounds", type=int, help="override the number of global rounds")
    run.add_argument("--out-dir", default="runs/latest")
    run.add_argument("--workers", type=int, default=1)

    rep = sub.add_parser("report", help="aggregate results.csv into figure tables")
    rep.add_argument("csv_path")
    rep.add_argument("--out-dir")

    for p in (run, rep):
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.paper_params:
        cfg = paper_config(**({"arms": cfg.arms} if args.config else {}))
    if args.rounds is not None:
        cfg = cfg.replace(rounds=args.rounds)
    if args.seeds is not None:
        cfg = cfg.replace(seeds=args.seeds)
    if args.arm:
        cfg = cfg.replace(arms=tuple(dict.fromkeys(args.arm)))
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        if args.command == "run":
            cfg = _resolve_config(args)
            try:
                values = _csv_list(args.values, float) if args.values else [getattr(cfg, args.axis)]
            except ValueError as exc:
                raise ConfigError(f"bad --values: {exc}") from exc
            rows = run_sweep(cfg, args.axis, values, out_dir=args.out_dir, workers=args.workers)
            log.info(summarize(rows, args.axis))
            log.info("wrote %d rows to %s/results.csv", len(rows), args.out_dir)
        else:
            text, paths = report(args.csv_path, args.out_dir)
            log.info(text)
            for name, path in paths.items():
                log.info("wrote %s", path)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except ReportError as exc:
        log.error("report error: %s", exc)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.error("runtime failure: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
