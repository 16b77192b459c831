"""Command-line entry point: ``run``, ``validate`` and ``summarize``."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

from .experiment import ScenarioError, load_scenario, read_csv, rows_to_csv, run_scenario, summarize
from .oracle import SUITES, OracleReport, validate


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    text = rows_to_csv(run_scenario(scenario))
    target = args.output or scenario.output
    if target and target != "-":
        with open(target, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_validate(args) -> int:
    reports = validate(args.suite, seed=args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(OracleReport.FIELDS)
    for r in reports:
        w.writerow(r.as_row())
    return 0 if all(r.passed for r in reports) else 1


def _cmd_summarize(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scheme", "sweep_name", "sweep_value", "mean_rate_bps", "sd_rate_bps", "trials"])
    for s in summarize(read_csv(args.csv)):
        w.writerow([s.scheme, s.sweep_name, f"{s.sweep_value:.17g}", f"{s.mean:.17g}",
                    f"{s.sd:.17g}", s.count])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swiet-relay", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file and emit CSV")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--output", "-o", default=None, help="CSV path ('-' for stdout)")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check solvers against brute-force oracles")
    val.add_argument("--suite", choices=sorted(SUITES), default=None)
    val.add_argument("--seed", type=int, default=0)
    val.set_defaults(func=_cmd_validate)

    summ = sub.add_parser("summarize", help="per-scheme mean and sd of a result CSV")
    summ.add_argument("csv")
    summ.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
