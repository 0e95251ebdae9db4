"""Command-line experiment runner.

    gaussibp run --experiment E3 --seed 42 --out reports/e3

Exit codes: 0 when the experiment's acceptance gate passes, 2 when the
run completed but a measured quantity missed its window (so CI can gate
on thresholds), 1 on errors.  A failure mid-grid still writes the rows
collected so far together with an error entry in the JSON.  Wall-clock
time goes to stderr only; the emitted files stay byte-stable.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import experiments, reporting

_CONFIG_KEYS = ("experiment", "seed", "samples", "models", "n_grid", "n_ref",
                "m_grid", "figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussibp",
        description="Rate experiments for the Gaussian integration-by-parts "
                    "calculus.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and emit its report")
    run.add_argument("--experiment", choices=experiments.EXPERIMENTS,
                     help="which experiment to run (or set it in --config)")
    run.add_argument("--seed", type=int, help="base seed (default 42)")
    run.add_argument("--samples", type=int,
                     help="override the experiment's default sample count")
    run.add_argument("--out", help="output directory "
                                   "(default reports/<experiment>)")
    run.add_argument("--config", help="flat JSON file with config keys; "
                                      "command-line flags win")
    run.add_argument("--no-figures", action="store_true",
                     help="skip figure rendering")
    return parser


def _load_config(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a flat JSON object")
    unknown = sorted(set(data) - set(_CONFIG_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return data


def _resolve(args) -> tuple:
    merged: dict = {}
    if args.config:
        merged.update(_load_config(args.config))
    if args.experiment:
        merged["experiment"] = args.experiment
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.samples is not None:
        merged["samples"] = args.samples
    if args.no_figures:
        merged["figures"] = False
    if "experiment" not in merged:
        raise ValueError("an experiment id is required (flag or config file)")
    cfg = experiments.ExperimentConfig(**merged)
    out = args.out or f"reports/{cfg.experiment.lower()}"
    return cfg, out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out = _resolve(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    start = time.perf_counter()
    report = experiments.run(cfg)
    elapsed = time.perf_counter() - start
    try:
        paths = reporting.emit(report, out, figures=cfg.figures)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 1
    for note in report.notes:
        print(f"{cfg.experiment}: {note}", file=sys.stderr)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{cfg.experiment} finished in {elapsed:.1f}s: {verdict} -> {paths[0]}",
          file=sys.stderr)
    if report.error is not None:
        return 1
    return 0 if report.passed else 2


if __name__ == "__main__":
    raise SystemExit(main())
