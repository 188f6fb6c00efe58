"""Command line entry point: ``hsrecover run|recover|report``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys

import numpy as np

from . import io
from .experiments import NoCrossing, ValidationError, effective_t1, recover, run_campaign

log = logging.getLogger("hsrecover")


def _orders(text: str) -> list[int]:
    try:
        orders = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not orders or min(orders) < 0:
        raise argparse.ArgumentTypeError("orders must be non-negative integers")
    return orders


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsrecover", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a campaign and recover it")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--orders", type=_orders, help="override recovery_orders")
    run.add_argument("--workers", type=int, default=1)

    rec = sub.add_parser("recover", help="re-fit stored raw samples")
    rec.add_argument("--samples", required=True)
    rec.add_argument("--orders", type=_orders, required=True)
    rec.add_argument("--out", default=".")

    rep = sub.add_parser("report", help="summarize a curves CSV")
    rep.add_argument("--curves", required=True)
    return parser


def _emit(result, out, manifest) -> None:
    outdir = io.ensure_dir(out)
    io.write_curves_csv(result, outdir / "curves.csv")
    io.write_models_csv(result.models_by_time(), outdir / "models.csv")
    io.write_samples_csv(result, outdir / "samples.csv")
    manifest.warnings = list(result.warnings)
    manifest.finished_at = io.now()
    manifest.write(outdir / "manifest.txt")


def cmd_run(args) -> None:
    stage = "config"
    try:
        config = io.parse_config(args.config)
        chash = io.config_hash(config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.orders is not None:
            overrides["recovery_orders"] = tuple(args.orders)
        if overrides:
            config = dataclasses.replace(config, **overrides)
        manifest = io.RunManifest(chash, config.seed, started_at=io.now())
        stage = "simulation"
        log.info("running %s with %d repetitions", config.experiment.value, config.repetitions)
        result = run_campaign(config, workers=args.workers)
        stage = "output"
        _emit(result, args.out, manifest)
    except Exception as err:
        raise StageError(stage, err) from err


def cmd_recover(args) -> None:
    stage = "samples"
    try:
        rates, times, curves = io.read_samples_csv(args.samples)
        stage = "recovery"
        result = recover(rates, times, curves, args.orders)
        stage = "output"
        outdir = io.ensure_dir(args.out)
        io.write_curves_csv(result, outdir / "curves.csv")
        io.write_models_csv(result.models_by_time(), outdir / "models.csv")
    except Exception as err:
        raise StageError(stage, err) from err


def visibility(curve: np.ndarray) -> float:
    hi, lo = float(np.max(curve)), float(np.min(curve))
    return (hi - lo) / (hi + lo) if hi + lo > 0 else math.nan


def cmd_report(args) -> None:
    try:
        data = io.read_curves_csv(args.curves)
    except Exception as err:
        raise StageError("curves", err) from err
    times = data.pop("time_us")
    print(f"{'curve':>10}  {'effective_T1_us':>16}  {'visibility':>10}")
    for name, curve in data.items():
        try:
            t1 = f"{effective_t1(times, curve):.6g}"
        except NoCrossing:
            t1 = "no crossing"
        except ValueError:
            t1 = "starts < 1/e"
        print(f"{name:>10}  {t1:>16}  {visibility(curve):>10.4f}")


class StageError(RuntimeError):
    def __init__(self, stage: str, err: Exception):
        super().__init__(f"{stage} failed: {err}")
        self.stage = stage


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "recover": cmd_recover, "report": cmd_report}[args.command]
    try:
        handler(args)
    except StageError as err:
        cause = err.__cause__
        if isinstance(cause, ValidationError):
            print(f"hsrecover: {err.stage} failed: invalid field {cause.field!r}: {cause}",
                  file=sys.stderr)
        else:
            print(f"hsrecover: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
