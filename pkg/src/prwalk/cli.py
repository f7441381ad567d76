"""Command-line entry point.

Every subcommand prints one JSON report on stdout; diagnostics go to stderr.
Exit codes: 0 success, 1 a check failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import gc
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .components import skeletonize
from .ddbshape import BlockTopology, impulse_response_support, shape_report
from .dicemath import LossConfig, dice_grad, finite_difference_grad, max_relative_error
from .metrics import (
    ConfusionCounts,
    acc_sen_spe,
    binarize,
    confusion,
    err_metric,
    evaluate,
    otsu_threshold,
    roi_error_records,
)
from .raster import RasterError, read_raster, write_raster
from .reconnect import WalkConfig, directional_walk_baseline, prw
from .synth import SynthConfig, fixture_suite, read_fixture, write_fixture

SWEEP_SCHEMA = "prwalk.sweep/1"
SYNTH_SCHEMA = "prwalk.synth/1"
DICE_SCHEMA = "prwalk.dice_check/1"
OTSU_SCHEMA = "prwalk.otsu/1"

ROI_SIDES = tuple(range(0, 161, 20))
ALPHAS = tuple(round(0.05 * k, 2) for k in range(11))


class UsageError(Exception):
    """Bad inputs; reported on stderr with exit code 2."""


def _manifest(cmd: str, inputs: dict, config: dict, started: float) -> dict:
    return {
        "subcommand": cmd,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "config": config,
        "version": __version__,
        "duration_s": round(time.perf_counter() - started, 6),
    }


def _emit(report: dict) -> None:
    sys.stdout.write(json.dumps(report, indent=1, sort_keys=False) + "\n")


def _read(path, kind):
    try:
        return read_raster(path, kind)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except (RasterError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _same_shape(**grids):
    shapes = {name: g.shape for name, g in grids.items() if g is not None}
    if len(set(shapes.values())) > 1:
        desc = ", ".join(f"{k} {v[1]}x{v[0]}" for k, v in shapes.items())
        raise UsageError(f"raster dimensions differ: {desc}")


def _walk_config(args) -> WalkConfig:
    try:
        return WalkConfig(alpha=args.alpha, roi_side=args.roi_size, eps_nn=args.eps_nn,
                          max_steps=args.max_steps, walk_from_target=args.walk_from_target)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- reconnect / eval --------------------------------------------------------


def cmd_reconnect(args) -> int:
    t0 = time.perf_counter()
    prob = _read(args.prob, "probability")
    mask = _read(args.mask, "mask")
    _same_shape(prob=prob, mask=mask)
    cfg = _walk_config(args)
    run = directional_walk_baseline if args.baseline else prw
    out, report = run(mask, prob, cfg)
    try:
        write_raster(args.out, out)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc}") from None
    body = report.to_dict()
    body["manifest"] = _manifest(
        "reconnect", {"prob": args.prob, "mask": args.mask, "out": args.out},
        asdict(cfg), t0)
    _emit(body)
    return 0


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    pred = _read(args.pred, "mask")
    truth = _read(args.truth, "mask")
    prob = _read(args.prob, "probability") if args.prob else None
    _same_shape(pred=pred, truth=truth, prob=prob)
    report = None
    if args.rois:
        try:
            report = json.loads(Path(args.rois).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read ROI manifest {args.rois}: {exc}") from None
        if "records" not in report:
            raise UsageError(f"{args.rois} is not a reconnect report")
    try:
        result = evaluate(pred, truth, prob=prob, report=report)
    except (ValueError, IndexError) as exc:
        raise UsageError(str(exc)) from None
    body = result.to_dict()
    body["manifest"] = _manifest(
        "eval", {"pred": args.pred, "truth": args.truth, "prob": args.prob, "rois": args.rois},
        {}, t0)
    _emit(body)
    return 0


# -- sweep -------------------------------------------------------------------


def load_fixtures(path) -> list:
    """A fixture directory, or a directory of fixture directories (sorted)."""
    root = Path(path)
    if (root / "gaps.json").is_file():
        dirs = [root]
    elif root.is_dir():
        dirs = sorted(p for p in root.iterdir() if (p / "gaps.json").is_file())
    else:
        dirs = []
    if not dirs:
        raise UsageError(f"no fixtures found under {path}")
    try:
        return [read_fixture(d) for d in dirs]
    except (RasterError, ValueError, KeyError, OSError) as exc:
        raise UsageError(f"unreadable fixture under {path}: {exc}") from None


def run_sweep(fixtures, parameter: str, values=None, base: WalkConfig = WalkConfig(),
              repeats: int = 3) -> list[dict]:
    """Run the reconnection over ``fixtures`` for each parameter value.

    Acc and Sen pool the confusion counts of all fixtures; Err averages over
    every stamped ROI of every fixture. ``seconds`` is the fastest of
    ``repeats`` timings of the reconnection step, with each mask's centerline
    computed once up front since it does not depend on the parameter.
    """
    if parameter == "roi-size":
        values = ROI_SIDES if values is None else values
        configs = [replace(base, roi_side=int(v)) for v in values]
    elif parameter == "alpha":
        values = ALPHAS if values is None else values
        configs = [replace(base, alpha=float(v)) for v in values]
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    centerlines = [skeletonize(f.broken) for f in fixtures]
    best = [float("inf")] * len(configs)
    results = [None] * len(configs)
    # repeats go round-robin over the values so a slow spell on the machine
    # hits every value alike; collection is paused while timing, as timeit does
    gc_was_on = gc.isenabled()
    try:
        for _ in range(max(1, repeats)):
            for i, cfg in enumerate(configs):
                gc.disable()
                t = time.perf_counter()
                runs = [prw(f.broken, f.prob, cfg, c) for f, c in zip(fixtures, centerlines)]
                best[i] = min(best[i], time.perf_counter() - t)
                if gc_was_on:
                    gc.enable()
                results[i] = runs
    finally:
        if gc_was_on:
            gc.enable()
    rows = []
    for value, runs, secs in zip(values, results, best):
        tp = fp = tn = fn = 0
        records = []
        stamped = 0
        for f, (out, report) in zip(fixtures, runs):
            c = confusion(out, f.truth)
            tp, fp, tn, fn = tp + c.tp, fp + c.fp, tn + c.tn, fn + c.fn
            records.extend(roi_error_records(report, f.truth))
            stamped += report.totals()["stamped_pixels"]
        acc, sen, _ = acc_sen_spe(ConfusionCounts(tp, fp, tn, fn))
        rows.append({
            "value": value,
            "acc": acc,
            "sen": sen,
            "err": err_metric(records),
            "stamped_pixels": stamped,
            "seconds": secs,
        })
    return rows


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    fixtures = load_fixtures(args.fixtures)
    base = _walk_config(args)
    rows = run_sweep(fixtures, args.parameter, base=base, repeats=args.repeats)
    body = {
        "schema": SWEEP_SCHEMA,
        "parameter": args.parameter,
        "fixtures": len(fixtures),
        "rows": rows,
        "manifest": _manifest("sweep", {"fixtures": args.fixtures},
                              {**asdict(base), "repeats": args.repeats}, t0),
    }
    _emit(body)
    return 0


# -- synth -------------------------------------------------------------------


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = SynthConfig(
            rng_seed=args.seed, image_side=args.image_side, branch_count=args.branches,
            vessel_width=args.vessel_width, gap_count=args.gaps, gap_length=args.gap_length,
            ridge_prob=args.ridge_prob, noise_amplitude=args.noise, blur_radius=args.blur,
            bend=args.bend, ridge_width=args.ridge_width,
        )
        fixtures = fixture_suite(args.count, cfg, seed0=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    entries = []
    try:
        for fx in fixtures:
            d = out if args.count == 1 else out / f"seed_{fx.config.rng_seed:05d}"
            write_fixture(d, fx)
            entries.append({"dir": str(d), "rng_seed": fx.config.rng_seed,
                            "gaps": len(fx.gaps),
                            "gap_lengths": [g.length for g in fx.gaps]})
    except OSError as exc:
        raise UsageError(f"cannot write fixtures to {out}: {exc}") from None
    _emit({
        "schema": SYNTH_SCHEMA,
        "fixtures": entries,
        "manifest": _manifest("synth", {"out": args.out}, asdict(cfg), t0),
    })
    return 0


# -- checks ------------------------------------------------------------------


def cmd_dice_check(args) -> int:
    t0 = time.perf_counter()
    if args.grids < 1 or args.side < 1:
        raise UsageError("--grids and --side must be positive")
    cfg = LossConfig(epsilon=args.epsilon)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.grids):
        p = rng.random((args.side, args.side))
        g = (rng.random((args.side, args.side)) < 0.5).astype(np.uint8)
        err = max_relative_error(dice_grad(p, g, cfg.epsilon),
                                 finite_difference_grad(p, g, cfg.epsilon, args.h))
        worst = max(worst, err)
    ok = worst < args.tolerance
    _emit({
        "schema": DICE_SCHEMA,
        "max_relative_error": worst,
        "tolerance": args.tolerance,
        "passed": ok,
        "manifest": _manifest("dice-check", {}, {
            "grids": args.grids, "side": args.side, "h": args.h,
            "epsilon": args.epsilon, "seed": args.seed}, t0),
    })
    return 0 if ok else 1


def cmd_ddb_rf(args) -> int:
    t0 = time.perf_counter()
    try:
        rates = [int(r) for r in args.rates.split(",") if r.strip()]
        topo = BlockTopology.from_rates(args.mode, rates, kernel=args.kernel, repeats=args.repeats)
    except ValueError as exc:
        raise UsageError(f"bad topology: {exc}") from None
    report = shape_report(topo, args.in_channels, args.growth)
    body = report.to_dict()
    code = 0
    if args.verify:
        support = impulse_response_support(topo, report.receptive_field + 4)
        body["impulse_support"] = support
        body["verified"] = support == report.receptive_field
        code = 0 if body["verified"] else 1
    body["manifest"] = _manifest("ddb-rf", {}, body["topology"], t0)
    _emit(body)
    return code


def cmd_otsu(args) -> int:
    t0 = time.perf_counter()
    prob = _read(args.prob, "probability")
    try:
        thr = otsu_threshold(prob)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    mask = binarize(prob, thr)
    if args.out:
        try:
            write_raster(args.out, mask)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from None
    _emit({
        "schema": OTSU_SCHEMA,
        "threshold": thr,
        "foreground_pixels": mask.count(),
        "manifest": _manifest("otsu", {"prob": args.prob, "out": args.out}, {}, t0),
    })
    return 0


# -- parser ------------------------------------------------------------------


def _walk_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.2, help="weight of the distance term")
    p.add_argument("--roi-size", type=int, default=100, help="ROI side length l in pixels")
    p.add_argument("--eps-nn", type=float, default=0.1, help="confidence floor for walkers")
    p.add_argument("--max-steps", type=int, default=None, help="step budget (default l*l)")
    p.add_argument("--walk-from-target", action="store_true",
                   help="also walk back from C when no seed connects")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconnect", help="reconnect fragments of a binary mask")
    p.add_argument("prob")
    p.add_argument("mask")
    p.add_argument("out")
    _walk_flags(p)
    p.add_argument("--baseline", action="store_true", help="geometry-only walker")
    p.set_defaults(func=cmd_reconnect)

    p = sub.add_parser("eval", help="score a mask against ground truth")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--prob", help="probability map for AUC")
    p.add_argument("--rois", help="reconnect report JSON for Err")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="ROI-size or alpha sweep over synthetic fixtures")
    p.add_argument("fixtures")
    p.add_argument("--parameter", choices=("roi-size", "alpha"), default="roi-size")
    p.add_argument("--repeats", type=int, default=3, help="timing repeats per value")
    _walk_flags(p)
    p.set_defaults(func=cmd_sweep)

    d = SynthConfig()
    p = sub.add_parser("synth", help="write synthetic fixtures")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=d.rng_seed)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--image-side", type=int, default=d.image_side)
    p.add_argument("--branches", type=int, default=d.branch_count)
    p.add_argument("--vessel-width", type=int, default=d.vessel_width)
    p.add_argument("--gaps", type=int, default=d.gap_count)
    p.add_argument("--gap-length", type=int, default=d.gap_length)
    p.add_argument("--ridge-prob", type=float, default=d.ridge_prob)
    p.add_argument("--ridge-width", type=int, default=d.ridge_width)
    p.add_argument("--noise", type=float, default=d.noise_amplitude)
    p.add_argument("--blur", type=int, default=d.blur_radius)
    p.add_argument("--bend", type=float, default=d.bend)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("dice-check", help="analytic Dice gradient vs finite differences")
    p.add_argument("--grids", type=int, default=50)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dice_check)

    p = sub.add_parser("ddb-rf", help="receptive field of a dilated block stack")
    p.add_argument("--mode", choices=("cascade", "parallel", "dense"), default="dense")
    p.add_argument("--rates", default="1,2,5")
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--repeats", type=int, default=4)
    p.add_argument("--in-channels", type=int, default=64)
    p.add_argument("--growth", type=int, default=32)
    p.add_argument("--verify", action="store_true", help="cross-check with the impulse oracle")
    p.set_defaults(func=cmd_ddb_rf)

    p = sub.add_parser("otsu", help="Otsu threshold of a probability map")
    p.add_argument("prob")
    p.add_argument("--out", help="write the binarized mask here")
    p.set_defaults(func=cmd_otsu)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "count", 1) < 1 or getattr(args, "repeats", 1) < 1:
        parser.error("--count and --repeats must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"prwalk {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
