"""Command-line entry point: ``largebatch <subcommand> [--config PATH] [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as C
from .experiments import run_discard_sweep, run_sweep, run_theory_check, run_train
from .plot import emit_plot


def _raw_config(args):
    return C.read_raw(args.config) if args.config else {}


def _apply_overrides(run: C.RunConfig, args) -> C.RunConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = args.out
    return run.replace(**changes) if changes else run


def cmd_train(args):
    run = _apply_overrides(C.load_run_config(_raw_config(args)), args)
    result = run_train(run, out_dir=run.output_dir)
    print(f"trained {result.summary['n_steps']} steps: final loss {result.final_loss:.6g}, "
          f"accuracy {result.final_accuracy:.4f} -> {run.output_dir}")


def cmd_sweep(args):
    sweep = C.load_sweep_config(_raw_config(args))
    sweep.base = _apply_overrides(sweep.base, args)
    out = args.out or str(Path(sweep.base.output_dir).parent / "sweep")
    rows, slopes = run_sweep(sweep, out_dir=out)
    fit = slopes["fits"].get("first_step_mean_abs_grad", {})
    if fit.get("absent", True):
        print(f"swept {len(rows)} batch sizes (too few for a slope) -> {out}")
    else:
        print(f"swept {len(rows)} batch sizes: mean |g| slope {fit['slope']:.4f} "
              f"(r^2 {fit['r_squared']:.4f}) -> {out}")


def cmd_discard_sweep(args):
    cfg = C.load_discard_sweep_config(_raw_config(args))
    cfg.base = _apply_overrides(cfg.base, args)
    out = args.out or str(Path(cfg.base.output_dir).parent / "discard")
    rows, report = run_discard_sweep(cfg, out_dir=out)
    rho = report["spearman"]
    print(f"{len(rows)} discard ratios, spearman {rho if rho is None else round(rho, 4)} -> {out}")


def cmd_theory_check(args):
    raw = _raw_config(args)
    tc = C.load_theory_config(raw)
    seed = tc.seed if args.seed is None else args.seed
    k = tc.k if args.k is None else args.k
    out = args.out or "runs/theory"
    report = run_theory_check(tc.sigmas, tc.ns, k, seed=seed, lr=tc.lr, a=tc.a, out_dir=out)
    for name, entry in report["predictors"].items():
        print(f"{name:18s} {entry['passed']}/{entry['cells']} cells pass, "
              f"max rel err {entry['max_relative_error']:.4f}")
    print(f"report -> {out}/report.json")


def cmd_plot(args):
    out = args.out or str(Path(args.csv).with_suffix(".svg"))
    emit_plot(args.csv, args.x, args.y, log_axes=args.log, out_svg=out)
    print(f"plot -> {out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="largebatch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config (or a summary.json echo)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        return p

    common(sub.add_parser("train", help="train one network with per-step stats")).set_defaults(func=cmd_train)
    common(sub.add_parser("sweep", help="batch-size sweep with log-log slope fits")).set_defaults(func=cmd_sweep)
    common(sub.add_parser("discard-sweep", help="gradient vs small-loss discard ratio")).set_defaults(
        func=cmd_discard_sweep)
    p = common(sub.add_parser("theory-check", help="closed forms vs Monte-Carlo sampling"))
    p.add_argument("--k", type=int, help="Monte-Carlo trials per cell")
    p.set_defaults(func=cmd_theory_check)
    p = sub.add_parser("plot", help="SVG line plot of two CSV columns")
    p.add_argument("csv")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--log", action="store_true", help="log-log axes")
    p.add_argument("--out", help="output SVG path")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, KeyError, OSError, FloatingPointError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"largebatch {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
