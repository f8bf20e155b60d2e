"""Batch-size sweep on the default task plus log-log plots of the three scaling laws.

    python scripts/reproduce_scaling.py --out runs/scaling --repeats 3
"""
import argparse
from pathlib import Path

from largebatch.config import SweepConfig, load_sweep_config, read_raw
from largebatch.experiments import run_sweep
from largebatch.plot import emit_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="TOML config; defaults to the built-in task")
    ap.add_argument("--out", default="runs/scaling")
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--layer", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    sweep = load_sweep_config(read_raw(args.config)) if args.config else SweepConfig()
    sweep.repeats, sweep.layer, sweep.jobs = args.repeats, args.layer, args.jobs
    rows, slopes = run_sweep(sweep, out_dir=args.out)
    out = Path(args.out)
    for metric in ("mean_abs_grad", "normalized_param_stride", "normalized_loss_stride"):
        for phase in ("first_step", "epoch1"):
            key = f"{phase}_{metric}"
            fit = slopes["fits"][key]
            if not fit["absent"]:
                print(f"{key:40s} slope {fit['slope']:+.4f}  r^2 {fit['r_squared']:.4f}")
            emit_plot(out / "sweep.csv", "batch_size", key, log_axes=True, out_svg=out / f"{key}.svg")
    emit_plot(out / "sweep.csv", "batch_size", "predicted_mean_abs_grad", log_axes=True,
              out_svg=out / "predicted_mean_abs_grad.svg")
    print(f"sweep.csv, slopes.json and plots in {out}")


if __name__ == "__main__":
    main()
