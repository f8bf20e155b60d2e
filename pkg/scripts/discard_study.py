"""Mean absolute gradient against the small-loss discard ratio, one step from a fixed init."""
import argparse
from pathlib import Path

from largebatch.config import DiscardSweepConfig
from largebatch.experiments import run_discard_sweep
from largebatch.plot import emit_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/discard")
    ap.add_argument("--batch-size", type=int, default=1024)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    args = ap.parse_args()
    for seed in args.seeds:
        cfg = DiscardSweepConfig(batch_size=args.batch_size)
        cfg.base = cfg.base.replace(seed=seed)
        out = Path(args.out) / f"seed{seed}"
        for layer in (0, 1, 2):
            cfg.layer = layer
            rows, report = run_discard_sweep(cfg, out_dir=out / f"layer{layer}")
            emit_plot(out / f"layer{layer}" / "discard.csv", "ratio", "mean_abs_grad",
                      out_svg=out / f"layer{layer}" / "discard.svg")
            print(f"seed {seed} layer {layer}: spearman {report['spearman']}, "
                  f"baseline |g| {report['baseline']['mean_abs_grad']:.4e}")


if __name__ == "__main__":
    main()
