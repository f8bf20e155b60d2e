"""Best-gamma final training accuracy of MCLR and LARS (plus PercentDelta) over several seeds."""
import argparse
import json
from pathlib import Path

from largebatch.config import RunConfig
from largebatch.data import ScheduleSpec
from largebatch.experiments import compare_optimizers


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/mclr_vs_lars")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--batch-size", type=int, default=256)
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.005, 0.01, 0.02, 0.04, 0.08])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--kinds", nargs="+", default=["mclr", "lars", "percent_delta"])
    args = ap.parse_args()
    base = RunConfig(schedule=ScheduleSpec.constant(args.batch_size, 0.05), epochs=args.epochs,
                     record_stats=False)
    results = compare_optimizers(base, args.kinds, args.gammas, args.seeds)
    for kind, r in results.items():
        print(f"{kind:14s} best gamma {r['best_gamma']:<7g} median accuracy {r['best_median_accuracy']:.4f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.json").write_text(json.dumps({"config": base.to_dict(), "results": results}, indent=2))


if __name__ == "__main__":
    main()
