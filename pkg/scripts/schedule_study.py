"""Two-phase batch schedule (small batch for epoch 0, large after) against a fixed large batch."""
import argparse

from largebatch.config import RunConfig
from largebatch.data import ScheduleSpec
from largebatch.experiments import compare_schedules


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/schedule")
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    args = ap.parse_args()
    summary = compare_schedules(
        RunConfig(epochs=args.epochs, record_stats=False),
        scheduled=ScheduleSpec(((0, 16, 0.005), (1, 256, 0.05))),
        baseline=ScheduleSpec.constant(256, 0.05),
        seeds=args.seeds, out_dir=args.out,
    )
    for name in ("scheduled", "baseline"):
        s = summary[name]
        print(f"{name:9s} median loss {s['median_final_loss']:.5f}  "
              f"median accuracy {s['median_final_accuracy']:.4f}")


if __name__ == "__main__":
    main()
