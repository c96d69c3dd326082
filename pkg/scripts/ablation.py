"""Value-branch ablation: with and without the state-value loss over several seeds.

Writes one CSV row per (seed, arm, epoch) and prints the per-seed comparison.

    python3 scripts/ablation.py --out runs/ablation.csv            # full scale
    python3 scripts/ablation.py --out runs/ablation.csv --reduced  # 80x60, 15 epochs
"""

import argparse
import logging
from pathlib import Path

from lidarloc.dataset import DatasetConfig, build_dataset, split_dataset, to_arrays
from lidarloc.model import LossWeights
from lidarloc.projector import CameraIntrinsics
from lidarloc.training import TrainConfig, value_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--reduced", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    if args.reduced:
        dcfg = DatasetConfig(camera=CameraIntrinsics(fx=60, fy=60, cx=40, cy=30,
                                                     width=80, height=60))
        epochs, warmup = 15, 5
    else:
        dcfg, epochs, warmup = DatasetConfig(), 60, 10
    samples, _, _, _ = build_dataset(dcfg)
    tr, va, _ = (to_arrays(s) for s in split_dataset(samples, (0.6, 0.3, 0.1), seed=0))

    args.out.parent.mkdir(parents=True, exist_ok=True)
    wins = 0
    with open(args.out, "w") as fh:
        fh.write("seed,arm,epoch,train_pose,val_pose\n")
        for seed in range(args.seeds):
            cfg = TrainConfig(epochs=epochs, warmup_epochs=warmup, seed=seed)
            enf, plain = value_ablation(tr, va, cfg, LossWeights())
            for arm, hist in (("value", enf), ("plain", plain)):
                for r in hist:
                    fh.write(f"{seed},{arm},{r.epoch},{r.train_pose!r},{r.val_pose!r}\n")
            fh.flush()
            target = plain[-1].val_pose
            reached = next((r.epoch for r in enf
                            if r.epoch > warmup and r.val_pose <= target), None)
            wins += enf[-1].val_pose <= target
            print(f"seed {seed}: value {enf[-1].val_pose:.4f} plain {target:.4f} "
                  f"reached plain final at epoch {reached}", flush=True)
    print(f"value arm final val loss <= plain on {wins}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
