"""Desk-scale convergence run: build the reference dataset, train, report test errors.

    python3 scripts/desk_scale.py --out runs/desk
"""

import argparse
import json
import logging
import time
from pathlib import Path

import numpy as np

from lidarloc.dataset import DatasetConfig, build_dataset, split_dataset, to_arrays
from lidarloc.localize import evaluate
from lidarloc.model import LossWeights, PoseValueModel
from lidarloc.se3 import PerturbBounds
from lidarloc.training import TrainConfig, train, write_loss_log


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--frames", type=int, default=40)
    ap.add_argument("--samples-per-frame", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--warmup", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)

    t0 = time.process_time()
    dcfg = DatasetConfig(n_frames=args.frames, seed=args.seed,
                         bounds=PerturbBounds(samples_per_frame=args.samples_per_frame))
    samples, _, _, _ = build_dataset(dcfg)
    tr, va, te = (to_arrays(s) for s in split_dataset(samples, (0.6, 0.3, 0.1), args.seed))
    model = PoseValueModel(seed=args.seed)
    history = train(model, tr, va, TrainConfig(epochs=args.epochs, warmup_epochs=args.warmup,
                                               seed=args.seed), LossWeights())
    cpu = time.process_time() - t0

    model.save(args.out / "model.ckpt")
    write_loss_log(args.out / "loss.csv", history)
    (args.out / "errors.csv").write_text(evaluate(model, *te).to_csv())
    pred, _ = model.predict(te[0])
    summary = {
        "train_pose_first": history[0].train_pose,
        "train_pose_last": history[-1].train_pose,
        "median_translation_error": float(np.median(np.linalg.norm(pred[:, :3] - te[1][:, :3],
                                                                   axis=1))),
        "median_translation_zero_prediction": float(np.median(np.linalg.norm(te[1][:, :3],
                                                                             axis=1))),
        "median_rotation_error": float(np.median(np.linalg.norm(pred[:, 3:] - te[1][:, 3:],
                                                                axis=1))),
        "cpu_minutes": cpu / 60,
    }
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
