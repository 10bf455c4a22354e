"""Train the predictor on synthetic walking, then forecast and chain forecasts.

Run: python demos/train_toy.py [epochs]   (300 epochs takes under a minute)
"""

import sys

import numpy as np

from motionsphere.dataio import make_dataset, synthetic_motions
from motionsphere.metrics import bone_length_drift
from motionsphere.predictor import evaluate, preset, recursive_predict, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 300
items = [(f"train_{i:03d}", s) for i, s in enumerate(synthetic_motions("pendulum_walk", 200, 20, seed=1))]
items += [(f"test_{i:03d}", s) for i, s in enumerate(synthetic_motions("pendulum_walk", 50, 20, seed=2))]
train_ds, test_ds, _ = make_dataset(items, prior_len=10, future_len=10, split_rule="test_*")


def progress(entry):
    if entry["epoch"] % 50 == 0 and entry["epoch"]:
        print(f"epoch {entry['epoch']:4d}  rec {entry['rec']:.3f}  val MPJPE {entry['val_mpjpe']:.1f} mm")


ckpt, _ = train(train_ds, preset("toy").replace(epochs=epochs), test_ds=test_ds, callback=progress)
report = evaluate(ckpt, test_ds)
for ms, err in report.mpjpe_at.items():
    print(f"{ms:4d} ms: model {err:6.1f} mm   zero-velocity {report.baseline_mpjpe_at[ms]:6.1f} mm")
print(f"speed at last frame: predicted {report.mpjs_curve[-1]:.1f}, truth {report.truth_mpjs_curve[-1]:.1f} mm/frame")

prior = synthetic_motions("pendulum_walk", 1, 10, seed=9)[0]
long_run = recursive_predict(ckpt, prior, 3)
steps = np.linalg.norm(np.diff(long_run.frames, axis=0), axis=-1).mean(axis=1)
print(f"3x recursive forecast: {long_run.num_frames} frames, bone drift {bone_length_drift(long_run, ckpt.topology):.1%}")
print("per-frame speed:", " ".join(f"{v:.0f}" for v in steps))
