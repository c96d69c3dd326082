"""Iterative pose refinement and test-set error tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import render_depth_input, stack_pair
from .se3 import DeltaPose, Pose, apply_delta

ERROR_COLUMNS = ("E_trans", "E_rotation", "E_x", "E_y", "E_z", "E_roll", "E_pitch", "E_yaw")


@dataclass
class LocalizeResult:
    pose: Pose
    confidence: float
    iterations_used: int
    trace: list = field(default_factory=list)  # (|dt|, |dR|, F) per iteration
    render_empty: bool = False

    def trace_csv(self):
        lines = ["iteration,delta_trans,delta_rot,value"]
        for i, (dt, dr, f) in enumerate(self.trace, start=1):
            lines.append(f"{i},{dt!r},{dr!r},{f!r}")
        return "\n".join(lines) + "\n"


def localize(intensity, cloud, init: Pose, model, k, g, max_iters=10, tol=0.01,
             inpaint_iterations=0):
    """Render at the current guess, predict the pose difference, apply it; repeat.

    Stops once the predicted translation step is below ``tol`` (after applying
    it) or after ``max_iters`` iterations. A guess that sees no map points
    aborts the loop with ``render_empty`` set.
    """
    pose = init
    trace = []
    confidence = math.nan
    for it in range(1, max_iters + 1):
        depth = render_depth_input(cloud, pose, k, g, inpaint_iterations)
        if not depth.any():
            return LocalizeResult(pose, confidence, it - 1, trace, render_empty=True)
        pred, value = model.predict(stack_pair(intensity, depth))
        delta = DeltaPose.from_vector(pred[0])
        pose = apply_delta(pose, delta)
        confidence = float(value[0])
        step = float(np.linalg.norm(delta.d_translation))
        trace.append((step, float(np.linalg.norm(delta.d_rotation)), confidence))
        if step < tol:
            break
    return LocalizeResult(pose, confidence, len(trace), trace)


@dataclass(frozen=True)
class ErrorTable:
    E_trans: float
    E_rotation: float
    E_x: float
    E_y: float
    E_z: float
    E_roll: float
    E_pitch: float
    E_yaw: float

    @classmethod
    def from_predictions(cls, pred, labels):
        """Mean norms and mean absolute per-axis errors of (N, 6) arrays."""
        pred = np.asarray(pred, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if len(pred) == 0:
            raise ValueError("empty test set")
        err = pred - labels
        absolute = np.abs(err).mean(axis=0)
        return cls(float(np.linalg.norm(err[:, :3], axis=1).mean()),
                   float(np.linalg.norm(err[:, 3:], axis=1).mean()),
                   *(float(v) for v in absolute))

    def as_tuple(self):
        return tuple(getattr(self, c) for c in ERROR_COLUMNS)

    def to_csv(self):
        return ",".join(ERROR_COLUMNS) + "\n" + ",".join(repr(v) for v in self.as_tuple()) + "\n"


def predict_batched(model, x, batch=64):
    preds = [model.predict(x[i:i + batch])[0] for i in range(0, len(x), batch)]
    return np.concatenate(preds) if preds else np.zeros((0, 6))


def evaluate(model, x, y, batch=64):
    """Single-shot test-set errors in the E_trans ... E_yaw column layout."""
    return ErrorTable.from_predictions(predict_batched(model, x, batch), y)
