"""Shared-backbone pose regressor with a state-value head, and its losses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .nn import checkpoint
from .nn.tensor import (BatchNormState, Tensor, absolute, batchnorm, conv2d, dense,
                        detach, global_avg_pool, mean, relu, row_norm)

# (in, out, stride) per backbone conv; the residual link adds the output of
# layer 4 onto the pre-activation of layer 5, which keeps the shape (stride 1).
BACKBONE = (
    (2, 16, 2),
    (16, 32, 2),
    (32, 32, 2),
    (32, 64, 2),
    (64, 64, 1),
    (64, 128, 2),
    (128, 128, 2),
)
RESIDUAL = (3, 4)  # (source layer, target layer), zero-based
HEAD_HIDDEN = 64
# fixed per-output gain of the pose head: one unit of raw output spans the
# default perturbation range (0.5 m, 5 degrees); predictions stay in metres/radians
POSE_OUTPUT_SCALE = np.array([0.5, 0.5, 0.5] + [math.radians(5.0)] * 3)


@dataclass(frozen=True)
class LossWeights:
    rotation: float = 100.0
    translation: float = 1.0
    value: float = 0.1

    def __post_init__(self):
        if self.rotation < 0 or self.translation < 0 or self.value < 0:
            raise ValueError("loss weights must be non-negative")


def _he_uniform(rng, shape, fan_in):
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class PoseValueModel:
    """Seven-layer conv backbone feeding a 6-DoF pose head and a scalar value head."""

    def __init__(self, seed=0, backbone=BACKBONE, hidden=HEAD_HIDDEN):
        rng = np.random.default_rng(seed)
        self.backbone = tuple(backbone)
        self.params = {}
        self.bn = {}
        for i, (cin, cout, _) in enumerate(self.backbone):
            self.params[f"conv{i}.w"] = _he_uniform(rng, (cout, cin, 3, 3), cin * 9)
            self.params[f"bn{i}.gamma"] = np.ones(cout)
            self.params[f"bn{i}.beta"] = np.zeros(cout)
            self.bn[i] = BatchNormState(cout)
        feat = self.backbone[-1][1]
        for head, n_out in (("pose", 6), ("value", 1)):
            self.params[f"{head}.fc0.w"] = _he_uniform(rng, (feat, hidden), feat)
            self.params[f"{head}.fc0.b"] = np.zeros(hidden)
            self.params[f"{head}.fc1.w"] = _he_uniform(rng, (hidden, n_out), hidden)
            self.params[f"{head}.fc1.b"] = np.zeros(n_out)

    # parameter groups
    def names(self, group=None):
        if group is None:
            return list(self.params)
        return [n for n in self.params if n.startswith(group)]

    def backbone_names(self):
        return [n for n in self.params if n.startswith(("conv", "bn"))]

    def parameter_count(self, group=None):
        return sum(self.params[n].size for n in self.names(group))

    def forward(self, x, mode="train"):
        """Run a batch of stacked pairs (N, 2, H, W).

        Returns ``(pose, value, tensors)`` where ``pose`` is (N, 6) ordered
        ``(tx, ty, tz, roll, pitch, yaw)``, ``value`` is (N, 1) and ``tensors``
        maps parameter names to the leaf tensors used, for reading gradients.
        """
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.data.ndim != 4 or x.shape[1] != self.backbone[0][0]:
            raise DimensionMismatch(f"expected (N, {self.backbone[0][0]}, H, W), got {x.shape}")
        leaves = {n: Tensor(p, requires_grad=True, name=n) for n, p in self.params.items()}
        h = x
        acts = {}
        for i, (_, _, stride) in enumerate(self.backbone):
            h = conv2d(h, leaves[f"conv{i}.w"], None, stride=stride, padding=1)
            h = batchnorm(h, leaves[f"bn{i}.gamma"], leaves[f"bn{i}.beta"], self.bn[i], mode)
            if i == RESIDUAL[1]:
                h = h + acts[RESIDUAL[0]]
            h = relu(h)
            acts[i] = h
        feat = global_avg_pool(h)
        outs = []
        for head in ("pose", "value"):
            z = relu(dense(feat, leaves[f"{head}.fc0.w"], leaves[f"{head}.fc0.b"]))
            outs.append(dense(z, leaves[f"{head}.fc1.w"], leaves[f"{head}.fc1.b"]))
        return outs[0] * Tensor(POSE_OUTPUT_SCALE), outs[1], leaves

    def predict(self, x):
        """Eval-mode outputs ``(pose (N, 6), value (N,))``.

        Samples go through one at a time so that BLAS blocking cannot make a
        row depend on its neighbours in the batch.
        """
        x = np.asarray(x, dtype=float)
        pose = np.zeros((len(x), 6))
        value = np.zeros(len(x))
        for i in range(len(x)):
            p, v, _ = self.forward(x[i:i + 1], mode="eval")
            pose[i] = p.data[0]
            value[i] = v.data[0, 0]
        return pose, value

    # persistence
    def state_arrays(self):
        arrays = dict(self.params)
        for i, st in self.bn.items():
            arrays[f"bn{i}.running_mean"] = st.running_mean
            arrays[f"bn{i}.running_var"] = st.running_var
        return arrays

    def load_state_arrays(self, arrays):
        for n in self.params:
            self.params[n] = np.array(arrays[n], dtype=np.float64)
        for i, st in self.bn.items():
            st.running_mean = np.array(arrays[f"bn{i}.running_mean"], dtype=np.float64)
            st.running_var = np.array(arrays[f"bn{i}.running_var"], dtype=np.float64)

    def save(self, path):
        checkpoint.save_arrays(path, self.state_arrays())

    @classmethod
    def load(cls, path):
        model = cls()
        model.load_state_arrays(checkpoint.load_arrays(path))
        return model

    def copy(self):
        other = PoseValueModel.__new__(PoseValueModel)
        other.backbone = self.backbone
        other.params = {n: p.copy() for n, p in self.params.items()}
        other.bn = {}
        for i, st in self.bn.items():
            cp = BatchNormState(len(st.running_mean))
            cp.running_mean = st.running_mean.copy()
            cp.running_var = st.running_var.copy()
            other.bn[i] = cp
        return other


def per_sample_pose_loss(pred, gt, w: LossWeights):
    """``a1*||dR_gt - dR_pred|| + a2*||dt_gt - dt_pred||`` per row (unsquared norms)."""
    gt = gt if isinstance(gt, Tensor) else Tensor(gt)
    err = gt - pred
    return w.rotation * row_norm(err[:, 3:]) + w.translation * row_norm(err[:, :3])


def pose_loss(pred, gt, w: LossWeights):
    return mean(per_sample_pose_loss(pred, gt, w))


def state_value_target(per_sample_loss):
    """Negated pose loss with the gradient path cut."""
    data = detach(per_sample_loss).data if isinstance(per_sample_loss, Tensor) else per_sample_loss
    return -np.array(data, dtype=float)


def value_loss(values, targets, w: LossWeights):
    """``a3 * mean |S_t - F|``; ``values`` is (N, 1) or (N,)."""
    values = values if isinstance(values, Tensor) else Tensor(values)
    if values.data.ndim == 2:
        values = values[:, 0]
    targets = targets if isinstance(targets, Tensor) else Tensor(targets)
    return w.value * mean(absolute(targets - values))


def total_loss(pose_term, value_term=None):
    return pose_term if value_term is None else pose_term + value_term


def pose_value_losses(model, x, labels, w: LossWeights, mode="train", with_value=True,
                   value_target="prediction"):
    """Forward a batch and build the loss terms.

    ``value_target='prediction'`` supervises F with the negated pose loss of the
    current predictions; ``'ground-truth-loss'`` uses the negated pose loss of a
    zero prediction, i.e. a fixed function of the label. An array is used as
    the target as given.
    """
    pred, value, leaves = model.forward(x, mode)
    per = per_sample_pose_loss(pred, labels, w)
    p_loss = mean(per)
    if isinstance(value_target, np.ndarray):
        target = Tensor(value_target)
    elif value_target == "prediction":
        target = state_value_target(per)
    elif value_target == "ground-truth-loss":
        target = state_value_target(per_sample_pose_loss(Tensor(np.zeros_like(labels)), labels, w))
    else:
        raise ValueError(f"unknown value target {value_target!r}")
    v_loss = value_loss(value, target, w)
    total = total_loss(p_loss, v_loss if with_value else None)
    return total, p_loss, v_loss, leaves
