"""Two-phase training: pose-only warmup, then pose + state-value loss."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonFinite
from .model import LossWeights, PoseValueModel, pose_value_losses
from .nn.optim import RMSProp

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    epochs: int = 60
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    warmup_epochs: int = 10
    fractions: tuple = (0.6, 0.3, 0.1)
    seed: int = 0
    use_value: bool = True
    value_target: str = "prediction"
    eval_batch: int = 64

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 for batchnorm")


@dataclass
class EpochLog:
    epoch: int
    phase: str
    train_pose: float
    train_value: float
    val_pose: float
    val_value: float


@dataclass
class TrainState:
    """Everything needed to resume training bit-for-bit."""
    model: PoseValueModel
    optimizer: RMSProp
    rng: np.random.Generator
    epoch: int = 0
    history: list = field(default_factory=list)
    steps: int = 0

    def fork(self):
        import copy

        return TrainState(self.model.copy(), copy.deepcopy(self.optimizer),
                          copy.deepcopy(self.rng), self.epoch, list(self.history), self.steps)


def evaluate_losses(model, x, y, w: LossWeights, batch=64, value_target="prediction"):
    """Eval-mode mean pose and value loss over a dataset."""
    if len(x) == 0:
        return float("nan"), float("nan")
    pose_sum = value_sum = 0.0
    for i in range(0, len(x), batch):
        _, p, v, _ = pose_value_losses(model, x[i:i + batch], y[i:i + batch], w, mode="eval",
                                    value_target=value_target)
        n = len(x[i:i + batch])
        pose_sum += float(p.data) * n
        value_sum += float(v.data) * n
    return pose_sum / len(x), value_sum / len(x)


def init_state(cfg: TrainConfig, model=None):
    model = PoseValueModel(seed=cfg.seed) if model is None else model
    return TrainState(model, RMSProp(cfg.lr, cfg.rho, cfg.eps),
                      np.random.default_rng(cfg.seed + 1))


def run_epochs(state: TrainState, train, val, cfg: TrainConfig, w: LossWeights, until,
               callback=None):
    """Advance ``state`` to epoch ``until`` (1-based count of completed epochs)."""
    x, y = train
    xv, yv = val
    n = len(x)
    if n < 2:
        raise ValueError("training split needs at least 2 samples")
    model, opt = state.model, state.optimizer
    while state.epoch < until:
        epoch = state.epoch + 1
        with_value = cfg.use_value and epoch > cfg.warmup_epochs
        phase = ("combined" if with_value else
                 "warmup" if epoch <= cfg.warmup_epochs else "pose-only")
        t0 = time.time()
        order = state.rng.permutation(n)
        pose_sum = value_sum = 0.0
        seen = 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue
            try:
                total, p, v, leaves = pose_value_losses(model, x[idx], y[idx], w, mode="train",
                                                     with_value=with_value,
                                                     value_target=cfg.value_target)
                total.backward()
                grads = {k: t.grad for k, t in leaves.items()}
                opt.step(model.params, grads)
            except NonFinite as exc:
                raise NonFinite(f"epoch {epoch} batch {b}: {exc}") from exc
            state.steps += 1
            pose_sum += float(p.data) * len(idx)
            value_sum += float(v.data) * len(idx)
            seen += len(idx)
        vp, vv = evaluate_losses(model, xv, yv, w, cfg.eval_batch, cfg.value_target)
        rec = EpochLog(epoch, phase, pose_sum / seen, value_sum / seen, vp, vv)
        state.history.append(rec)
        state.epoch = epoch
        log.info("epoch %d %s train_pose=%.4f train_value=%.4f val_pose=%.4f val_value=%.4f "
                 "(%.1fs)", epoch, phase, rec.train_pose, rec.train_value, vp, vv,
                 time.time() - t0)
        if callback is not None:
            callback(rec)
    return state


def train(model, train_data, val_data, cfg: TrainConfig, w: LossWeights, callback=None):
    """Train in place; returns the per-epoch loss log.

    ``train_data``/``val_data`` are ``(x, y)`` array pairs.
    """
    state = init_state(cfg, model)
    run_epochs(state, train_data, val_data, cfg, w, cfg.epochs, callback)
    return state.history


def value_ablation(train_data, val_data, cfg: TrainConfig, w: LossWeights, callback=None):
    """Train with and without the value loss from one shared warmup.

    Warmup never touches the value loss, so both arms share those epochs
    bit-for-bit and only the later epochs are run twice. Returns the two
    histories ``(with_value, without_value)``.
    """
    shared = init_state(cfg)
    run_epochs(shared, train_data, val_data, cfg, w, cfg.warmup_epochs, callback)
    plain = shared.fork()
    run_epochs(shared, train_data, val_data, cfg, w, cfg.epochs, callback)
    run_epochs(plain, train_data, val_data, replace(cfg, use_value=False), w, cfg.epochs,
               callback)
    return shared.history, plain.history


def write_loss_log(path, history):
    with open(path, "w") as fh:
        fh.write("epoch,phase,train_pose,train_value,val_pose,val_value\n")
        for r in history:
            fh.write(f"{r.epoch},{r.phase},{r.train_pose!r},{r.train_value!r},"
                     f"{r.val_pose!r},{r.val_value!r}\n")
