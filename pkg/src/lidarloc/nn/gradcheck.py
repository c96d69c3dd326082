"""Central finite-difference checks of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

REL_FLOOR = 1e-6


def relative_error(analytic, numeric, floor=REL_FLOOR):
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps ~0 gradients meaningful."""
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_grad(f, arr, index, h=1e-4):
    """``(f(x + h e_i) - f(x - h e_i)) / 2h`` for one entry of ``arr`` (restored after)."""
    old = arr[index]
    arr[index] = old + h
    fp = f()
    arr[index] = old - h
    fm = f()
    arr[index] = old
    return (fp - fm) / (2 * h)


def sample_indices(shape, count, rng):
    size = int(np.prod(shape))
    flat = rng.choice(size, size=min(count, size), replace=False)
    return [np.unravel_index(i, shape) for i in flat]


def check_function(build, inputs, rng, h=1e-4, per_input=8):
    """Gradient check of a scalar function of several arrays.

    ``build(*tensors)`` must return a scalar :class:`Tensor`. Returns the
    maximum relative error over sampled entries of every input.
    """
    leaves = [Tensor(a, requires_grad=True) for a in inputs]
    build(*leaves).backward()
    worst = 0.0
    for leaf, arr in zip(leaves, inputs):
        g = leaf.grad if leaf.grad is not None else np.zeros_like(arr)

        def f():
            return float(build(*[Tensor(a) for a in inputs]).data)

        for idx in sample_indices(arr.shape, per_input, rng):
            num = numeric_grad(f, arr, idx, h)
            worst = max(worst, float(relative_error(g[idx], num)))
    return worst


# small enough that a probe rarely carries a ReLU pre-activation across zero
MODEL_STEP = 1e-6


def check_model_loss(model, x, y, weights, rng, h=MODEL_STEP, per_param=4, with_value=True,
                     value_target="prediction"):
    """Check every parameter array of ``model`` against the full training loss.

    Batchnorm runs in train mode; its running statistics are restored after
    each evaluation so the check has no side effects. The value target is
    frozen at the unperturbed point, since finite differences cannot see a
    stop-gradient. Returns a dict of
    parameter name -> max relative error.
    """
    from ..model import pose_value_losses

    saved = {i: (st.running_mean.copy(), st.running_var.copy()) for i, st in model.bn.items()}

    def restore():
        for i, (m, v) in saved.items():
            model.bn[i].running_mean = m.copy()
            model.bn[i].running_var = v.copy()

    total, p_loss, _, leaves = pose_value_losses(model, x, y, weights, "train", with_value,
                                              value_target)
    total.backward()
    restore()
    if isinstance(value_target, str) and value_target == "prediction":
        value_target = _frozen_target(model, x, y, weights)
        restore()
    analytic = {n: t.grad for n, t in leaves.items()}

    def f():
        total = pose_value_losses(model, x, y, weights, "train", with_value, value_target)[0]
        out = float(total.data)
        restore()
        return out

    errors = {}
    for name, arr in model.params.items():
        g = analytic[name]
        worst = 0.0
        for idx in sample_indices(arr.shape, per_param, rng):
            num = numeric_grad(f, arr, idx, h)
            worst = max(worst, float(relative_error(g[idx], num)))
        errors[name] = worst
    return errors


def _frozen_target(model, x, y, weights):
    from ..model import per_sample_pose_loss, state_value_target

    pred, _, _ = model.forward(x, "train")
    return state_value_target(per_sample_pose_loss(pred, y, weights))
