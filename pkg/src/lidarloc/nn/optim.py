"""RMSProp over named parameter tensors."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


class RMSProp:
    """``acc <- rho*acc + (1-rho)*g^2``; ``p <- p - lr*g/(sqrt(acc) + eps)``."""

    def __init__(self, lr=1e-3, rho=0.9, eps=1e-8):
        if not 0 < rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.acc = {}

    def step(self, params, grads):
        """Update ``params`` (name -> array) in place from ``grads`` (name -> array or None)."""
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(p)
            if g.shape != p.shape:
                raise ShapeMismatch(f"gradient for {name}: {g.shape} vs {p.shape}")
            acc = self.acc.get(name)
            if acc is None:
                acc = np.zeros_like(p)
            acc = self.rho * acc + (1.0 - self.rho) * g * g
            self.acc[name] = acc
            p -= self.lr * g / (np.sqrt(acc) + self.eps)
        return params


def rmsprop_step(params, grads, state: RMSProp):
    return state.step(params, grads)
