"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .engine import Tensor


def adam_step(param, grad, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam update for a single parameter array.

    ``state`` is a dict holding 'm', 'v', and the step counter 't'
    (incremented by the caller once per optimizer step, shared across
    params). Deterministic: same inputs give bitwise-identical outputs.
    """
    if grad.shape != param.shape:
        raise ShapeError(f"adam_step: grad {grad.shape} != param {param.shape}")
    m, v, t = state["m"], state["v"], state["t"]
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype)
    return param, state


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if isinstance(p, Tensor)]
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.state = [
            {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data)} for p in self.params
        ]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        for p, st in zip(self.params, self.state):
            if p.grad is None:
                continue
            adam_step(
                p.data,
                p.grad,
                {"m": st["m"], "v": st["v"], "t": self.t},
                lr=self.lr,
                beta1=self.beta1,
                beta2=self.beta2,
                eps=self.eps,
            )
