"""Parameterized layers on top of the engine: linear, conv, layer norm.

Init follows the usual recipes: Kaiming-uniform for conv/linear weights
(ReLU gain), uniform +-1/sqrt(fan_in) biases, normal(0, 0.02) for
embedding tables and learned tokens. Everything takes an explicit rng.
"""

from __future__ import annotations

import math

import numpy as np

from .conv import conv2d
from .engine import Tensor, layer_norm, matmul


def kaiming_uniform(rng, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, shape).astype(dtype)


def bias_uniform(rng, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape).astype(dtype)


def token_init(rng, shape, dtype=np.float32) -> np.ndarray:
    return rng.normal(0.0, 0.02, shape).astype(dtype)


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng, dtype=np.float32):
        self.weight = Tensor(kaiming_uniform(rng, (in_dim, out_dim), in_dim, dtype), requires_grad=True)
        self.bias = Tensor(bias_uniform(rng, (out_dim,), in_dim, dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias

    def params(self, prefix: str):
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]


class Conv2d:
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng, stride: int = 1, padding: int = 0, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        self.weight = Tensor(
            kaiming_uniform(rng, (out_ch, in_ch, kernel, kernel), fan_in, dtype), requires_grad=True
        )
        self.bias = Tensor(bias_uniform(rng, (out_ch,), fan_in, dtype), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

    def params(self, prefix: str):
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]


class LayerNorm:
    def __init__(self, dim: int, dtype=np.float32):
        self.gamma = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)

    def params(self, prefix: str):
        return [(f"{prefix}.gamma", self.gamma), (f"{prefix}.beta", self.beta)]
