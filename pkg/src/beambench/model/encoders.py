"""Per-modality encoders mapping each sensor payload to a shared
d-dimensional embedding.

mmWave/GPS use a two-layer ReLU MLP with intermediate width 2d; camera,
BEV, and radar share a three-conv CNN backbone (differing only in input
channels) with intermediate max pooling, adaptive average pooling, and a
linear projection.
"""

from __future__ import annotations

from ..errors import ShapeError
from ..tensor import Tensor, adaptive_avg_pool2d, maxpool2d, relu, reshape
from ..tensor.nn import Conv2d, Linear


class MlpEncoder:
    """linear(in -> 2d) -> ReLU -> linear(2d -> d) -> ReLU."""

    def __init__(self, in_dim: int, embed_dim: int, rng):
        self.in_dim = in_dim
        self.fc1 = Linear(in_dim, 2 * embed_dim, rng)
        self.fc2 = Linear(2 * embed_dim, embed_dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"mlp encoder: expected (N, {self.in_dim}), got {x.shape}")
        return relu(self.fc2(relu(self.fc1(x))))

    def params(self, prefix: str):
        return self.fc1.params(f"{prefix}.fc1") + self.fc2.params(f"{prefix}.fc2")


class ConvEncoder:
    """Three 3x3 convs with ReLU and pooling, adaptive pool, projection."""

    def __init__(self, in_ch: int, embed_dim: int, rng, widths=(8, 16, 32), pool_hw=(2, 2)):
        self.in_ch = in_ch
        w1, w2, w3 = widths
        self.conv1 = Conv2d(in_ch, w1, 3, rng, padding=1)
        self.conv2 = Conv2d(w1, w2, 3, rng, padding=1)
        self.conv3 = Conv2d(w2, w3, 3, rng, padding=1)
        self.pool_hw = tuple(pool_hw)
        self.proj = Linear(w3 * pool_hw[0] * pool_hw[1], embed_dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ShapeError(f"conv encoder: expected (N, {self.in_ch}, H, W), got {x.shape}")
        h = maxpool2d(relu(self.conv1(x)), 2)
        h = maxpool2d(relu(self.conv2(h)), 2)
        h = relu(self.conv3(h))
        h = adaptive_avg_pool2d(h, *self.pool_hw)
        flat = reshape(h, (x.shape[0], -1))
        return self.proj(flat)

    def params(self, prefix: str):
        out = []
        for name, layer in (("conv1", self.conv1), ("conv2", self.conv2), ("conv3", self.conv3), ("proj", self.proj)):
            out += layer.params(f"{prefix}.{name}")
        return out
