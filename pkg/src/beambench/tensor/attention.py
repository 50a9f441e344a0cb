"""Multi-head scaled dot-product attention, composed from engine ops so
its gradient comes from the tape."""

from __future__ import annotations

import math

from ..errors import ShapeError
from .engine import Tensor, matmul, reshape, softmax, transpose


def scaled_dot_product_attention(q: Tensor, k: Tensor, v: Tensor, num_heads: int = 1) -> Tensor:
    """softmax(Q K^T / sqrt(d_head)) V per head; inputs are (B, T, D)."""
    if q.ndim != 3 or q.shape != k.shape or q.shape != v.shape:
        raise ShapeError(
            f"attention: q/k/v must share a (B,T,D) shape, got {q.shape}, {k.shape}, {v.shape}"
        )
    b, t, d = q.shape
    if num_heads < 1 or d % num_heads != 0:
        raise ShapeError(f"attention: embed dim {d} not divisible by {num_heads} heads")
    dh = d // num_heads

    def split(x):
        return transpose(reshape(x, (b, t, num_heads, dh)), (0, 2, 1, 3))

    qh, kh, vh = split(q), split(k), split(v)
    scores = matmul(qh, transpose(kh, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
    weights = softmax(scores, axis=-1)
    ctx = matmul(weights, vh)  # (B, heads, T, dh)
    return reshape(transpose(ctx, (0, 2, 1, 3)), (b, t, d))
