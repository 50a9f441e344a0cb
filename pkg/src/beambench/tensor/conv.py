"""Convolution and pooling ops for the autodiff engine."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .engine import Tensor, _result


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    view = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return view[:, :, ::stride, ::stride]


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution; x (N,C,H,W), weight (F,C,kh,kw), bias (F,)."""
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d: incompatible shapes {x.shape} and {weight.shape}")
    f, c, kh, kw = weight.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ShapeError(f"conv2d: kernel {weight.shape} larger than padded input {xp.shape}")
    win = _windows(xp, kh, kw, stride)  # (N, C, oh, ow, kh, kw)
    out = np.einsum("nchwkl,fckl->nfhw", win, weight.data, optimize=True)
    if bias is not None:
        if bias.shape != (f,):
            raise ShapeError(f"conv2d: bias {bias.shape} must be ({f},)")
        out = out + bias.data.reshape(1, f, 1, 1)
    oh, ow = out.shape[2], out.shape[3]

    def backprop(g):
        weight.accumulate_grad(np.einsum("nchwkl,nfhw->fckl", win, g, optimize=True))
        if bias is not None:
            bias.accumulate_grad(g.sum(axis=(0, 2, 3)))
        dxp = np.zeros_like(xp)
        for ki in range(kh):
            for kj in range(kw):
                contrib = np.einsum("nfhw,fc->nchw", g, weight.data[:, :, ki, kj], optimize=True)
                dxp[:, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride] += contrib
        if padding:
            dxp = dxp[:, :, padding:-padding, padding:-padding]
        x.accumulate_grad(dxp)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _result(out.astype(x.dtype, copy=False), parents, backprop)


def maxpool2d(x: Tensor, kernel: int, stride: int | None = None) -> Tensor:
    """Max pooling over square windows; trailing remainder is dropped."""
    if x.ndim != 4:
        raise ShapeError(f"maxpool2d: need (N,C,H,W), got {x.shape}")
    stride = kernel if stride is None else stride
    n, c, h, w = x.shape
    if h < kernel or w < kernel:
        raise ShapeError(f"maxpool2d: kernel {kernel} larger than input {x.shape}")
    win = _windows(x.data, kernel, kernel, stride)
    n_, c_, oh, ow = win.shape[:4]
    flat = win.reshape(n_, c_, oh, ow, kernel * kernel)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def backprop(g):
        dx = np.zeros_like(x.data)
        ni, ci, oi, oj = np.indices((n_, c_, oh, ow))
        rows = oi * stride + idx // kernel
        cols = oj * stride + idx % kernel
        np.add.at(dx, (ni, ci, rows, cols), g)
        x.accumulate_grad(dx)

    return _result(out, (x,), backprop)


def adaptive_avg_pool2d(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Average pooling onto a fixed output grid, any input resolution."""
    if x.ndim != 4:
        raise ShapeError(f"adaptive_avg_pool2d: need (N,C,H,W), got {x.shape}")
    n, c, h, w = x.shape
    if out_h < 1 or out_w < 1 or out_h > h or out_w > w:
        raise ShapeError(f"adaptive_avg_pool2d: bad target ({out_h},{out_w}) for input {x.shape}")

    def bounds(size, out):
        starts = [(i * size) // out for i in range(out)]
        ends = [-(-((i + 1) * size) // out) for i in range(out)]
        return starts, ends

    hs, he = bounds(h, out_h)
    ws, we = bounds(w, out_w)
    out = np.empty((n, c, out_h, out_w), dtype=x.dtype)
    for i in range(out_h):
        for j in range(out_w):
            slab = x.data[:, :, hs[i] : he[i], ws[j] : we[j]]
            out[:, :, i, j] = slab.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype)

    def backprop(g):
        dx = np.zeros_like(x.data)
        for i in range(out_h):
            for j in range(out_w):
                area = (he[i] - hs[i]) * (we[j] - ws[j])
                dx[:, :, hs[i] : he[i], ws[j] : we[j]] += g[:, :, i : i + 1, j : j + 1] / area
        x.accumulate_grad(dx)

    return _result(out, (x,), backprop)
