"""Central finite-difference checks for every differentiable op and for
the full model.

The FD side never touches the backward closures: each case exposes a pure
loss function of raw numpy arrays that is re-evaluated under elementwise
perturbations. Per-op checks run in f64 with step 1e-4; the end-to-end
model check runs in f32 with a coarser step (f32 quantization would
swamp a 1e-4 step).

Error metric: |analytic - fd| / max(|analytic|, |fd|, 1), i.e. relative
error with a unit floor so near-zero gradients are compared absolutely.
"""

from __future__ import annotations

import numpy as np

from .model import FusionModel, ModelConfig
from .tensor import (
    Tensor,
    adaptive_avg_pool2d,
    add,
    backward,
    concat,
    conv2d,
    embedding_lookup,
    gather_rows,
    layer_norm,
    log,
    matmul,
    maxpool2d,
    mul,
    no_grad,
    relu,
    reshape,
    scaled_dot_product_attention,
    select,
    softmax,
    sub,
    tensor_mean,
    tensor_sum,
    transpose,
)
from .trainer import cross_entropy, soft_snr_gap

PER_OP_TOL = 1e-5
PER_OP_STEP = 1e-4
MODEL_TOL = 1e-3
MODEL_STEP = 1e-2


def rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1.0)
    return float(np.max(np.abs(analytic - fd) / denom))


def fd_grad(loss_fn, arrays: list, which: int, step: float) -> np.ndarray:
    """Central differences of loss_fn w.r.t. arrays[which], elementwise."""
    x = arrays[which]
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        up = loss_fn(arrays)
        flat[i] = keep - step
        down = loss_fn(arrays)
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def check_case(name, loss_builder, arrays, step=PER_OP_STEP, tol=PER_OP_TOL):
    """One case: analytic grads via the tape vs FD for every input array.

    ``loss_builder`` maps a list of Tensors to a scalar Tensor;
    ``arrays`` are the f64 input values. Returns (name, worst_err, ok).
    """
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = loss_builder(tensors)
    backward(loss)

    def loss_fn(arrs):
        with no_grad():
            return loss_builder([Tensor(a) for a in arrs]).item()

    worst = 0.0
    work = [a.copy() for a in arrays]
    for i, t in enumerate(tensors):
        analytic = t.grad if t.grad is not None else np.zeros_like(arrays[i])
        fd = fd_grad(loss_fn, work, i, step)
        worst = max(worst, rel_err(analytic, fd))
    return name, worst, worst <= tol


def _weighted(out, weights):
    return tensor_sum(out * Tensor(weights.astype(out.dtype)))


def op_cases(seed: int = 0):
    """All per-op gradient-check cases (f64 inputs)."""
    rng = np.random.default_rng(seed)

    def r(*shape):
        return rng.normal(0.0, 1.0, shape)

    def away_from_zero(a, margin=1e-3):
        a = a.copy()
        a[np.abs(a) < margin] += 3 * margin
        return a

    cases = []
    w34 = r(3, 4)
    cases.append(("add", lambda ts: _weighted(add(ts[0], ts[1]), w34), [r(3, 4), r(3, 4)]))
    cases.append(("add_broadcast", lambda ts: _weighted(add(ts[0], ts[1]), w34), [r(3, 4), r(4)]))
    cases.append(("sub", lambda ts: _weighted(sub(ts[0], ts[1]), w34), [r(3, 4), r(3, 4)]))
    cases.append(("mul", lambda ts: _weighted(mul(ts[0], ts[1]), w34), [r(3, 4), r(3, 4)]))
    w35 = r(3, 5)
    cases.append(("matmul", lambda ts: _weighted(matmul(ts[0], ts[1]), w35), [r(3, 4), r(4, 5)]))
    w235 = r(2, 3, 5)
    cases.append(
        ("matmul_batched", lambda ts: _weighted(matmul(ts[0], ts[1]), w235), [r(2, 3, 4), r(4, 5)])
    )
    cases.append(("relu", lambda ts: _weighted(relu(ts[0]), w34), [away_from_zero(r(3, 4))]))
    cases.append(("log", lambda ts: _weighted(log(ts[0]), w34), [np.abs(r(3, 4)) + 0.5]))
    cases.append(("sum_all", lambda ts: tensor_sum(ts[0]), [r(3, 4)]))
    w3 = r(3)
    cases.append(("sum_axis", lambda ts: _weighted(tensor_sum(ts[0], axis=1), w3), [r(3, 4)]))
    w4 = r(4)
    cases.append(("mean_axis", lambda ts: _weighted(tensor_mean(ts[0], axis=0), w4), [r(3, 4)]))
    w26 = r(2, 6)
    cases.append(("reshape", lambda ts: _weighted(reshape(ts[0], (2, 6)), w26), [r(3, 4)]))
    w324 = r(3, 2, 4)
    cases.append(
        ("transpose", lambda ts: _weighted(transpose(ts[0], (1, 0, 2)), w324), [r(2, 3, 4)])
    )
    w54 = r(5, 4)
    cases.append(
        ("concat", lambda ts: _weighted(concat(ts, axis=0), w54), [r(2, 4), r(3, 4)])
    )
    cases.append(("select", lambda ts: _weighted(select(ts[0], 1, 1), w3), [r(3, 4)]))
    idx_rows = np.array([1, 3, 0])
    cases.append(
        ("gather_rows", lambda ts: _weighted(gather_rows(ts[0], idx_rows), w3), [r(3, 4)])
    )
    idx_emb = np.array([0, 2, 2, 1])
    w44 = r(4, 4)
    cases.append(
        ("embedding_lookup", lambda ts: _weighted(embedding_lookup(ts[0], idx_emb), w44), [r(3, 4)])
    )
    cases.append(("softmax", lambda ts: _weighted(softmax(ts[0], axis=-1), w35), [r(3, 5)]))
    w46 = r(4, 6)
    cases.append(
        (
            "layer_norm",
            lambda ts: _weighted(layer_norm(ts[0], ts[1], ts[2]), w46),
            [r(4, 6), r(6), r(6)],
        )
    )
    wc = r(2, 4, 6, 7)
    cases.append(
        (
            "conv2d",
            lambda ts: _weighted(conv2d(ts[0], ts[1], ts[2], stride=1, padding=1), wc),
            [r(2, 3, 6, 7), r(4, 3, 3, 3), r(4)],
        )
    )
    wc2 = r(2, 4, 3, 3)
    cases.append(
        (
            "conv2d_stride2",
            lambda ts: _weighted(conv2d(ts[0], ts[1], ts[2], stride=2, padding=1), wc2),
            [r(2, 3, 6, 6), r(4, 3, 3, 3), r(4)],
        )
    )
    wp = r(2, 2, 3, 3)
    cases.append(
        ("maxpool2d", lambda ts: _weighted(maxpool2d(ts[0], 2), wp), [r(2, 2, 6, 6)])
    )
    wa = r(2, 2, 2, 2)
    cases.append(
        (
            "adaptive_avg_pool2d",
            lambda ts: _weighted(adaptive_avg_pool2d(ts[0], 2, 2), wa),
            [r(2, 2, 7, 5)],
        )
    )
    watt = r(2, 3, 8)
    cases.append(
        (
            "attention",
            lambda ts: _weighted(scaled_dot_product_attention(ts[0], ts[1], ts[2], 2), watt),
            [r(2, 3, 8), r(2, 3, 8), r(2, 3, 8)],
        )
    )
    labels = np.array([2, 0, 1])
    cases.append(
        ("cross_entropy", lambda ts: cross_entropy(softmax(ts[0], axis=-1), labels), [r(3, 5)])
    )
    powers = np.abs(rng.normal(1.0, 0.5, (3, 5))) + 0.1
    cases.append(
        ("soft_snr_gap", lambda ts: soft_snr_gap(softmax(ts[0], axis=-1), powers), [r(3, 5)])
    )
    return cases


def run_op_suite(seed: int = 0):
    """Returns a list of (name, worst_err, ok) over all op cases."""
    return [check_case(name, fn, arrays) for name, fn, arrays in op_cases(seed)]


def _toy_model_setup(seed: int = 0):
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(
        embed_dim=8, num_beams=16, fusion_layers=1, num_heads=2, conv_widths=(4, 4, 4), pool_hw=(1, 1)
    )
    model = FusionModel(cfg, seed=seed)
    n = 2
    inputs = {
        "camera": rng.uniform(0, 1, (n, 3, 8, 8)).astype(np.float32),
        "lidar": rng.uniform(0, 1, (n, 1, 8, 8)).astype(np.float32),
        "radar": rng.uniform(0, 1, (n, 2, 8, 8)).astype(np.float32),
        "gps": rng.normal(0, 1, (n, 4)).astype(np.float32),
        "mmwave": rng.uniform(0, 2, (n, 16)).astype(np.float32),
    }
    powers = inputs["mmwave"].astype(np.float64)
    labels = np.argmax(powers, axis=1)
    return model, inputs, powers, labels


def model_fd_check(seed: int = 0, sample_frac: float = 0.01, step: float = MODEL_STEP):
    """FD check of the full-pipeline loss w.r.t. a sampled parameter subset.

    Runs the d=8 toy model over all five modalities with the training
    objective (CE + 0.1 * soft gap). Returns (worst_err, n_checked).
    """
    model, inputs, powers, labels = _toy_model_setup(seed)

    def loss_tensor():
        posterior = model.forward(inputs)
        return cross_entropy(posterior, labels) + soft_snr_gap(posterior, powers) * 0.1

    params = model.params()
    for p in params.values():
        p.grad = None
    backward(loss_tensor())

    rng = np.random.default_rng(seed + 1)
    flat_index = [
        (name, i) for name, p in sorted(params.items()) for i in range(p.data.size)
    ]
    n_sample = max(30, int(sample_frac * len(flat_index)))
    picks = rng.choice(len(flat_index), size=min(n_sample, len(flat_index)), replace=False)

    worst = 0.0
    for pick in picks:
        name, i = flat_index[pick]
        p = params[name]
        flat = p.data.reshape(-1)
        keep = flat[i]
        flat[i] = keep + step
        with no_grad():
            up = loss_tensor().item()
        flat[i] = keep - step
        with no_grad():
            down = loss_tensor().item()
        flat[i] = keep
        fd = (up - down) / (2.0 * step)
        analytic = p.grad.reshape(-1)[i] if p.grad is not None else 0.0
        worst = max(worst, rel_err(np.asarray(analytic), np.asarray(fd)))
    return worst, len(picks)
