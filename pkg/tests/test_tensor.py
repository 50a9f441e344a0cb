import math

import numpy as np
import pytest

from beambench.errors import InvalidArgumentError, ShapeError
from beambench.tensor import (
    Adam,
    Tensor,
    adam_step,
    adaptive_avg_pool2d,
    backward,
    concat,
    conv2d,
    embedding_lookup,
    gather_rows,
    matmul,
    maxpool2d,
    no_grad,
    relu,
    reshape,
    scaled_dot_product_attention,
    select,
    softmax,
    tensor_sum,
    transpose,
)


class TestForwardBasics:
    def test_relu_example(self):
        x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
        y = relu(x)
        assert np.array_equal(y.data, [0.0, 0.0, 2.0])
        backward(tensor_sum(y))
        assert np.array_equal(x.grad, [0.0, 0.0, 1.0])

    def test_softmax_normalizes(self):
        rng = np.random.default_rng(0)
        y = softmax(Tensor(rng.normal(size=(5, 9)).astype(np.float32)), axis=-1)
        sums = y.data.sum(axis=-1)
        assert np.all(np.abs(sums - 1.0) < 1e-6)
        assert np.all(y.data >= 0.0)

    def test_dtype_preserved(self):
        x32 = Tensor(np.ones((2, 2), dtype=np.float32))
        x64 = Tensor(np.ones((2, 2), dtype=np.float64))
        assert softmax(x32).dtype == np.float32
        assert softmax(x64).dtype == np.float64
        assert (x32 @ Tensor(np.ones((2, 2), dtype=np.float32))).dtype == np.float32

    def test_sum_uses_f64_accumulation(self):
        # naive f32 accumulation of 10^6 copies of 0.1 drifts; ours should not
        x = Tensor(np.full(1_000_000, 0.1, dtype=np.float32))
        total = tensor_sum(x).item()
        assert abs(total - 100000.0) < 1.0
        naive = np.float32(0.0)
        for chunk in np.split(x.data, 100):
            naive += chunk.sum(dtype=np.float32)
        # demonstrate the drift the accumulator avoids
        assert abs(float(naive) - 100000.0) > abs(total - 100000.0)


class TestBackwardSemantics:
    def test_sum_grad_is_ones(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        backward(tensor_sum(x))
        assert np.array_equal(x.grad, np.ones((2, 3)))

    def test_square_grad(self):
        x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        backward(tensor_sum(x * x))
        assert np.allclose(x.grad, 2 * x.data)

    def test_repeated_backward_accumulates(self):
        x = Tensor(np.ones(3), requires_grad=True)
        loss = tensor_sum(x * x)
        backward(loss)
        first = x.grad.copy()
        backward(loss)
        assert np.allclose(x.grad, 2 * first)

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(InvalidArgumentError):
            backward(x * 2.0)

    def test_shared_node_fanout(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        y = x * x  # used twice through one node
        z = y + y
        backward(tensor_sum(z))
        assert np.allclose(x.grad, 4 * x.data)

    def test_no_grad_skips_recording(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = tensor_sum(x * 2.0)
        assert y._backprop is None and not y.requires_grad


class TestShapeErrors:
    def test_matmul_names_shapes(self):
        with pytest.raises(ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_conv_channel_mismatch(self):
        with pytest.raises(ShapeError, match="conv2d"):
            conv2d(Tensor(np.ones((1, 3, 5, 5))), Tensor(np.ones((2, 4, 3, 3))))

    def test_concat_mismatch(self):
        with pytest.raises(ShapeError):
            concat([Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4)))], axis=0)

    def test_gather_requires_2d(self):
        with pytest.raises(ShapeError):
            gather_rows(Tensor(np.ones(4)), np.array([0]))

    def test_embedding_bounds(self):
        with pytest.raises(InvalidArgumentError):
            embedding_lookup(Tensor(np.ones((3, 2)), requires_grad=True), np.array([3]))


class TestConvOracles:
    def test_1x1_conv_equals_per_pixel_linear(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 3, 4, 5))
        w = rng.normal(size=(6, 3, 1, 1))
        b = rng.normal(size=6)
        out = conv2d(Tensor(x), Tensor(w), Tensor(b), stride=1, padding=0)
        # independent per-pixel matmul: (HW, C) @ (C, F)
        flat = x.transpose(0, 2, 3, 1).reshape(-1, 3)
        ref = (flat @ w[:, :, 0, 0].T + b).reshape(2, 4, 5, 6).transpose(0, 3, 1, 2)
        assert np.allclose(out.data, ref, atol=1e-10)

    def test_maxpool_values(self):
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        out = maxpool2d(Tensor(x), 2)
        assert np.array_equal(out.data[0, 0], [[5.0, 7.0], [13.0, 15.0]])

    def test_adaptive_pool_mean(self):
        x = np.arange(12.0).reshape(1, 1, 3, 4)
        out = adaptive_avg_pool2d(Tensor(x), 1, 1)
        assert out.data[0, 0, 0, 0] == pytest.approx(x.mean())

    def test_adaptive_pool_resolution_independent(self):
        rng = np.random.default_rng(1)
        small = adaptive_avg_pool2d(Tensor(rng.normal(size=(1, 2, 8, 8))), 2, 2)
        big = adaptive_avg_pool2d(Tensor(rng.normal(size=(1, 2, 16, 16))), 2, 2)
        assert small.shape == big.shape == (1, 2, 2, 2)


class TestAttentionOracle:
    def test_single_head_matches_direct_computation(self):
        rng = np.random.default_rng(2)
        q = rng.normal(size=(1, 4, 6))
        k = rng.normal(size=(1, 4, 6))
        v = rng.normal(size=(1, 4, 6))
        out = scaled_dot_product_attention(Tensor(q), Tensor(k), Tensor(v), num_heads=1)
        scores = q[0] @ k[0].T / math.sqrt(6)
        weights = np.exp(scores - scores.max(axis=-1, keepdims=True))
        weights /= weights.sum(axis=-1, keepdims=True)
        assert np.allclose(out.data[0], weights @ v[0], atol=1e-6)

    def test_head_split_required(self):
        with pytest.raises(ShapeError):
            scaled_dot_product_attention(
                Tensor(np.ones((1, 2, 6))), Tensor(np.ones((1, 2, 6))), Tensor(np.ones((1, 2, 6))), 4
            )


class TestMisc:
    def test_select_and_transpose(self):
        x = Tensor(np.arange(24.0).reshape(2, 3, 4), requires_grad=True)
        row = select(x, 1, 0)
        assert row.shape == (2, 4)
        t = transpose(x, (2, 0, 1))
        assert t.shape == (4, 2, 3)

    def test_reshape_infers(self):
        x = Tensor(np.ones((2, 6)))
        assert reshape(x, (2, -1)).shape == (2, 6)


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = np.array([1.0, -2.0], dtype=np.float32)
        state = {"m": np.zeros_like(p), "v": np.zeros_like(p), "t": 1}
        out, _ = adam_step(p.copy(), np.zeros_like(p), state)
        assert np.array_equal(out, p)

    def test_single_step_hand_computed(self):
        # from zero state: update = -lr * g / (|g| + eps)
        p = np.array([0.5, -0.5], dtype=np.float64)
        g = np.array([0.2, -0.1], dtype=np.float64)
        lr, eps = 1e-3, 1e-8
        state = {"m": np.zeros_like(p), "v": np.zeros_like(p), "t": 1}
        out, _ = adam_step(p.copy(), g, state, lr=lr, eps=eps)
        expected = p - lr * g / (np.abs(g) + eps)
        assert np.allclose(out, expected, atol=1e-12)

    def test_deterministic(self):
        def run():
            t = Tensor(np.array([1.0, 2.0], dtype=np.float32), requires_grad=True)
            opt = Adam([t], lr=0.01)
            for _ in range(5):
                opt.zero_grad()
                backward(tensor_sum(t * t))
                opt.step()
            return t.data.copy()

        assert np.array_equal(run(), run())

    def test_shape_mismatch(self):
        state = {"m": np.zeros(2), "v": np.zeros(2), "t": 1}
        with pytest.raises(ShapeError):
            adam_step(np.zeros(2), np.zeros(3), state)
