import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ensnet.tensor import (
    LRN,
    SGD,
    BatchNorm,
    CheckpointError,
    Conv2D,
    Dense,
    Pool2D,
    ReLU,
    Tensor,
    TrainSchedule,
    cross_entropy,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
    softmax,
    softmax_cross_entropy,
)
from ensnet.tensor.checkpoint import decode_checkpoint, encode_checkpoint
from ensnet.tensor.gradcheck import numeric_gradient, relative_error
from ensnet.tensor.layers import LayerShapeError

from oracles import conv2d_direct, pool2d_direct


class TestConv:
    def test_window_sum(self):
        x = np.ones((1, 3, 3, 1))
        conv = Conv2D(2, 1, 0, 1, 1, weight=np.ones((2, 2, 1, 1)))
        np.testing.assert_array_equal(conv.forward(x), np.full((1, 2, 2, 1), 4.0))

    def test_identity_kernel(self):
        x = np.random.default_rng(0).standard_normal((2, 4, 5, 3))
        W = np.zeros((1, 1, 3, 3))
        W[0, 0] = np.eye(3)
        np.testing.assert_array_equal(Conv2D(1, 1, 0, 3, 3, weight=W).forward(x), x)

    def test_strided_padded_matches_direct(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1, 5, 5, 2))
        W, b = rng.standard_normal((3, 3, 2, 4)), rng.standard_normal(4)
        out = Conv2D(3, 2, 1, 2, 4, weight=W, bias=b).forward(x)
        np.testing.assert_allclose(out, conv2d_direct(x, W, b, 2, 1), rtol=0, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(LayerShapeError):
            Conv2D(3, 1, 1, 2, 4).forward(np.zeros((1, 4, 4, 3)))

    def test_nonpositive_output(self):
        with pytest.raises(LayerShapeError):
            Conv2D(5, 1, 0, 1, 1).forward(np.zeros((1, 3, 3, 1)))

    @given(st.integers(0, 2**31), st.floats(-5, 5))
    @settings(max_examples=30, deadline=None)
    def test_linearity(self, seed, a):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((2, 6, 6, 3))
        conv = Conv2D(3, 2, 1, 3, 2, weight=rng.standard_normal((3, 3, 3, 2)))
        np.testing.assert_allclose(conv.forward(a * x), a * conv.forward(x), rtol=0, atol=1e-12 * max(1, abs(a)) * 50)


class TestPool:
    def test_max(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        assert Pool2D(2, 2, 0, "max").forward(x).item() == 4.0

    def test_avg(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        assert Pool2D(2, 2, 0, "avg").forward(x).item() == 2.5

    def test_global_average(self):
        x = np.random.default_rng(2).standard_normal((1, 7, 7, 1))
        out = Pool2D(7, 1, 0, "avg").forward(x)
        assert out.shape == (1, 1, 1, 1)
        assert abs(out.item() - x.mean()) < 1e-12

    def test_max_tie_goes_to_first_in_scan_order(self):
        x = np.array([[5.0, 5.0], [5.0, 1.0]]).reshape(1, 2, 2, 1)
        pool = Pool2D(2, 2, 0, "max")
        pool.forward(x)
        dx = pool.backward(np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(dx.reshape(2, 2), [[1.0, 0.0], [0.0, 0.0]])

    def test_avg_padding_divides_by_full_window(self):
        x = np.ones((1, 2, 2, 1))
        out = Pool2D(2, 2, 1, "avg").forward(x)
        np.testing.assert_array_equal(out.reshape(-1), [0.25] * 4)

    def test_max_padding_is_neg_inf(self):
        x = -np.ones((1, 2, 2, 1))
        out = Pool2D(2, 2, 1, "max").forward(x)
        np.testing.assert_array_equal(out.reshape(-1), [-1.0] * 4)

    def test_nonpositive_output(self):
        with pytest.raises(LayerShapeError):
            Pool2D(3, 1, 0, "max").forward(np.zeros((1, 2, 2, 1)))


def test_random_shapes_match_direct_oracles():
    rng = np.random.default_rng(1234)
    for _ in range(100):
        n, c = rng.integers(1, 3), rng.integers(1, 4)
        h, w = rng.integers(1, 9, size=2)
        k, s, p = rng.integers(1, 5), rng.integers(1, 4), rng.integers(0, 3)
        if (h + 2 * p - k) < 0 or (w + 2 * p - k) < 0:
            continue
        x = rng.standard_normal((n, h, w, c))
        q = rng.integers(1, 4)
        W, b = rng.standard_normal((k, k, c, q)), rng.standard_normal(q)
        got = Conv2D(k, s, p, c, q, weight=W, bias=b).forward(x)
        np.testing.assert_allclose(got, conv2d_direct(x, W, b, s, p), rtol=0, atol=1e-12)
        for mode in ("max", "avg"):
            if mode == "max" and p >= k:
                continue
            got = Pool2D(k, s, p, mode).forward(x)
            np.testing.assert_allclose(got, pool2d_direct(x, k, s, p, mode), rtol=0, atol=1e-12)


class TestDenseReluNorms:
    def test_relu(self):
        np.testing.assert_array_equal(ReLU().forward(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_dense_identity(self):
        x = np.random.default_rng(3).standard_normal((4, 5))
        np.testing.assert_array_equal(Dense(5, 5, weight=np.eye(5)).forward(x), x)

    def test_dense_flattens_feature_maps(self):
        x = np.arange(12.0).reshape(1, 2, 2, 3)
        out = Dense(12, 1, weight=np.ones((12, 1))).forward(x)
        assert out.item() == 66.0

    def test_batchnorm_closed_form(self):
        bn = BatchNorm(1)
        out = bn.forward(np.array([[1.0], [3.0]]), train=True)
        expected = np.array([[-1.0], [1.0]]) / math.sqrt(1.0 + 1e-5)
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)
        assert out[0, 0] > -1 and out[1, 0] < 1

    def test_batchnorm_batch_of_one(self):
        with pytest.raises(ValueError, match="at least 2"):
            BatchNorm(2).forward(np.zeros((1, 3, 3, 2)), train=True)

    def test_batchnorm_running_stats(self):
        bn = BatchNorm(1)
        bn.forward(np.array([[1.0], [3.0]]), train=True)
        assert bn.buffers["running_mean"][0] == pytest.approx(0.1 * 2.0)
        assert bn.buffers["running_var"][0] == pytest.approx(0.9 + 0.1 * 1.0)
        out = bn.forward(np.array([[0.2]]), train=False)
        assert out.item() == pytest.approx((0.2 - 0.2) / math.sqrt(1.0 + 1e-5))

    @given(st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_batchnorm_moments(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(3.0, 2.0, (6, 4, 4, 3))
        out = BatchNorm(3).forward(x, train=True)
        np.testing.assert_allclose(out.mean(axis=(0, 1, 2)), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=(0, 1, 2)), 1.0, atol=1e-3)

    def test_lrn_constants(self):
        lrn = LRN()
        assert (lrn.size, lrn.alpha, lrn.beta, lrn.k) == (5, 1e-4, 0.75, 2.0)
        x = np.zeros((1, 1, 1, 7))
        x[0, 0, 0, 3] = 10.0
        out = lrn.forward(x)
        assert out[0, 0, 0, 3] == pytest.approx(10.0 / (2.0 + 1e-4 * 100.0) ** 0.75)


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(3)), [1 / 3] * 3, rtol=0, atol=1e-15)

    def test_closed_form(self):
        out = softmax(np.log([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out, [1 / 6, 1 / 3, 1 / 2], rtol=0, atol=1e-15)

    @given(arrays(np.float64, (4, 6), elements=st.floats(-50, 50)))
    @settings(max_examples=100, deadline=None)
    def test_shift_invariance_and_rows(self, z):
        p = softmax(z)
        np.testing.assert_allclose(softmax(z + 100.0), p, rtol=0, atol=1e-12)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        assert np.all(p >= 0)
        np.testing.assert_array_equal(np.argmax(z + 7.5, axis=1), np.argmax(p, axis=1))

    def test_large_logits_stay_finite(self):
        p = softmax(np.array([[1e300, 0.0, -1e300]]))
        assert np.all(np.isfinite(p))

    def test_empty_row(self):
        with pytest.raises(ValueError):
            softmax(np.zeros((2, 0)))


class TestLossAndSGD:
    def test_perfect_prediction(self):
        assert cross_entropy(np.eye(3), [0, 1, 2]) == 0.0

    def test_uniform_prediction(self):
        assert cross_entropy(np.full((2, 4), 0.25), [0, 3]) == pytest.approx(math.log(4), abs=1e-15)

    def test_clamp(self):
        assert cross_entropy(np.array([[1.0, 0.0]]), [1]) == pytest.approx(-math.log(1e-12))

    def test_label_out_of_range(self):
        with pytest.raises(ValueError, match="range"):
            cross_entropy(np.full((1, 3), 1 / 3), [3])

    def test_single_step(self):
        w = Tensor([1.0], grad=[2.0])
        sgd_step([w], TrainSchedule(lr=0.1, momentum=0.0))
        assert w.value[0] == pytest.approx(0.8, abs=1e-15)

    def test_momentum(self):
        w = Tensor([0.0], grad=[1.0])
        opt = SGD([w], momentum=0.9)
        opt.step(0.1)
        opt.step(0.1)
        # v1 = -0.1, v2 = 0.9 * -0.1 - 0.1
        assert w.value[0] == pytest.approx(-0.1 + (-0.19))

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            TrainSchedule(epochs=0)
        with pytest.raises(ValueError):
            TrainSchedule(batch=0)
        s = TrainSchedule(epochs=30, lr=0.01)
        assert s.lr_at(0) == 0.01 and s.lr_at(19) == 0.01
        assert s.lr_at(20) == pytest.approx(0.001)


class TestGradCheck:
    def test_conv_example(self):
        assert grad_check({"kind": "conv", "k": 3, "p": 1, "q": 2}, (1, 4, 4, 2), seed=0) < 1e-6

    def test_dense_example(self):
        assert grad_check({"kind": "dense", "units": 3}, (2, 5), seed=0) < 1e-7

    def test_softmax_cross_entropy_example(self):
        rng = np.random.default_rng(0)
        logits = rng.standard_normal((4, 5))
        labels = np.array([0, 3, 1, 4])
        _, analytic, p = softmax_cross_entropy(logits, labels)
        onehot = np.eye(5)[labels]
        np.testing.assert_allclose(analytic, (p - onehot) / 4, rtol=0, atol=1e-15)
        numeric = numeric_gradient(lambda: softmax_cross_entropy(logits, labels)[0], logits)
        np.testing.assert_allclose(analytic, numeric, rtol=0, atol=1e-6)

    @pytest.mark.parametrize(
        "config, shape",
        [
            ({"kind": "conv", "k": 3, "s": 1, "p": 1, "q": 3}, (2, 5, 5, 2)),
            ({"kind": "conv", "k": 2, "s": 2, "p": 0, "q": 2}, (2, 6, 6, 3)),
            ({"kind": "maxpool", "r": 3, "s": 2, "p": 1}, (2, 5, 5, 2)),
            ({"kind": "avgpool", "r": 2, "s": 1, "p": 1}, (2, 4, 4, 2)),
            ({"kind": "dense", "units": 4}, (3, 2, 2, 2)),
            ({"kind": "relu"}, (3, 4, 4, 2)),
            ({"kind": "lrn"}, (2, 3, 3, 7)),
            ({"kind": "batchnorm"}, (4, 3, 3, 2)),
            ({"kind": "softmax_ce"}, (4, 6)),
            ({"kind": "add"}, (2, 3, 3, 2)),
            ({"kind": "concat"}, (2, 3, 3, 2)),
        ],
    )
    def test_every_layer_many_seeds(self, config, shape):
        worst = max(grad_check(config, shape, seed) for seed in range(20))
        assert worst < 1e-4

    def test_rejects_large_shapes(self):
        with pytest.raises(ValueError):
            grad_check({"kind": "relu"}, (9, 2), 0)

    def test_relative_error_floor(self):
        assert relative_error(np.array([0.0]), np.array([1e-12])) == pytest.approx(1e-4)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        recs = {"conv1.W": rng.standard_normal((3, 3, 2, 4)), "conv1.b": rng.standard_normal(4), "s": np.array(2.5)}
        save_checkpoint(tmp_path / "x.ensw", recs)
        back, weights = load_checkpoint(tmp_path / "x.ensw")
        assert weights is None
        assert list(back) == list(recs)
        for k in recs:
            assert back[k].tobytes() == np.asarray(recs[k]).tobytes()

    def test_layout(self):
        data = encode_checkpoint({"ab": np.array([1.0, 2.0])}, weights=[0.25, 0.75])
        assert data[:4] == b"ENSW"
        # magic, version, count, label len, label, ndim, dim, 2 floats, weight count, 2 floats
        assert len(data) == 4 + 4 + 4 + 4 + 2 + 4 + 4 + 16 + 4 + 16
        recs, w = decode_checkpoint(data)
        np.testing.assert_array_equal(w, [0.25, 0.75])

    def test_bad_magic(self):
        data = bytearray(encode_checkpoint({"a": np.zeros(2)}))
        data[0:4] = b"XXXX"
        with pytest.raises(CheckpointError, match="magic"):
            decode_checkpoint(bytes(data))

    def test_truncated(self):
        data = encode_checkpoint({"a": np.zeros(4)})
        with pytest.raises(CheckpointError, match="truncated"):
            decode_checkpoint(data[:-3])
