import math

import numpy as np
import pytest

from featpipe import ops
from featpipe.errors import ShapeError

from conftest import assert_close
from oracles import conv2d_naive, fully_connected_naive, lrn_naive, maxpool_naive


class TestConv2d:
    def test_alexnet_conv1_shape(self, backend):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 227, 227), dtype=np.float32)
        w = rng.standard_normal((96, 3, 11, 11), dtype=np.float32) * 0.05
        out = ops.conv2d(x, w, np.zeros(96), stride=4, pad=0, groups=1)
        assert out.shape == (96, 55, 55)

    def test_identity_kernel(self, backend):
        x = np.ones((1, 3, 3), dtype=np.float32)
        out = ops.conv2d(x, np.ones((1, 1, 1, 1)), [0.0], stride=1, pad=0)
        assert_close(out, x)

    def test_grouped_strided_padded_matches_oracle(self, backend):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((4, 9, 9), dtype=np.float32)
        w = rng.standard_normal((6, 2, 3, 3), dtype=np.float32)
        b = rng.standard_normal(6).astype(np.float32)
        out = ops.conv2d(x, w, b, stride=2, pad=1, groups=2)
        assert_close(out, conv2d_naive(x, w, b, 2, 1, 2), rtol=1e-5)

    def test_groups_equal_independent_convs(self, backend):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((6, 8, 8), dtype=np.float32)
        w = rng.standard_normal((4, 3, 3, 3), dtype=np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        grouped = ops.conv2d(x, w, b, stride=1, pad=1, groups=2)
        lo = ops.conv2d(x[:3], w[:2], b[:2], stride=1, pad=1)
        hi = ops.conv2d(x[3:], w[2:], b[2:], stride=1, pad=1)
        assert_close(grouped, np.concatenate([lo, hi], axis=0))

    @pytest.mark.parametrize("h", [1, 3, 7, 16, 32])
    @pytest.mark.parametrize("k", [1, 2, 3, 5])
    @pytest.mark.parametrize("stride", [1, 2, 3])
    @pytest.mark.parametrize("pad", [0, 1, 2])
    def test_shape_formula_grid(self, h, k, stride, pad):
        if h + 2 * pad < k:
            pytest.skip("window larger than padded input")
        x = np.zeros((1, h, h), dtype=np.float32)
        w = np.zeros((1, 1, k, k), dtype=np.float32)
        out = ops.conv2d(x, w, [0.0], stride=stride, pad=pad)
        expect = (h + 2 * pad - k) // stride + 1
        assert out.shape == (1, expect, expect)

    def test_channel_mismatch_names_dimension(self, backend):
        x = np.zeros((4, 5, 5), dtype=np.float32)
        w = np.zeros((6, 3, 3, 3), dtype=np.float32)
        with pytest.raises(ShapeError, match="weight channels"):
            ops.conv2d(x, w, np.zeros(6), stride=1, pad=1, groups=2)

    def test_groups_not_dividing_channels(self, backend):
        x = np.zeros((5, 5, 5), dtype=np.float32)
        w = np.zeros((6, 2, 3, 3), dtype=np.float32)
        with pytest.raises(ShapeError, match="input channels"):
            ops.conv2d(x, w, np.zeros(6), stride=1, pad=1, groups=2)

    def test_kernel_larger_than_input(self, backend):
        x = np.zeros((1, 4, 4), dtype=np.float32)
        w = np.zeros((1, 1, 6, 6), dtype=np.float32)
        with pytest.raises(ShapeError, match="height"):
            ops.conv2d(x, w, [0.0], stride=1, pad=0)


class TestRelu:
    def test_definition(self):
        assert_close(ops.relu(np.array([-3.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_fixed_point_on_non_negative(self):
        x = np.abs(np.random.default_rng(3).standard_normal((2, 3, 4))).astype(np.float32)
        assert_close(ops.relu(x), x)

    def test_idempotence(self):
        x = np.random.default_rng(4).standard_normal((3, 5, 5)).astype(np.float32)
        once = ops.relu(x)
        assert_close(ops.relu(once), once)


class TestLrn:
    def test_neutral_parameters(self, backend):
        x = np.random.default_rng(5).standard_normal((4, 3, 3)).astype(np.float32)
        assert_close(ops.lrn(x, k=1.0, n=1, alpha=0.0, beta=0.75), x)

    def test_single_channel_closed_form(self, backend):
        out = ops.lrn(np.full((1, 1, 1), 2.0), k=1.0, n=1, alpha=1.0, beta=1.0)
        # 2 / (1 + 4) = 0.4
        assert_close(out, np.full((1, 1, 1), 0.4), rtol=1e-6)

    def test_defaults_match_oracle(self, backend):
        x = np.random.default_rng(6).standard_normal((8, 5, 5)).astype(np.float32)
        out = ops.lrn(x)
        assert_close(out, lrn_naive(x, 1.0, 5, 1e-4, 0.75), rtol=1e-6)

    def test_rejects_bad_params(self):
        x = np.ones((2, 2, 2), dtype=np.float32)
        with pytest.raises(ShapeError):
            ops.lrn(x, k=0.0)
        with pytest.raises(ShapeError):
            ops.lrn(x, n=4)


class TestMaxpool:
    def test_constant_input(self, backend):
        out = ops.maxpool(np.full((2, 5, 5), 3.5, dtype=np.float32), size=3, stride=2)
        assert out.shape == (2, 2, 2)
        assert np.all(out == np.float32(3.5))

    def test_alexnet_pool1_shape(self, backend):
        out = ops.maxpool(np.zeros((96, 55, 55), dtype=np.float32), size=3, stride=2)
        assert out.shape == (96, 27, 27)

    def test_matches_oracle_exactly(self, backend):
        x = np.random.default_rng(9).standard_normal((5, 11, 13)).astype(np.float32)
        out = ops.maxpool(x, size=3, stride=2)
        assert np.array_equal(out, maxpool_naive(x, 3, 2))

    def test_window_larger_than_input(self, backend):
        with pytest.raises(ShapeError):
            ops.maxpool(np.zeros((1, 2, 2), dtype=np.float32), size=3, stride=1)


class TestFullyConnected:
    def test_identity(self, backend):
        out = ops.fully_connected([1.0, 2.0, 3.0], np.eye(3), np.zeros(3))
        assert_close(out, [1.0, 2.0, 3.0])

    def test_zero_weights_give_bias(self, backend):
        out = ops.fully_connected(np.ones(4), np.zeros((2, 4)), [5.0, 5.0])
        assert_close(out, [5.0, 5.0])

    def test_matches_oracle(self, backend):
        rng = np.random.default_rng(10)
        x = rng.standard_normal(20).astype(np.float32)
        w = rng.standard_normal((10, 20)).astype(np.float32)
        b = rng.standard_normal(10).astype(np.float32)
        assert_close(ops.fully_connected(x, w, b),
                     fully_connected_naive(x, w, b), rtol=1e-6)

    def test_rank3_input_flattens_channel_major(self, backend):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((2, 3, 4)).astype(np.float32)
        w = rng.standard_normal((5, 24)).astype(np.float32)
        out = ops.fully_connected(x, w, np.zeros(5))
        assert_close(out, ops.fully_connected(x.reshape(-1), w, np.zeros(5)))

    def test_dimension_mismatch(self, backend):
        with pytest.raises(ShapeError, match="input"):
            ops.fully_connected(np.ones(3), np.zeros((2, 4)), np.zeros(2))
        with pytest.raises(ShapeError, match="bias"):
            ops.fully_connected(np.ones(4), np.zeros((2, 4)), np.zeros(3))


class TestSoftmax:
    def test_symmetry(self):
        assert_close(ops.softmax([0.0, 0.0]), [0.5, 0.5])

    def test_closed_form(self):
        out = ops.softmax([math.log(1.0), math.log(3.0)])
        assert_close(out, [0.25, 0.75], rtol=1e-6)

    def test_shift_invariance(self):
        x = np.random.default_rng(12).standard_normal(9).astype(np.float32)
        assert_close(ops.softmax(x + np.float32(7.5)), ops.softmax(x), rtol=1e-6)

    def test_sums_to_one_and_positive(self):
        # logit spreads beyond ~85 underflow the f32 storage; stay in range
        x = np.random.default_rng(13).standard_normal(1000).astype(np.float32) * 8
        out = ops.softmax(x)
        assert abs(float(out.sum(dtype=np.float64)) - 1.0) <= 1e-6
        assert np.all(out > 0) and np.all(out <= 1.0)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal(17).astype(np.float32)
        perm = rng.permutation(17)
        assert_close(ops.softmax(x)[perm], ops.softmax(x[perm]), rtol=1e-6)

    def test_no_overflow_on_large_inputs(self):
        out = ops.softmax(np.array([1000.0, 1000.0, 999.0]))
        assert np.all(np.isfinite(out))
        assert abs(float(out.sum(dtype=np.float64)) - 1.0) <= 1e-6


class TestDropoutInference:
    def test_identity(self):
        x = np.random.default_rng(15).standard_normal((3, 4, 5)).astype(np.float32)
        assert ops.dropout_inference(x) is x

    def test_shape_preserved_on_feature_vector(self):
        x = np.zeros(4096, dtype=np.float32)
        assert ops.dropout_inference(x).shape == (4096,)

    def test_commutes_with_relu(self):
        x = np.random.default_rng(16).standard_normal(64).astype(np.float32)
        assert_close(ops.dropout_inference(ops.relu(x)),
                     ops.relu(ops.dropout_inference(x)))


def test_backends_agree_on_random_cases():
    """Native and fallback paths must agree within f32 rounding."""
    from featpipe import kernels
    if not kernels.HAVE_NATIVE:
        pytest.skip("native extension not built")
    rng = np.random.default_rng(17)
    x = rng.standard_normal((6, 13, 11)).astype(np.float32)
    w = rng.standard_normal((4, 3, 3, 5)).astype(np.float32)
    b = rng.standard_normal(4).astype(np.float32)
    fc_w = rng.standard_normal((3, x.size)).astype(np.float32)
    results = {}
    for name in ("numpy", "native"):
        with kernels.use_backend(name):
            results[name] = (
                ops.conv2d(x, w, b, stride=2, pad=1, groups=2),
                ops.lrn(x),
                ops.maxpool(x, size=2, stride=2),
                ops.fully_connected(x, fc_w, np.zeros(3)),
            )
    assert_close(results["native"][0], results["numpy"][0], rtol=1e-6)
    assert_close(results["native"][1], results["numpy"][1], rtol=1e-6)
    assert np.array_equal(results["native"][2], results["numpy"][2])
    assert_close(results["native"][3], results["numpy"][3], rtol=1e-6)


def test_hybrid_backend_routes_each_op_to_its_source():
    """The hybrid must give bit-identical results to the path it routes to."""
    from featpipe import kernels
    if not kernels.HAVE_NATIVE:
        pytest.skip("native extension not built")
    rng = np.random.default_rng(18)
    x = rng.standard_normal((4, 9, 9)).astype(np.float32)
    w = rng.standard_normal((2, 2, 3, 3)).astype(np.float32)
    b = rng.standard_normal(2).astype(np.float32)
    fc_w = rng.standard_normal((5, x.size)).astype(np.float32)
    fc_b = rng.standard_normal(5).astype(np.float32)

    per_backend = {}
    for name in ("numpy", "native", "hybrid"):
        with kernels.use_backend(name):
            per_backend[name] = {
                "conv2d": ops.conv2d(x, w, b, stride=1, pad=1, groups=2),
                "lrn": ops.lrn(x),
                "maxpool": ops.maxpool(x, size=3, stride=2),
                "fc": ops.fully_connected(x, fc_w, fc_b),
            }

    routing = {"conv2d": "numpy", "lrn": "numpy", "maxpool": "native", "fc": "native"}
    for op, source in routing.items():
        assert np.array_equal(per_backend["hybrid"][op], per_backend[source][op]), op


def test_default_backend_is_hybrid_when_native_built(monkeypatch):
    from featpipe import kernels
    if not kernels.HAVE_NATIVE:
        pytest.skip("native extension not built")
    monkeypatch.delenv("FEATPIPE_KERNELS", raising=False)
    assert kernels._select_default().NAME == "hybrid"
    monkeypatch.setenv("FEATPIPE_KERNELS", "hybrid")
    assert kernels._select_default().NAME == "hybrid"
    monkeypatch.setenv("FEATPIPE_KERNELS", "numpy")
    assert kernels._select_default().NAME == "numpy"
