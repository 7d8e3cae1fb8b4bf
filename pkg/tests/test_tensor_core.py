"""Tensor primitive tests: loop oracles, finite differences, adjoint identities."""

import numpy as np
import pytest

import oracles
from stylegram import tensor_core as tc
from stylegram.errors import ShapeMismatchError


class TestConv2d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 5, 5))
        kernels = np.eye(3).reshape(3, 3, 1, 1)
        out = tc.conv2d(x, kernels, np.zeros(3))
        assert np.array_equal(out, x)

    def test_all_ones_summation(self):
        x = np.ones((1, 3, 3))
        kernels = np.ones((1, 1, 3, 3))
        out = tc.conv2d(x, kernels, np.zeros(1))
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 9.0

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 5, 5))
        kernels = rng.standard_normal((3, 2, 3, 3))
        bias = rng.standard_normal(3)
        expected = oracles.conv2d_loops(x, kernels, bias)
        assert np.allclose(tc.conv2d(x, kernels, bias), expected, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("stride", [1, 2])
    def test_same_padding_and_stride(self, stride):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 6, 7))
        kernels = rng.standard_normal((4, 2, 3, 3))
        bias = rng.standard_normal(4)
        out = tc.conv2d(x, kernels, bias, stride=stride, padding="same")
        expected = oracles.conv2d_loops(x, kernels, bias, stride=stride, pad=1)
        assert out.shape == expected.shape
        assert np.allclose(out, expected, atol=1e-12, rtol=0)

    def test_linearity(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 6, 6))
        y = rng.standard_normal((2, 6, 6))
        kernels = rng.standard_normal((3, 2, 3, 3))
        combined = tc.conv2d(2.5 * x - 1.25 * y, kernels)
        parts = 2.5 * tc.conv2d(x, kernels) - 1.25 * tc.conv2d(y, kernels)
        assert np.allclose(combined, parts, atol=1e-10, rtol=0)

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ShapeMismatchError):
            tc.conv2d(np.zeros((2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))

    def test_kernel_larger_than_input_rejected(self):
        with pytest.raises(ShapeMismatchError):
            tc.conv2d(np.zeros((1, 2, 2)), np.zeros((1, 1, 3, 3)), np.zeros(1))

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((3, 8, 8))
        kernels = rng.standard_normal((4, 3, 3, 3))
        bias = rng.standard_normal(4)
        first = tc.conv2d(x, kernels, bias, padding="same")
        second = tc.conv2d(x, kernels, bias, padding="same")
        assert np.array_equal(first, second)


class TestConv2dInputGrad:
    def test_zero_upstream(self):
        kernels = np.random.default_rng(0).standard_normal((2, 3, 3, 3))
        grad = tc.conv2d_input_grad(np.zeros((2, 4, 4)), kernels)
        assert grad.shape == (3, 6, 6)
        assert not grad.any()

    def test_identity_kernel_passes_gradient_through(self):
        upstream = np.random.default_rng(1).standard_normal((1, 5, 5))
        kernels = np.ones((1, 1, 1, 1))
        grad = tc.conv2d_input_grad(upstream, kernels)
        assert np.array_equal(grad, upstream)

    @pytest.mark.parametrize("stride,padding", [(1, "valid"), (1, "same"), (2, "same")])
    def test_matches_finite_differences(self, stride, padding):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((2, 6, 6))
        kernels = rng.standard_normal((3, 2, 3, 3))
        upstream = rng.standard_normal(
            tc.conv2d(x, kernels, stride=stride, padding=padding).shape
        )

        def loss(z):
            return float(np.sum(upstream * tc.conv2d(z, kernels, stride=stride, padding=padding)))

        fd = oracles.fd_gradient(loss, x, eps=1e-5)
        analytic = tc.conv2d_input_grad(upstream, kernels, stride=stride, padding=padding,
                                        input_hw=x.shape[1:])
        assert oracles.max_rel_err(analytic, fd) < 1e-6

    def test_adjoint_identity(self):
        # <conv(X), U> == <X, adjoint(U)>: the defining property of the adjoint.
        rng = np.random.default_rng(7)
        for _ in range(10):
            x = rng.standard_normal((2, 7, 6))
            kernels = rng.standard_normal((3, 2, 3, 3))
            u = rng.standard_normal(tc.conv2d(x, kernels).shape)
            lhs = np.vdot(tc.conv2d(x, kernels), u)
            rhs = np.vdot(x, tc.conv2d_input_grad(u, kernels, input_hw=x.shape[1:]))
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    def test_shape_mismatch_rejected(self):
        kernels = np.zeros((2, 1, 3, 3))
        with pytest.raises(ShapeMismatchError):
            tc.conv2d_input_grad(np.zeros((3, 4, 4)), kernels)


class TestXcorr:
    def test_full_ones_pair(self):
        plane = np.array([[1.0, 1.0]])
        assert np.array_equal(tc.full_xcorr(plane, plane), np.array([[1.0, 2.0, 1.0]]))

    def test_full_output_shape_8x8(self):
        plane = np.random.default_rng(8).standard_normal((8, 8))
        assert tc.full_xcorr(plane, plane).shape == (15, 15)

    def test_full_zero_plane(self):
        zero = np.zeros((4, 5))
        assert not tc.full_xcorr(zero, zero).any()

    def test_full_matches_loop_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            a = rng.standard_normal((4, 3))
            b = rng.standard_normal((4, 3))
            assert np.allclose(tc.full_xcorr(a, b), oracles.full_xcorr_loops(a, b),
                               atol=1e-12, rtol=0)

    def test_full_autocorr_centrally_symmetric(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            f = rng.standard_normal((5, 6))
            out = tc.full_xcorr(f, f)
            assert np.allclose(out, out[::-1, ::-1], atol=1e-10, rtol=0)
            assert np.isclose(out[4, 5], np.sum(f * f), atol=1e-10)

    def test_full_unequal_dims_rejected(self):
        with pytest.raises(ShapeMismatchError):
            tc.full_xcorr(np.zeros((3, 3)), np.zeros((3, 4)))

    def test_valid_equal_planes_dot_product(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((4, 4))
        out = tc.valid_xcorr(a, a)
        assert out.shape == (1, 1)
        assert np.isclose(out[0, 0], np.sum(a * a), atol=1e-12)

    def test_valid_feature_shaped_against_full_plane(self):
        big = np.random.default_rng(12).standard_normal((15, 15))
        small = np.random.default_rng(13).standard_normal((8, 8))
        assert tc.valid_xcorr(big, small).shape == (8, 8)

    def test_valid_matches_loop_oracle(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            big = rng.standard_normal((6, 7))
            small = rng.standard_normal((3, 2))
            assert np.allclose(tc.valid_xcorr(big, small),
                               oracles.valid_xcorr_loops(big, small), atol=1e-12, rtol=0)

    def test_valid_small_larger_than_big_rejected(self):
        with pytest.raises(ShapeMismatchError):
            tc.valid_xcorr(np.zeros((2, 2)), np.zeros((3, 3)))


class TestPool2d:
    def test_max_2x2(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out, _ = tc.pool2d(x, "max", 2, 2)
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 4.0

    def test_average_2x2(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out, _ = tc.pool2d(x, "average", 2, 2)
        assert out[0, 0, 0] == 2.5

    @pytest.mark.parametrize("mode", ["max", "average"])
    def test_matches_loop_oracle(self, mode):
        rng = np.random.default_rng(15)
        for _ in range(10):
            x = rng.standard_normal((3, 6, 8))
            out, _ = tc.pool2d(x, mode, 2, 2)
            assert np.allclose(out, oracles.pool2d_loops(x, mode, 2, 2), atol=1e-12, rtol=0)

    def test_average_adjoint_finite_differences(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((2, 6, 6))
        upstream = rng.standard_normal((2, 3, 3))

        def loss(z):
            return float(np.sum(upstream * tc.pool2d(z, "average", 2, 2)[0]))

        _, record = tc.pool2d(x, "average", 2, 2)
        analytic = tc.pool2d_grad(upstream, record)
        fd = oracles.fd_gradient(loss, x, eps=1e-5)
        assert oracles.max_rel_err(analytic, fd) < 1e-6

    def test_max_adjoint_routes_to_argmax(self):
        x = np.array([[[1.0, 2.0], [5.0, 4.0]]])
        _, record = tc.pool2d(x, "max", 2, 2)
        grad = tc.pool2d_grad(np.array([[[7.0]]]), record)
        assert np.array_equal(grad, np.array([[[0.0, 0.0], [7.0, 0.0]]]))

    def test_max_adjoint_overlapping_windows_accumulate(self):
        x = np.array([[[0.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]]])
        _, record = tc.pool2d(x, "max", 2, 1)
        grad = tc.pool2d_grad(np.ones((1, 2, 2)), record)
        # the 2.0 at (1,1) wins all four overlapping windows
        assert grad[0, 1, 1] == 4.0
        assert grad.sum() == 4.0

    def test_window_larger_than_input_rejected(self):
        with pytest.raises(ShapeMismatchError):
            tc.pool2d(np.zeros((1, 2, 2)), "max", 3, 1)


class TestRelu:
    def test_basic_values(self):
        x = np.array([[[-1.0, 0.0, 2.0]]])
        assert np.array_equal(tc.relu(x), np.array([[[0.0, 0.0, 2.0]]]))

    def test_adjoint_blocks_negative_inputs(self):
        upstream = np.array([[[5.0]]])
        assert tc.relu_grad(upstream, np.array([[[-1.0]]]))[0, 0, 0] == 0.0
        assert tc.relu_grad(upstream, np.array([[[1.0]]]))[0, 0, 0] == 5.0

    def test_matches_finite_differences_away_from_kink(self):
        rng = np.random.default_rng(17)
        x = rng.standard_normal((2, 5, 5))
        x[np.abs(x) < 1e-3] = 0.5  # keep clear of the nondifferentiable point
        upstream = rng.standard_normal(x.shape)

        def loss(z):
            return float(np.sum(upstream * tc.relu(z)))

        fd = oracles.fd_gradient(loss, x, eps=1e-5)
        assert oracles.max_rel_err(tc.relu_grad(upstream, x), fd) < 1e-6
