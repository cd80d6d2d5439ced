import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srru import nn
from srru.nn import reference
from srru.validation import ShapeError

from conftest import max_rel_err, numeric_grad


def random_conv(in_ch, out_ch, kernel, rng, stride=1, padding=None):
    p = nn.conv_params(in_ch, out_ch, kernel, rng, stride=stride, padding=padding, dtype=np.float64)
    p.bias = rng.normal(size=out_ch)
    return p


def random_transposed(in_ch, out_ch, rng):
    w = rng.normal(size=(in_ch, out_ch, 4, 4))
    return nn.ConvParams(w, rng.normal(size=out_ch), stride=2, padding=1)


class TestConv2d:
    def test_zero_input_isolates_bias(self, rng):
        p = random_conv(1, 3, 3, rng)
        out = nn.conv2d(np.zeros((1, 1, 5, 5)), p)
        assert out.shape == (1, 3, 5, 5)
        for j in range(3):
            assert np.allclose(out[0, j], p.bias[j])

    def test_identity_kernel(self, rng):
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        p = nn.ConvParams(w, np.zeros(1), stride=1, padding=1)
        x = rng.normal(size=(1, 1, 5, 5))
        assert np.array_equal(nn.conv2d(x, p), x)

    def test_weight_gradient_matches_finite_differences(self, rng):
        x = rng.normal(size=(2, 4, 8, 8))
        p = random_conv(4, 3, 3, rng)
        grad_y = np.ones(nn.conv2d(x, p).shape)
        _, grad_w, grad_b = nn.conv2d_backward(grad_y, x, p)
        numeric_w = numeric_grad(lambda: nn.conv2d(x, p).sum(), p.weights)
        assert max_rel_err(grad_w, numeric_w) < 1e-5
        numeric_b = numeric_grad(lambda: nn.conv2d(x, p).sum(), p.bias)
        assert max_rel_err(grad_b, numeric_b) < 1e-5

    def test_input_gradient_matches_finite_differences(self, rng):
        x = rng.normal(size=(1, 2, 6, 6))
        p = random_conv(2, 2, 3, rng)
        grad_x, _, _ = nn.conv2d_backward(np.ones((1, 2, 6, 6)), x, p)
        numeric = numeric_grad(lambda: nn.conv2d(x, p).sum(), x)
        assert max_rel_err(grad_x, numeric) < 1e-5

    def test_matches_naive_reference(self, rng):
        for stride, padding in [(1, 1), (1, 0), (2, 1)]:
            x = rng.normal(size=(2, 3, 7, 6))
            p = random_conv(3, 4, 3, rng, stride=stride, padding=padding)
            fast = nn.conv2d(x, p)
            slow = reference.conv2d_naive(x, p)
            np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-12)

    def test_channel_mismatch_raises(self, rng):
        p = random_conv(3, 4, 3, rng)
        with pytest.raises(ShapeError, match="channels"):
            nn.conv2d(np.zeros((1, 2, 5, 5)), p)

    @given(h=st.integers(1, 12), w=st.integers(1, 12))
    @settings(max_examples=25, deadline=None)
    def test_k3_p1_s1_preserves_spatial_dims(self, h, w):
        p = nn.conv_params(2, 3, 3, rng=np.random.default_rng(0))
        out = nn.conv2d(np.zeros((1, 2, h, w), dtype=np.float32), p)
        assert out.shape == (1, 3, h, w)


class TestConvTranspose2d:
    def test_output_shape_doubles(self):
        p = nn.transposed_params(1, 1)
        out = nn.conv_transpose2d(np.zeros((1, 1, 4, 4), dtype=np.float32), p)
        assert out.shape == (1, 1, 8, 8)

    def test_bilinear_kernel_keeps_constant_interior(self):
        p = nn.transposed_params(1, 1, dtype=np.float64)
        c = 3.7
        out = nn.conv_transpose2d(np.full((1, 1, 4, 4), c), p)
        interior = out[0, 0, 1:-1, 1:-1]
        np.testing.assert_allclose(interior, c, rtol=1e-12)

    def test_bilinear_multichannel_partition(self):
        p = nn.transposed_params(6, 1, dtype=np.float64)
        out = nn.conv_transpose2d(np.full((1, 6, 5, 5), 2.0), p)
        np.testing.assert_allclose(out[0, 0, 1:-1, 1:-1], 2.0, rtol=1e-12)

    def test_gradients_match_finite_differences(self, rng):
        x = rng.normal(size=(1, 2, 4, 4))
        p = random_transposed(2, 1, rng)
        grad_y = np.ones(nn.conv_transpose2d(x, p).shape)
        grad_x, grad_w, grad_b = nn.conv_transpose2d_backward(grad_y, x, p)
        assert max_rel_err(grad_x, numeric_grad(lambda: nn.conv_transpose2d(x, p).sum(), x)) < 1e-5
        assert max_rel_err(grad_w, numeric_grad(lambda: nn.conv_transpose2d(x, p).sum(), p.weights)) < 1e-5
        assert max_rel_err(grad_b, numeric_grad(lambda: nn.conv_transpose2d(x, p).sum(), p.bias)) < 1e-5

    def test_matches_naive_reference(self, rng):
        x = rng.normal(size=(2, 3, 5, 4))
        p = random_transposed(3, 2, rng)
        np.testing.assert_allclose(
            nn.conv_transpose2d(x, p), reference.conv_transpose2d_naive(x, p), rtol=0, atol=1e-12
        )

    def test_adjoint_of_strided_conv(self, rng):
        # <T(x), y> == <x, C(y)> where C is the underlying stride-2 conv.
        p = random_transposed(3, 2, rng)
        p.bias[:] = 0.0
        x = rng.normal(size=(1, 3, 5, 5))
        y = rng.normal(size=(1, 2, 10, 10))
        lhs = float(np.sum(nn.conv_transpose2d(x, p) * y))
        conv_side = nn.ConvParams(p.weights, np.zeros(3), stride=2, padding=1)
        rhs = float(np.sum(x * nn.conv2d(y, conv_side)))
        assert abs(lhs - rhs) < 1e-10

    @given(h=st.integers(1, 9), w=st.integers(1, 9))
    @settings(max_examples=25, deadline=None)
    def test_output_dims_exactly_double(self, h, w):
        p = nn.transposed_params(2, 1)
        out = nn.conv_transpose2d(np.zeros((1, 2, h, w), dtype=np.float32), p)
        assert out.shape[2:] == (2 * h, 2 * w)


class TestPointwise:
    def test_lrelu_values(self):
        out = nn.lrelu(np.array([[[[-1.0, 0.0, 2.0]]]]), slope=0.2)
        np.testing.assert_allclose(out, [[[[-0.2, 0.0, 2.0]]]])

    def test_lrelu_identity_on_nonnegative(self, rng):
        x = np.abs(rng.normal(size=(2, 3, 4, 4)))
        assert np.array_equal(nn.lrelu(x, 0.2), x)

    def test_lrelu_slope_validated(self):
        with pytest.raises(ValueError):
            nn.lrelu(np.zeros((1, 1, 1, 1)), slope=1.5)

    def test_lrelu_gradient_away_from_kink(self, rng):
        x = rng.normal(size=(2, 2, 3, 3))
        x = np.where(np.abs(x) < 1e-3, 0.5, x)
        grad = nn.lrelu_backward(np.ones_like(x), x, 0.2)
        numeric = numeric_grad(lambda: nn.lrelu(x, 0.2).sum(), x)
        assert max_rel_err(grad, numeric) < 1e-6

    def test_sigmoid_center_and_saturation(self):
        assert nn.sigmoid(np.array(0.0)) == 0.5
        with np.errstate(over="raise"):
            vals = nn.sigmoid(np.array([-40.0, 40.0]))
        assert abs(vals[0] - 0.0) < 1e-15
        assert abs(vals[1] - 1.0) < 1e-15

    def test_sigmoid_outputs_strictly_inside_unit_interval(self, rng):
        x = rng.normal(scale=50, size=(4, 4, 4, 4))
        y = nn.sigmoid(x)
        assert np.all(y > 0.0) and np.all(y < 1.0)

    def test_sigmoid_gradient(self, rng):
        x = rng.normal(size=(2, 2, 3, 3))
        y = nn.sigmoid(x)
        grad = nn.sigmoid_backward(np.ones_like(x), y)
        numeric = numeric_grad(lambda: nn.sigmoid(x).sum(), x)
        assert max_rel_err(grad, numeric) < 1e-6


class TestPoolConcatScale:
    def test_pool_constant(self):
        out = nn.global_avg_pool(np.full((1, 2, 3, 5), 4.25))
        assert out.shape == (1, 2, 1, 1)
        np.testing.assert_array_equal(out, 4.25)

    def test_pool_arithmetic(self):
        out = nn.global_avg_pool(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
        assert out[0, 0, 0, 0] == 2.5

    def test_pool_gradient(self, rng):
        x = rng.normal(size=(2, 3, 4, 5))
        grad = nn.global_avg_pool_backward(np.ones((2, 3, 1, 1)), x.shape)
        numeric = numeric_grad(lambda: nn.global_avg_pool(x).sum(), x)
        assert max_rel_err(grad, numeric) < 1e-6

    def test_concat_widths(self, rng):
        a = rng.normal(size=(1, 64, 4, 4))
        b = rng.normal(size=(1, 64, 4, 4))
        assert nn.concat_channels(a, b).shape == (1, 128, 4, 4)
        a2 = rng.normal(size=(1, 128, 4, 4))
        b2 = rng.normal(size=(1, 128, 4, 4))
        assert nn.concat_channels(a2, b2).shape == (1, 256, 4, 4)

    def test_concat_slice_roundtrip_bit_exact(self, rng):
        a = rng.normal(size=(2, 3, 4, 4)).astype(np.float32)
        b = rng.normal(size=(2, 5, 4, 4)).astype(np.float32)
        cat = nn.concat_channels(a, b)
        ga, gb = nn.concat_channels_backward(cat, 3)
        assert np.array_equal(ga, a) and np.array_equal(gb, b)

    def test_concat_spatial_mismatch(self, rng):
        with pytest.raises(ShapeError):
            nn.concat_channels(np.zeros((1, 2, 4, 4)), np.zeros((1, 2, 5, 4)))

    def test_channel_scale_identity_and_half(self):
        x = np.full((1, 3, 2, 2), 4.0)
        ones = np.ones((1, 3, 1, 1))
        assert np.array_equal(nn.channel_scale(x, ones), x)
        halves = np.full((1, 3, 1, 1), 0.5)
        np.testing.assert_array_equal(nn.channel_scale(x, halves), 2.0)

    def test_channel_scale_gradients(self, rng):
        x = rng.normal(size=(2, 3, 4, 4))
        f = rng.normal(size=(2, 3, 1, 1))
        gx, gf = nn.channel_scale_backward(np.ones_like(x), x, f)
        assert max_rel_err(gx, numeric_grad(lambda: nn.channel_scale(x, f).sum(), x)) < 1e-5
        assert max_rel_err(gf, numeric_grad(lambda: nn.channel_scale(x, f).sum(), f)) < 1e-5

    def test_channel_scale_mismatch(self):
        with pytest.raises(ShapeError):
            nn.channel_scale(np.zeros((1, 3, 2, 2)), np.zeros((1, 2, 1, 1)))


class TestHeInit:
    def test_sample_std(self):
        w = nn.he_init((10000,), fan_in=576, rng=0)
        target = np.sqrt(2.0 / 576)
        assert abs(w.std() - target) / target < 0.05

    def test_deterministic(self):
        assert np.array_equal(nn.he_init((64, 3, 3, 3), 27, rng=7), nn.he_init((64, 3, 3, 3), 27, rng=7))

    def test_small_fan_in_formula(self):
        w = nn.he_init((10000,), fan_in=2, rng=3)
        assert abs(w.std() - 1.0) < 0.05


class TestAdjointProperty:
    """<L(x), y> == <x, L_backward_input(y)> for every linear layer."""

    def test_conv2d(self, rng):
        p = random_conv(3, 4, 3, rng)
        p.bias[:] = 0.0
        x = rng.normal(size=(2, 3, 6, 6))
        y = rng.normal(size=(2, 4, 6, 6))
        lhs = float(np.sum(nn.conv2d(x, p) * y))
        gx, _, _ = nn.conv2d_backward(y, x, p)
        rhs = float(np.sum(x * gx))
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_conv_transpose2d(self, rng):
        p = random_transposed(3, 2, rng)
        p.bias[:] = 0.0
        x = rng.normal(size=(1, 3, 4, 4))
        y = rng.normal(size=(1, 2, 8, 8))
        lhs = float(np.sum(nn.conv_transpose2d(x, p) * y))
        gx, _, _ = nn.conv_transpose2d_backward(y, x, p)
        rhs = float(np.sum(x * gx))
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_global_avg_pool(self, rng):
        x = rng.normal(size=(2, 3, 5, 5))
        y = rng.normal(size=(2, 3, 1, 1))
        lhs = float(np.sum(nn.global_avg_pool(x) * y))
        rhs = float(np.sum(x * nn.global_avg_pool_backward(y, x.shape)))
        assert abs(lhs - rhs) < 1e-10

    def test_single_precision_adjoint(self, rng):
        p = nn.conv_params(2, 2, 3, rng=np.random.default_rng(5), dtype=np.float32)
        x = rng.normal(size=(1, 2, 6, 6)).astype(np.float32)
        y = rng.normal(size=(1, 2, 6, 6)).astype(np.float32)
        lhs = float(np.sum(nn.conv2d(x, p) * y) - np.sum(p.bias[None, :, None, None] * y))
        gx, _, _ = nn.conv2d_backward(y, x, p)
        rhs = float(np.sum(x * gx))
        assert abs(lhs - rhs) < 1e-4 * max(1.0, abs(lhs))


def test_all_layer_outputs_finite(rng):
    x = rng.normal(size=(2, 4, 6, 6))
    p = random_conv(4, 4, 3, rng)
    for out in (
        nn.conv2d(x, p),
        nn.lrelu(x),
        nn.sigmoid(x),
        nn.global_avg_pool(x),
        nn.channel_scale(x, np.ones((2, 4, 1, 1))),
    ):
        assert np.all(np.isfinite(out))
