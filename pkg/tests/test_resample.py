import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from srru.metrics import psnr_y
from srru.resample import (
    bicubic_resize,
    bicubic_upscale_x2,
    bicubic_upscale_x2_adjoint,
    cubic_kernel,
    modcrop,
    quantize_u8,
    rgb_to_ycbcr,
    ycbcr_to_rgb,
)
from srru.resample_reference import bicubic_resize_reference
from srru.validation import ShapeError


def natural_like(rng, h=64, w=64):
    """Smooth random field with edges, loosely natural statistics."""
    img = rng.normal(size=(h, w))
    for _ in range(3):
        img = 0.25 * (np.roll(img, 1, 0) + np.roll(img, -1, 0) + np.roll(img, 1, 1) + np.roll(img, -1, 1))
    img = (img - img.min()) / (img.max() - img.min())
    img[h // 3:, : w // 2] += 0.4
    return np.clip(img * 220 + 10, 0, 255)


class TestKernel:
    def test_support_and_center(self):
        assert cubic_kernel(np.array(0.0)) == 1.0
        assert cubic_kernel(np.array(1.0)) == 0.0
        assert cubic_kernel(np.array(2.0)) == 0.0
        assert cubic_kernel(np.array(2.5)) == 0.0

    def test_interpolating_at_integers(self):
        # Partition of unity on the integer grid.
        x = np.linspace(-0.5, 0.5, 11)
        total = sum(cubic_kernel(x - k) for k in range(-2, 3))
        np.testing.assert_allclose(total, 1.0, atol=1e-12)


class TestResize:
    @pytest.mark.parametrize("scale", [0.5, 0.75, 1.5, 2.0, 4.0])
    def test_constant_preserved(self, scale):
        img = np.full((12, 16), 3.25)
        out = bicubic_resize(img, scale)
        np.testing.assert_allclose(out, 3.25, atol=1e-12)
        assert abs(out.mean() - 3.25) < 1e-12

    def test_scale_one_is_identity(self, rng):
        img = rng.uniform(0, 255, (9, 7))
        assert np.array_equal(bicubic_resize(img, 1.0), img)

    def test_output_dims_round(self):
        assert bicubic_resize(np.zeros((10, 10)), 0.5).shape == (5, 5)
        assert bicubic_resize(np.zeros((7, 9)), 2.0).shape == (14, 18)
        assert bicubic_resize(np.zeros((10, 10)), 0.9).shape == (9, 9)

    def test_zero_output_rejected(self):
        with pytest.raises((ShapeError, ValueError)):
            bicubic_resize(np.zeros((3, 3)), 0.01)

    def test_linearity(self, rng):
        a, b = 1.7, -0.6
        x = rng.uniform(0, 255, (16, 16))
        y = rng.uniform(0, 255, (16, 16))
        lhs = bicubic_resize(a * x + b * y, 0.5)
        rhs = a * bicubic_resize(x, 0.5) + b * bicubic_resize(y, 0.5)
        np.testing.assert_allclose(lhs, rhs, atol=1e-6)

    def test_linear_ramp_reproduced_in_interior(self):
        ramp = np.tile(np.arange(32, dtype=np.float64), (8, 1))
        up = bicubic_resize(ramp, 2.0, antialias=False)
        cols = np.arange(1, 65, dtype=np.float64)
        expected = cols / 2.0 + 0.5 * (1 - 0.5) - 1.0
        np.testing.assert_allclose(up[4, 4:-4], expected[4:-4], atol=1e-12)

    def test_flip_equivariance(self, rng):
        img = natural_like(rng, 32, 48)
        for scale in (0.5, 2.0):
            a = bicubic_resize(np.fliplr(img), scale)
            b = np.fliplr(bicubic_resize(img, scale))
            np.testing.assert_allclose(a, b, atol=1e-9)

    def test_matches_scalar_reference(self, rng):
        img = rng.uniform(0, 255, (14, 11))
        for scale, aa in [(0.5, True), (0.5, False), (2.0, False), (0.7, True), (1.3, False)]:
            fast = bicubic_resize(img, scale, antialias=aa)
            slow = bicubic_resize_reference(img, scale, antialias=aa)
            np.testing.assert_allclose(fast, slow, atol=1e-9)

    def test_down_up_psnr_matches_reference_resampler(self, rng):
        img = quantize_u8(natural_like(rng, 48, 48))
        fast = bicubic_resize(bicubic_resize(img, 0.5, True), 2.0, False)
        slow = bicubic_resize_reference(bicubic_resize_reference(img, 0.5, True), 2.0, False)
        p_fast = psnr_y(img, fast, shave=2)
        p_slow = psnr_y(img, slow, shave=2)
        assert abs(p_fast - p_slow) < 0.01

    def test_overshoot_allowed_but_monotone_bounded(self):
        # A hard step overshoots (no internal clamping) ...
        step = np.zeros((12, 12))
        step[:, 6:] = 200.0
        up = bicubic_resize(step, 2.0, antialias=False)
        assert up.max() > 200.0 and up.min() < 0.0
        # ... while the interior of a monotone ramp stays within its range
        # (borders may ring against the replicated edge pixels).
        ramp = np.tile(np.linspace(10, 240, 16), (8, 1))
        up_ramp = bicubic_resize(ramp, 2.0, antialias=False)[:, 4:-4]
        assert up_ramp.max() <= 240.0 + 1e-9 and up_ramp.min() >= 10.0 - 1e-9

    def test_agrees_loosely_with_pillow(self, rng):
        # Coarse independent cross-check: Pillow shares the kernel and the
        # centered mapping but computes in float32, so agreement is loose.
        img = natural_like(rng, 64, 64)
        mine = bicubic_resize(img, 0.5, antialias=True)
        pil = np.asarray(Image.fromarray(img).resize((32, 32), Image.BICUBIC))
        assert np.mean(np.abs(mine - pil)) < 0.5
        mine_up = bicubic_resize(img, 2.0, antialias=False)
        pil_up = np.asarray(Image.fromarray(img).resize((128, 128), Image.BICUBIC))
        assert np.mean(np.abs(mine_up - pil_up)) < 0.5

    @given(scale=st.sampled_from([0.5, 0.6, 1.0, 2.0]), h=st.integers(4, 20))
    @settings(max_examples=15, deadline=None)
    def test_mean_of_constant_preserved(self, scale, h):
        out = bicubic_resize(np.full((h, h), 7.0), scale)
        assert abs(out.mean() - 7.0) < 1e-10


class TestTensorUpscale:
    def test_matches_plane_resize(self, rng):
        x = rng.uniform(0, 1, (2, 1, 6, 7))
        up = bicubic_upscale_x2(x)
        for b in range(2):
            np.testing.assert_allclose(up[b, 0], bicubic_resize(x[b, 0], 2.0, False), atol=1e-12)

    def test_preserves_dtype(self):
        x = np.zeros((1, 1, 4, 4), dtype=np.float32)
        assert bicubic_upscale_x2(x).dtype == np.float32

    def test_adjoint_identity(self, rng):
        x = rng.normal(size=(1, 1, 5, 6))
        y = rng.normal(size=(1, 1, 10, 12))
        lhs = float(np.sum(bicubic_upscale_x2(x) * y))
        rhs = float(np.sum(x * bicubic_upscale_x2_adjoint(y, (5, 6))))
        assert abs(lhs - rhs) < 1e-10


class TestColor:
    def test_white_and_black_studio_swing(self):
        white = np.full((2, 2, 3), 255, dtype=np.uint8)
        black = np.zeros((2, 2, 3), dtype=np.uint8)
        y_w, cb_w, cr_w = rgb_to_ycbcr(white)
        y_b, _, _ = rgb_to_ycbcr(black)
        np.testing.assert_allclose(y_w, 235.0, atol=1e-10)
        np.testing.assert_allclose(y_b, 16.0, atol=1e-10)
        np.testing.assert_allclose(cb_w, 128.0, atol=1e-10)
        np.testing.assert_allclose(cr_w, 128.0, atol=1e-10)

    def test_round_trip_within_one_level(self, rng):
        img = rng.integers(0, 256, size=(64, 64, 3)).astype(np.uint8)
        y, cb, cr = rgb_to_ycbcr(img)
        back = np.round(ycbcr_to_rgb(y, cb, cr))
        assert np.max(np.abs(back - img.astype(np.float64))) <= 1.0

    def test_inverse_is_exact_on_floats(self, rng):
        img = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
        y, cb, cr = rgb_to_ycbcr(img)
        back = ycbcr_to_rgb(y, cb, cr)
        np.testing.assert_allclose(back, img.astype(np.float64), atol=1e-9)

    def test_shape_validation(self):
        with pytest.raises(ShapeError):
            rgb_to_ycbcr(np.zeros((4, 4)))


class TestHelpers:
    def test_modcrop(self):
        assert modcrop(np.zeros((13, 10)), 4).shape == (12, 8)
        assert modcrop(np.zeros((8, 8)), 2).shape == (8, 8)

    def test_quantize(self):
        out = quantize_u8(np.array([[-3.0, 12.4, 12.6, 300.0]]))
        np.testing.assert_array_equal(out, [[0.0, 12.0, 13.0, 255.0]])
