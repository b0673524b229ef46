"""Color statistics, adjustments, and CVD simulation."""

import numpy as np
import pytest

from vizlens.color import (
    LMS_TO_RGB,
    PROTANOPIA_PROJECTION,
    RGB_TO_LMS,
    Adjustment,
    CvdType,
    apply_adjustment,
    color_statistics,
    cvd_difference,
    linear_to_srgb,
    simulate_cvd,
    srgb_to_linear,
)
from vizlens.errors import DimensionMismatch, InvalidAmount
from vizlens.image import RasterImage


def solid(rgb, shape=(4, 4)) -> RasterImage:
    return RasterImage(np.tile(np.array([[rgb]], dtype=np.uint8), shape + (1,)))


class TestColorStatistics:
    def test_solid_color(self):
        stats = color_statistics(solid((255, 0, 0)))
        assert stats.dominant_colors == (((255, 0, 0), 1.0),)
        assert stats.mean_saturation == 1.0
        assert stats.mean_value == 1.0
        assert stats.distinct_quantized_colors == 1

    def test_checkerboard_partition(self):
        px = np.zeros((8, 8, 3), dtype=np.uint8)
        px[::2, 1::2] = 255
        px[1::2, ::2] = 255
        stats = color_statistics(RasterImage(px))
        assert stats.dominant_colors == (((0, 0, 0), 0.5), ((255, 255, 255), 0.5))
        assert stats.mean_saturation == 0.0

    def test_mid_gray_hsv(self):
        stats = color_statistics(solid((128, 128, 128)))
        assert stats.mean_saturation == 0.0
        assert stats.mean_value == pytest.approx(128 / 255, abs=1e-12)

    def test_fractions_sum_to_one(self, chart_image):
        stats = color_statistics(chart_image)
        assert sum(f for _, f in stats.dominant_colors) == pytest.approx(1.0, abs=1e-9)
        fractions = [f for _, f in stats.dominant_colors]
        assert fractions == sorted(fractions, reverse=True)
        assert len(stats.dominant_colors) <= 5

    def test_median_cut_is_deterministic(self, chart_image):
        a = color_statistics(chart_image)
        b = color_statistics(chart_image)
        assert a == b


class TestAdjustments:
    @pytest.mark.parametrize(
        "kind,amount",
        [("contrast", 1.0), ("saturate", 1.0), ("grayscale", 0.0), ("gamma", 1.0), ("blur", 0.0)],
    )
    def test_identity_amounts_are_pixel_identical(self, kind, amount):
        rng = np.random.default_rng(11)
        img = RasterImage(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
        out = apply_adjustment(img, Adjustment(kind, amount))
        assert np.array_equal(out.pixels, img.pixels)

    def test_grayscale_full_red(self):
        out = apply_adjustment(solid((255, 0, 0)), Adjustment("grayscale", 1.0))
        assert np.all(out.pixels == 54)

    def test_grayscale_output_is_gray(self):
        rng = np.random.default_rng(4)
        img = RasterImage(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
        out = apply_adjustment(img, Adjustment("grayscale", 1.0)).pixels
        assert np.array_equal(out[:, :, 0], out[:, :, 1])
        assert np.array_equal(out[:, :, 1], out[:, :, 2])

    @pytest.mark.parametrize("seed", range(5))
    def test_saturate_zero_matches_grayscale_one(self, seed):
        rng = np.random.default_rng(seed)
        img = RasterImage(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
        a = apply_adjustment(img, Adjustment("saturate", 0.0)).pixels.astype(int)
        b = apply_adjustment(img, Adjustment("grayscale", 1.0)).pixels.astype(int)
        assert np.abs(a - b).max() <= 1

    def test_contrast_pivots_at_mid(self):
        img = solid((128, 64, 192))
        out = apply_adjustment(img, Adjustment("contrast", 2.0)).pixels[0, 0]
        # x -> 2(x - 0.5) + 0.5 in [0,1] space, clamped
        assert out.tolist() == [round(min(max(2 * (v / 255 - 0.5) + 0.5, 0), 1) * 255) for v in (128, 64, 192)]

    def test_gamma_brightens(self):
        out = apply_adjustment(solid((64, 64, 64)), Adjustment("gamma", 2.2)).pixels[0, 0]
        expected = round(((64 / 255) ** (1 / 2.2)) * 255)
        assert abs(int(out[0]) - expected) <= 1

    def test_blur_flattens_edges(self):
        px = np.zeros((21, 21, 3), dtype=np.uint8)
        px[:, 10:] = 255
        out = apply_adjustment(RasterImage(px), Adjustment("blur", 2.0)).pixels
        edge = out[10, 8:12, 0].astype(int)
        assert np.all(np.diff(edge) > 0)  # smooth monotone ramp across the edge

    @pytest.mark.parametrize(
        "kind,amount",
        [("blur", -1.0), ("gamma", 0.0), ("gamma", -2.0), ("grayscale", 1.5), ("contrast", -0.1), ("saturate", -1.0), ("vignette", 1.0)],
    )
    def test_out_of_range_amounts_rejected(self, kind, amount):
        with pytest.raises(InvalidAmount):
            Adjustment(kind, amount)


class TestSrgbTransfer:
    def test_encode_matches_closed_form(self):
        y = np.linspace(0.0, 1.0, 100_001)
        formula = np.where(y <= 0.0031308, 12.92 * y, 1.055 * np.power(y, 1 / 2.4) - 0.055)
        expected = np.clip(np.rint(formula * 255.0), 0, 255).astype(np.uint8)
        assert np.array_equal(linear_to_srgb(y), expected)

    def test_round_trip_on_all_codes(self):
        codes = np.arange(256, dtype=np.uint8)
        assert np.array_equal(linear_to_srgb(srgb_to_linear(codes)), codes)


class TestSimulateCvd:
    def test_projection_matrices_preserve_white_by_hand(self):
        # The protanopia plane was built to contain the display white:
        # multiplying the published matrices by hand must return white's LMS.
        white_lms = RGB_TO_LMS @ np.ones(3)
        projected = PROTANOPIA_PROJECTION @ white_lms
        assert np.allclose(projected, white_lms, rtol=1e-4)
        assert np.allclose(LMS_TO_RGB @ white_lms, np.ones(3), atol=1e-9)

    @pytest.mark.parametrize("kind", list(CvdType))
    def test_achromatic_ramp_preserved(self, kind):
        ramp = np.stack([np.arange(256, dtype=np.uint8)] * 3, axis=1).reshape(1, 256, 3)
        out = simulate_cvd(RasterImage(ramp), kind)
        assert np.abs(out.pixels.astype(int) - ramp.astype(int)).max() <= 2

    def test_red_collapses_under_protanopia(self):
        out = simulate_cvd(solid((255, 0, 0)), "protanopia").pixels[0, 0]
        assert abs(int(out[0]) - int(out[1])) <= 8

    @pytest.mark.parametrize("kind", list(CvdType))
    def test_double_simulation_stable(self, kind):
        rng = np.random.default_rng(42)
        img = RasterImage(rng.integers(0, 256, (25, 40, 3), dtype=np.uint8))
        once = simulate_cvd(img, kind)
        twice = simulate_cvd(once, kind)
        assert np.abs(twice.pixels.astype(int) - once.pixels.astype(int)).max() <= 1

    def test_string_kind_accepted(self):
        assert simulate_cvd(solid((1, 2, 3)), "deuteranopia").pixels.shape == (4, 4, 3)


class TestCvdDifference:
    def test_identical_images_zero(self, chart_image):
        assert cvd_difference(chart_image, chart_image).values.max() == 0.0

    def test_black_white_extreme(self):
        hm = cvd_difference(solid((255, 255, 255)), solid((0, 0, 0)))
        assert hm.values[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_red_green_distance(self):
        hm = cvd_difference(solid((255, 0, 0)), solid((0, 255, 0)))
        assert hm.values[0, 0] == pytest.approx(np.sqrt(2) / np.sqrt(3), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cvd_difference(solid((0, 0, 0), (2, 2)), solid((0, 0, 0), (3, 3)))
