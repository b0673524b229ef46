"""Saliency-family filters: local visual entropy and spectral-residual saliency.

The entropy filter is the information-theoretic saliency proxy: pixels whose
values differ from their neighborhood carry more local information. The
spectral-residual filter is a classical frequency-domain saliency model used
as the built-in stand-in for learned gaze predictors, which attach through
the plugin host instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NonFiniteInput
from .image import GrayImage, Heatmap, RasterImage, resize_heatmap, resize_image, to_grayscale

SPECTRAL_WORKING_SIZE = 128  # longer side at which the residual is computed
SPECTRAL_SMOOTH_SIGMA = 3.0  # px at working scale


@dataclass(frozen=True)
class EntropyConfig:
    """Window geometry for the local-entropy filter.

    ``window_radius`` 4 gives the default 9x9 neighborhood; ``bins`` is
    pinned to 256 so every 8-bit value is its own histogram bin.
    """

    window_radius: int = 4
    bins: int = 256

    def __post_init__(self) -> None:
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.bins != 256:
            raise ValueError("bins is fixed at 256")


def _clipped_window_sums(integral: np.ndarray, radius: int) -> np.ndarray:
    """Per-pixel sum over the (2r+1)^2 window clipped at the borders.

    ``integral`` is zero-padded by one row/column at the top/left so the
    four-corner lookup needs no special cases.
    """
    h, w = integral.shape[0] - 1, integral.shape[1] - 1
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.maximum(ys - radius, 0)
    y1 = np.minimum(ys + radius + 1, h)
    x0 = np.maximum(xs - radius, 0)
    x1 = np.minimum(xs + radius + 1, w)
    return (
        integral[y1][:, x1]
        - integral[y0][:, x1]
        - integral[y1][:, x0]
        + integral[y0][:, x0]
    )


def visual_entropy(gray: GrayImage, cfg: EntropyConfig | None = None) -> Heatmap:
    """Local Shannon entropy (base 2) of the window histogram at each pixel.

    Windows are clipped at the image borders (no padding); each value is
    normalized by the maximum entropy achievable in its own clipped window,
    ``log2(min(bins, n))`` for a window of n pixels, so border pixels are
    comparable to interior ones and the output lies in [0, 1].
    """
    cfg = cfg or EntropyConfig()
    r = cfg.window_radius
    values = gray.values
    h, w = values.shape

    ys = np.arange(h)
    xs = np.arange(w)
    ny = np.minimum(ys + r, h - 1) - np.maximum(ys - r, 0) + 1
    nx = np.minimum(xs + r, w - 1) - np.maximum(xs - r, 0) + 1
    n = ny[:, None].astype(np.float64) * nx[None, :]

    # H = (n log2(n) - sum_b c_b log2(c_b)) / n; accumulate the sum one
    # present gray level at a time via an integral image of its indicator.
    # This grouping makes single-level windows exactly zero.
    max_count = int((2 * r + 1) ** 2)
    counts_range = np.arange(max_count + 1, dtype=np.float64)
    clog2c_table = np.zeros(max_count + 1, dtype=np.float64)
    clog2c_table[1:] = counts_range[1:] * np.log2(counts_range[1:])

    acc = np.zeros((h, w), dtype=np.float64)
    integral = np.zeros((h + 1, w + 1), dtype=np.int32)
    mask = np.empty((h, w), dtype=np.int32)
    for level in np.unique(values):
        mask[:] = values == level
        np.cumsum(mask, axis=0, out=integral[1:, 1:])
        np.cumsum(integral[1:, 1:], axis=1, out=integral[1:, 1:])
        counts = _clipped_window_sums(integral, r)
        acc += clog2c_table[counts]

    entropy = (n * np.log2(n) - acc) / n
    max_entropy = np.log2(np.minimum(float(cfg.bins), n))
    out = np.divide(entropy, max_entropy, out=np.zeros_like(entropy), where=max_entropy > 0)
    return Heatmap(values=np.clip(out, 0.0, 1.0))


def spectral_residual_saliency(img: RasterImage) -> Heatmap:
    """Classical spectral-residual saliency at a 128-px working scale.

    Steps: downscale so the longer side is 128 px (never upscale), convert
    to luminance, take the 2-D Fourier transform, subtract the 3x3
    box-filtered log-amplitude from the log-amplitude, invert with the
    original phase, square the magnitude, Gaussian-smooth (sigma 3 px at
    working scale), min-max normalize, and resample to the input size.
    """
    longer = max(img.width, img.height)
    if longer > SPECTRAL_WORKING_SIZE:
        scale = SPECTRAL_WORKING_SIZE / longer
        work = resize_image(img, max(1, round(img.width * scale)), max(1, round(img.height * scale)))
    else:
        work = img
    gray = to_grayscale(work).values.astype(np.float64)
    if gray.max() == gray.min():
        # No structure to whiten; the degenerate map is defined as zero.
        return Heatmap(values=np.zeros((img.height, img.width)))

    spectrum = np.fft.fft2(gray)
    amplitude = np.abs(spectrum)
    phase = np.angle(spectrum)
    # Floor the amplitude relative to its peak: synthetic charts hit exact
    # spectral nulls whose log would otherwise dominate the residual.
    floor = amplitude.max() * 1e-4
    log_amplitude = np.log(np.maximum(amplitude, floor if floor > 0 else 1e-12))
    residual = log_amplitude - ndimage.uniform_filter(log_amplitude, size=3, mode="nearest")
    recovered = np.fft.ifft2(np.exp(residual + 1j * phase))
    raw = np.abs(recovered) ** 2
    smooth = ndimage.gaussian_filter(raw, sigma=SPECTRAL_SMOOTH_SIGMA, mode="nearest")
    working_map = normalize_heatmap(smooth)

    return resize_heatmap(working_map, img.width, img.height)


def normalize_heatmap(raw: np.ndarray) -> Heatmap:
    """Min-max normalize a non-negative field to [0, 1]; flat fields map to 0."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise NonFiniteInput("field contains NaN or infinity")
    lo = float(raw.min())
    hi = float(raw.max())
    if hi == lo:
        return Heatmap(values=np.zeros_like(raw))
    return Heatmap(values=(raw - lo) / (hi - lo))
