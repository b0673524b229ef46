"""Decode, validate, resize, and convert chart images.

Pixel conventions used throughout the package:

* ``RasterImage`` — sRGB, 8 bits per channel, shape ``(h, w, 3)`` uint8.
* ``GrayImage``   — Rec. 709 luminance, shape ``(h, w)`` uint8.
* ``Heatmap``     — scalar field in ``[0, 1]``, shape ``(h, w)`` float64.

All operations are pure functions over immutable inputs; arrays are never
mutated in place.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, UnsupportedFormat

# Rec. 709 luma weights; also used by the CSS-style color adjustments so
# grayscale conversion and saturate(0) stay mutually consistent.
LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"


@dataclass
class RasterImage:
    """Decoded sRGB image plus source metadata."""

    pixels: np.ndarray  # (h, w, 3) uint8
    source_format: str = "png"  # "png" | "jpeg"
    source_bytes_len: int = 0

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixel array, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class GrayImage:
    """Single-channel 8-bit luminance image."""

    values: np.ndarray  # (h, w) uint8

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.uint8)
        if self.values.ndim != 2:
            raise ValueError(f"expected (h, w) array, got {self.values.shape}")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass
class Heatmap:
    """Per-pixel scalar field in [0, 1] on the same grid as an image."""

    values: np.ndarray  # (h, w) float64

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"expected (h, w) array, got {self.values.shape}")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("heatmap values must lie in [0, 1]")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ResizePolicy:
    """Bounds applied to uploaded charts.

    Oversized images are downscaled to fit ``max_w`` x ``max_h``; images
    smaller than the ``warn_min`` bounds pass through with a warning.
    """

    max_w: int = 1000
    max_h: int = 1000
    warn_min_w: int = 400
    warn_min_h: int = 300

    def __post_init__(self) -> None:
        if self.max_w < self.warn_min_w or self.max_h < self.warn_min_h:
            raise ValueError("max bounds must not be below the warn minimums")


def load_image(data: bytes) -> RasterImage:
    """Decode PNG or JPEG bytes into an sRGB image.

    Alpha, when present, is composited over a white background (charts are
    typically drawn on white). Palette and grayscale sources are expanded
    to RGB.

    Raises:
        UnsupportedFormat: bytes are not a PNG/JPEG stream.
        DecodeError: the stream is recognized but corrupt.
    """
    if not data:
        raise UnsupportedFormat("empty input")
    if data.startswith(_PNG_MAGIC):
        fmt = "png"
    elif data.startswith(_JPEG_MAGIC):
        fmt = "jpeg"
    else:
        raise UnsupportedFormat("only PNG and JPEG input is supported")
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            rgb = _flatten_to_rgb(im)
    except UnidentifiedImageError as exc:
        raise DecodeError(str(exc)) from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"corrupt {fmt} stream: {exc}") from exc
    return RasterImage(pixels=rgb, source_format=fmt, source_bytes_len=len(data))


def _flatten_to_rgb(im: Image.Image) -> np.ndarray:
    """Convert any PIL mode to (h, w, 3) uint8, compositing alpha over white."""
    if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
        rgba = np.asarray(im.convert("RGBA"), dtype=np.float64)
        alpha = rgba[:, :, 3:4] / 255.0
        rgb = rgba[:, :, :3] * alpha + 255.0 * (1.0 - alpha)
        return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    return np.asarray(im.convert("RGB"), dtype=np.uint8)


def validate_and_resize(img: RasterImage, policy: ResizePolicy | None = None) -> tuple[RasterImage, list[str]]:
    """Fit an image inside the policy bounds, never upscaling.

    Returns the (possibly downscaled) image plus human-readable warnings
    for below-minimum inputs. Downscaling is bilinear and preserves aspect
    ratio within one pixel of rounding.
    """
    policy = policy or ResizePolicy()
    out = img
    if img.width > policy.max_w or img.height > policy.max_h:
        scale = min(policy.max_w / img.width, policy.max_h / img.height)
        new_w = max(1, round(img.width * scale))
        new_h = max(1, round(img.height * scale))
        out = resize_image(img, new_w, new_h)
    warnings: list[str] = []
    if out.width < policy.warn_min_w or out.height < policy.warn_min_h:
        warnings.append(
            f"image is {out.width}x{out.height}, below recommended "
            f"{policy.warn_min_w}x{policy.warn_min_h}"
        )
    return out, warnings


def resize_image(img: RasterImage, width: int, height: int) -> RasterImage:
    """Bilinear resample to an exact target size."""
    pil = Image.fromarray(img.pixels, mode="RGB").resize((width, height), Image.BILINEAR)
    return RasterImage(
        pixels=np.asarray(pil, dtype=np.uint8),
        source_format=img.source_format,
        source_bytes_len=img.source_bytes_len,
    )


def to_grayscale(img: RasterImage) -> GrayImage:
    """Rec. 709 luminance: round(0.2126 R + 0.7152 G + 0.0722 B)."""
    w = np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    luma = img.pixels.astype(np.float64) @ w
    return GrayImage(values=np.clip(np.rint(luma), 0, 255).astype(np.uint8))


# Blue -> red overlay ramp, 9 anchor colors interpolated linearly. Ordered
# by increasing perceived intensity so hot report regions read as red.
OVERLAY_COLORMAP_ANCHORS: tuple[tuple[int, int, int], ...] = (
    (0, 0, 143),
    (0, 64, 255),
    (0, 160, 255),
    (64, 224, 224),
    (128, 255, 128),
    (224, 224, 64),
    (255, 160, 0),
    (255, 64, 0),
    (200, 0, 0),
)


def colormap(values: np.ndarray) -> np.ndarray:
    """Map scalars in [0, 1] through the overlay ramp; returns float64 RGB."""
    anchors = np.asarray(OVERLAY_COLORMAP_ANCHORS, dtype=np.float64)
    pos = np.clip(values, 0.0, 1.0) * (len(anchors) - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, len(anchors) - 1)
    t = (pos - lo)[..., None]
    return anchors[lo] * (1.0 - t) + anchors[hi] * t


def composite_overlay(base: RasterImage, hm: Heatmap, opacity: float) -> RasterImage:
    """Alpha-blend a colormapped heatmap over a chart.

    ``opacity`` 0 returns the base image bit-identically; 1 replaces it
    with the colormapped heatmap.
    """
    if not 0.0 <= opacity <= 1.0:
        raise ValueError("opacity must lie in [0, 1]")
    if (hm.height, hm.width) != (base.height, base.width):
        raise DimensionMismatch(
            f"heatmap {hm.width}x{hm.height} vs image {base.width}x{base.height}"
        )
    if opacity == 0.0:
        return RasterImage(base.pixels.copy(), base.source_format, base.source_bytes_len)
    layer = colormap(hm.values)
    blended = (1.0 - opacity) * base.pixels.astype(np.float64) + opacity * layer
    return RasterImage(
        pixels=np.clip(np.rint(blended), 0, 255).astype(np.uint8),
        source_format=base.source_format,
        source_bytes_len=base.source_bytes_len,
    )


def blend_images(base: RasterImage, top: RasterImage, opacity: float) -> RasterImage:
    """Alpha-blend one image over another of the same size."""
    if not 0.0 <= opacity <= 1.0:
        raise ValueError("opacity must lie in [0, 1]")
    if (top.height, top.width) != (base.height, base.width):
        raise DimensionMismatch(
            f"layer {top.width}x{top.height} vs image {base.width}x{base.height}"
        )
    if opacity == 0.0:
        return RasterImage(base.pixels.copy(), base.source_format, base.source_bytes_len)
    blended = (1.0 - opacity) * base.pixels.astype(np.float64) + opacity * top.pixels.astype(np.float64)
    return RasterImage(
        pixels=np.clip(np.rint(blended), 0, 255).astype(np.uint8),
        source_format=base.source_format,
        source_bytes_len=base.source_bytes_len,
    )


def encode_png(img: RasterImage | Heatmap | GrayImage) -> bytes:
    """Encode to 8-bit non-interlaced PNG.

    Heatmaps are written as grayscale with values scaled by 255 and
    rounded. The encoding round-trips: decoding yields identical pixels.
    """
    if isinstance(img, RasterImage):
        pil = Image.fromarray(img.pixels, mode="RGB")
    elif isinstance(img, GrayImage):
        pil = Image.fromarray(img.values, mode="L")
    elif isinstance(img, Heatmap):
        gray = np.clip(np.rint(img.values * 255.0), 0, 255).astype(np.uint8)
        pil = Image.fromarray(gray, mode="L")
    else:
        raise TypeError(f"cannot encode {type(img).__name__}")
    buf = io.BytesIO()
    # Low compression level: report artifacts are written often and read
    # rarely; encode speed matters more than a few percent of disk.
    pil.save(buf, format="PNG", compress_level=2)
    return buf.getvalue()


def decode_heatmap(data: bytes) -> Heatmap:
    """Decode a PNG into a heatmap (luminance / 255)."""
    img = load_image(data)
    gray = to_grayscale(img)
    return Heatmap(values=gray.values.astype(np.float64) / 255.0)


def resize_heatmap(hm: Heatmap, width: int, height: int) -> Heatmap:
    """Bilinear resample of a scalar field to an exact target size."""
    from scipy import ndimage

    h, w = hm.values.shape
    if (h, w) == (height, width):
        return Heatmap(values=hm.values.copy())
    yy = (np.arange(height) + 0.5) * h / height - 0.5
    xx = (np.arange(width) + 0.5) * w / width - 0.5
    grid = np.meshgrid(np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1), indexing="ij")
    values = ndimage.map_coordinates(hm.values, grid, order=1, mode="nearest")
    return Heatmap(values=np.clip(values, 0.0, 1.0))
