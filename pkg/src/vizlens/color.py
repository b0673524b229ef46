"""Color statistics, CSS-semantics adjustments, and dichromat simulation.

The color-vision-deficiency pipeline runs sRGB -> linear RGB -> LMS cone
space -> dichromat projection -> back to sRGB. Protanopia and deuteranopia
use the single-plane projection of Vienot, Brettel & Mollon (1999);
tritanopia uses the two-plane construction of Brettel, Vienot & Mollon
(1997). All matrices are plain module constants so they can be checked by
hand or swapped for another published set.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, InvalidAmount
from .image import LUMA_WEIGHTS, Heatmap, RasterImage

MAX_DOMINANT_COLORS = 5

# Smith-Pokorny cone fundamentals for Rec. 709 primaries, linear RGB -> LMS.
RGB_TO_LMS = np.array(
    [
        [17.8824, 43.5161, 4.11935],
        [3.45565, 27.1554, 3.86714],
        [0.0299566, 0.184309, 1.46709],
    ]
)
LMS_TO_RGB = np.linalg.inv(RGB_TO_LMS)

# Single-plane projections (Vienot 1999): the missing cone response is
# reconstructed from the two remaining ones; the projection plane contains
# both the display white and the blue primary, so neutrals survive.
PROTANOPIA_PROJECTION = np.array(
    [
        [0.0, 2.02344, -2.52581],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]
)
DEUTERANOPIA_PROJECTION = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.494207, 0.0, 1.24827],
        [0.0, 0.0, 1.0],
    ]
)

# Brettel 1997 tritanopia: two half-planes hinged on the neutral axis,
# anchored at monochromatic 485 nm and 660 nm lights (LMS coordinates in
# the same fundamentals as RGB_TO_LMS, global scale is irrelevant).
TRITAN_ANCHOR_485 = np.array([0.1284, 0.2237, 0.3636])
TRITAN_ANCHOR_660 = np.array([0.0914, 0.007009, 0.0])
_LMS_WHITE = RGB_TO_LMS @ np.ones(3)
_TRITAN_PLANE_660 = np.cross(_LMS_WHITE, TRITAN_ANCHOR_660)
_TRITAN_PLANE_485 = np.cross(_LMS_WHITE, TRITAN_ANCHOR_485)
_TRITAN_INFLECTION = _LMS_WHITE[1] / _LMS_WHITE[0]


class CvdType(str, Enum):
    DEUTERANOPIA = "deuteranopia"
    PROTANOPIA = "protanopia"
    TRITANOPIA = "tritanopia"


ADJUSTMENT_KINDS = ("blur", "gamma", "grayscale", "contrast", "saturate")


@dataclass(frozen=True)
class Adjustment:
    """One CSS-style adjustment: kind plus its scalar amount.

    Ranges: blur sigma >= 0 px; gamma > 0; grayscale in [0, 1];
    contrast >= 0; saturate >= 0.
    """

    kind: str
    amount: float

    def __post_init__(self) -> None:
        if self.kind not in ADJUSTMENT_KINDS:
            raise InvalidAmount(f"unknown adjustment kind {self.kind!r}")
        a = self.amount
        ok = {
            "blur": a >= 0,
            "gamma": a > 0,
            "grayscale": 0 <= a <= 1,
            "contrast": a >= 0,
            "saturate": a >= 0,
        }[self.kind]
        if not (np.isfinite(a) and ok):
            raise InvalidAmount(f"{self.kind} amount {a} out of range")


@dataclass(frozen=True)
class ColorStats:
    """Dominant colors and HSV aggregates for one chart."""

    dominant_colors: tuple[tuple[tuple[int, int, int], float], ...]
    mean_saturation: float
    mean_value: float
    distinct_quantized_colors: int


def color_statistics(img: RasterImage) -> ColorStats:
    """Median-cut dominant colors plus exact HSV saturation/value means.

    The quantizer splits the color population into at most five boxes and
    reports each box's mean color with its pixel fraction, descending.
    Median-cut is deterministic, which the report golden tests rely on.
    """
    flat = img.pixels.reshape(-1, 3)
    # Row-wise unique via packed uint32 keys; orders of magnitude faster
    # than np.unique(axis=0) on megapixel inputs.
    packed = (
        flat[:, 0].astype(np.uint32) << 16
        | flat[:, 1].astype(np.uint32) << 8
        | flat[:, 2].astype(np.uint32)
    )
    keys, counts = np.unique(packed, return_counts=True)
    uniques = np.stack([(keys >> 16) & 0xFF, (keys >> 8) & 0xFF, keys & 0xFF], axis=1)
    total = float(flat.shape[0])

    boxes = _median_cut(uniques.astype(np.int64), counts, MAX_DOMINANT_COLORS)
    entries = []
    for colors, weights in boxes:
        mean = np.rint((colors * weights[:, None]).sum(axis=0) / weights.sum())
        rgb = tuple(int(v) for v in np.clip(mean, 0, 255))
        entries.append((rgb, float(weights.sum() / total)))
    entries.sort(key=lambda e: (-e[1], e[0]))

    mx = flat.max(axis=1).astype(np.float64)
    mn = flat.min(axis=1).astype(np.float64)
    sat = np.divide(mx - mn, mx, out=np.zeros_like(mx), where=mx > 0)
    quantized = np.unique((keys >> 4 & 0xF) | (keys >> 8 & 0xF0) | (keys >> 12 & 0xF00)).size
    return ColorStats(
        dominant_colors=tuple(entries),
        mean_saturation=float(sat.mean()),
        mean_value=float(mx.mean() / 255.0),
        distinct_quantized_colors=int(quantized),
    )


def _median_cut(
    colors: np.ndarray, counts: np.ndarray, max_boxes: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the (unique colors, counts) population into <= max_boxes boxes."""
    boxes = [(colors, counts)]
    while len(boxes) < max_boxes:
        spans = [b[0].max(axis=0) - b[0].min(axis=0) if len(b[0]) else np.zeros(3) for b in boxes]
        widest = [int(s.max()) for s in spans]
        # Split the box with the widest channel span; ties go to the more
        # populated box, then to the earlier one, keeping the result stable.
        order = sorted(
            range(len(boxes)),
            key=lambda i: (-widest[i], -int(boxes[i][1].sum()), i),
        )
        idx = order[0]
        if widest[idx] == 0:
            break
        cols, cnts = boxes.pop(idx)
        channel = int((cols.max(axis=0) - cols.min(axis=0)).argmax())
        sort = np.argsort(cols[:, channel], kind="stable")
        cols, cnts = cols[sort], cnts[sort]
        cum = np.cumsum(cnts)
        split = int(np.searchsorted(cum, cum[-1] / 2.0)) + 1
        split = min(max(split, 1), len(cols) - 1)
        boxes.insert(idx, (cols[split:], cnts[split:]))
        boxes.insert(idx, (cols[:split], cnts[:split]))
    return boxes


def apply_adjustment(img: RasterImage, adj: Adjustment) -> RasterImage:
    """Apply one CSS-compatible adjustment in 8-bit sRGB space.

    Identity amounts (blur 0, gamma 1, grayscale 0, contrast 1, saturate 1)
    return a pixel-identical copy.
    """
    identity = {"blur": 0.0, "gamma": 1.0, "grayscale": 0.0, "contrast": 1.0, "saturate": 1.0}
    if adj.amount == identity[adj.kind]:
        return RasterImage(img.pixels.copy(), img.source_format, img.source_bytes_len)

    x = img.pixels.astype(np.float64) / 255.0
    a = float(adj.amount)
    if adj.kind == "grayscale":
        luma = x @ np.asarray(LUMA_WEIGHTS)
        out = x + a * (luma[:, :, None] - x)
    elif adj.kind == "saturate":
        out = x @ _saturate_matrix(a).T
    elif adj.kind == "contrast":
        out = a * (x - 0.5) + 0.5
    elif adj.kind == "gamma":
        out = np.power(x, 1.0 / a)
    elif adj.kind == "blur":
        radius = int(np.ceil(3.0 * a))
        out = np.stack(
            [ndimage.gaussian_filter(x[:, :, c], sigma=a, radius=radius, mode="nearest") for c in range(3)],
            axis=2,
        )
    else:  # pragma: no cover - guarded by Adjustment validation
        raise InvalidAmount(adj.kind)
    pixels = np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)
    return RasterImage(pixels, img.source_format, img.source_bytes_len)


def _saturate_matrix(s: float) -> np.ndarray:
    """Standard color-matrix saturation (luma weights 0.213/0.715/0.072)."""
    r, g, b = 0.213, 0.715, 0.072
    return np.array(
        [
            [r + (1 - r) * s, g * (1 - s), b * (1 - s)],
            [r * (1 - s), g + (1 - g) * s, b * (1 - s)],
            [r * (1 - s), g * (1 - s), b + (1 - b) * s],
        ]
    )


def _srgb_decode_curve(x: np.ndarray) -> np.ndarray:
    """Standard sRGB electro-optical transfer on values in [0, 1]."""
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


# Bin edges at the linear values of half-integer sRGB codes: rounding the
# encoded value to the nearest integer is the same as bucketing the linear
# value between these edges, which turns encoding into a searchsorted.
_ENCODE_EDGES = _srgb_decode_curve((np.arange(255, dtype=np.float64) + 0.5) / 255.0)


def srgb_to_linear(pixels: np.ndarray) -> np.ndarray:
    """sRGB to linear RGB floats in [0, 1]; uint8 input goes via a table."""
    if pixels.dtype == np.uint8:
        return _srgb_tables()[0][pixels]
    return _srgb_decode_curve(np.asarray(pixels, dtype=np.float64) / 255.0)


def linear_to_srgb(linear: np.ndarray) -> np.ndarray:
    """Linear RGB floats to 8-bit sRGB with clamping (round to nearest)."""
    y = np.clip(linear, 0.0, 1.0)
    return np.searchsorted(_ENCODE_EDGES, y, side="left").astype(np.uint8)


# One 8-bit quantization step can move the reconstructed cone response by
# several output steps (the tritan 485nm plane reconstructs S from a near
# cancellation of L and M), so re-simulating an already-simulated image
# would wobble. Pixels that sit within the local quantization noise bound
# of their projection plane therefore pass through unchanged: they already
# depict their own simulation as precisely as 8-bit output allows.
_DEADBAND_SAFETY = 1.25
_SRGB_DECODE_TABLE = None
_SRGB_STEP_TABLE = None


def _srgb_tables() -> tuple[np.ndarray, np.ndarray]:
    global _SRGB_DECODE_TABLE, _SRGB_STEP_TABLE
    if _SRGB_DECODE_TABLE is None:
        decode = _srgb_decode_curve(np.arange(256, dtype=np.float64) / 255.0)
        up = np.empty(256)
        up[:-1] = decode[1:] - decode[:-1]
        up[-1] = 0.0
        down = np.empty(256)
        down[1:] = decode[1:] - decode[:-1]
        down[0] = 0.0
        _SRGB_DECODE_TABLE = decode
        _SRGB_STEP_TABLE = np.maximum(up, down)
    return _SRGB_DECODE_TABLE, _SRGB_STEP_TABLE


def _noise_bound_weights(axis: int, row: np.ndarray) -> np.ndarray:
    """|d(plane distance)/d(linear RGB)| for one reconstruction row."""
    return np.abs((np.eye(3)[axis] - row) @ RGB_TO_LMS)


def simulate_cvd(img: RasterImage, kind: CvdType | str) -> RasterImage:
    """Render the image as seen with one dichromatic deficiency.

    Repeated simulation is stable: a pixel within quantization noise of
    the dichromat surface is returned unchanged.
    """
    kind = CvdType(kind)
    lms = srgb_to_linear(img.pixels) @ RGB_TO_LMS.T
    _, steps = _srgb_tables()
    h = steps[img.pixels]  # per-channel linear step sizes, (h, w, 3)

    if kind is CvdType.TRITANOPIA:
        axis = 2
        l, m, s = lms[..., 0], lms[..., 1], lms[..., 2]
        ratio = np.divide(m, l, out=np.full_like(m, _TRITAN_INFLECTION), where=l != 0)
        use_660 = ratio < _TRITAN_INFLECTION
        a1, b1, c1 = _TRITAN_PLANE_660
        a2, b2, c2 = _TRITAN_PLANE_485
        target_660 = -(a1 * l + b1 * m) / c1
        target_485 = -(a2 * l + b2 * m) / c2
        target = np.where(use_660, target_660, target_485)
        w660 = _noise_bound_weights(2, np.array([-a1 / c1, -b1 / c1, 0.0]))
        w485 = _noise_bound_weights(2, np.array([-a2 / c2, -b2 / c2, 0.0]))
        near_660 = np.abs(s - target_660) <= h @ w660 * _DEADBAND_SAFETY
        near_485 = np.abs(s - target_485) <= h @ w485 * _DEADBAND_SAFETY
        # Rounding can flip a pixel across the half-plane boundary; when
        # the boundary test itself is within quantization noise, proximity
        # to either half-plane counts as already simulated.
        wb = np.abs((RGB_TO_LMS[1] - _TRITAN_INFLECTION * RGB_TO_LMS[0]))
        ambiguous = np.abs(m - _TRITAN_INFLECTION * l) <= h @ wb * _DEADBAND_SAFETY
        keep = np.where(use_660, near_660, near_485) | (ambiguous & (near_660 | near_485))
    else:
        if kind is CvdType.PROTANOPIA:
            axis, row = 0, PROTANOPIA_PROJECTION[0]
        else:
            axis, row = 1, DEUTERANOPIA_PROJECTION[1]
        target = lms @ row
        eta = h @ _noise_bound_weights(axis, row)
        keep = np.abs(lms[..., axis] - target) <= eta * _DEADBAND_SAFETY

    projected = lms.copy()
    projected[..., axis] = target
    linear = _desaturate_to_gamut(projected @ LMS_TO_RGB.T)
    out = np.where(keep[..., None], img.pixels, linear_to_srgb(linear))
    return RasterImage(out, img.source_format, img.source_bytes_len)


def _desaturate_to_gamut(linear: np.ndarray) -> np.ndarray:
    """Pull out-of-gamut linear RGB toward luminance-matched gray.

    Every projection plane contains the neutral axis, so moving toward
    gray keeps a simulated color on its plane; per-channel clamping would
    leave the plane and break re-simulation stability.
    """
    y = linear @ np.asarray(LUMA_WEIGHTS)
    g = np.clip(y, 0.0, 1.0)[..., None]
    d = linear - g
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(d > 1e-12, (1.0 - g) / d, np.inf)
        t_lo = np.where(d < -1e-12, -g / d, np.inf)
    t = np.minimum(np.minimum(t_hi, t_lo).min(axis=-1, keepdims=True), 1.0)
    t = np.maximum(t, 0.0)
    return g + t * d


def cvd_difference(original: RasterImage, simulated: RasterImage) -> Heatmap:
    """Per-pixel color shift caused by a simulation, as a [0, 1] heatmap.

    Distance is Euclidean in linear RGB divided by sqrt(3), so opposite
    cube corners map to 1. Not part of the classic CVD tooling; it exists
    to highlight regions most at risk of becoming indistinguishable.
    """
    if original.pixels.shape != simulated.pixels.shape:
        raise DimensionMismatch(
            f"{original.width}x{original.height} vs {simulated.width}x{simulated.height}"
        )
    a = srgb_to_linear(original.pixels)
    b = srgb_to_linear(simulated.pixels)
    dist = np.sqrt(((a - b) ** 2).sum(axis=2)) / np.sqrt(3.0)
    return Heatmap(values=np.clip(dist, 0.0, 1.0))
