"""Report sections and the payload variants filters produce.

Every report carries the same seven canonical sections in a fixed order;
sections without an enabled filter appear as ``unavailable`` placeholders
so archived reports stay structurally comparable. Custom filters append
extra sections after the canonical ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .color import ColorStats
from .image import Heatmap, RasterImage
from .textdetect import LegibilityWarning, TextRegion

SECTION_SPECS = "specs"
SECTION_TEXT = "text"
SECTION_ENTROPY = "entropy"
SECTION_GAZE = "gaze"
SECTION_LOW_LEVEL = "low_level_salience"
SECTION_OBJECTS = "objects"
SECTION_CVD = "cvd"
SECTION_CUSTOM = "custom"

CANONICAL_SECTIONS = (
    SECTION_SPECS,
    SECTION_TEXT,
    SECTION_ENTROPY,
    SECTION_GAZE,
    SECTION_LOW_LEVEL,
    SECTION_OBJECTS,
    SECTION_CVD,
)
ALL_SECTIONS = CANONICAL_SECTIONS + (SECTION_CUSTOM,)

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_TIMEOUT = "timeout"
STATUS_UNAVAILABLE = "unavailable"


@dataclass(frozen=True)
class ObjectBox:
    """One detected real-world object (chart-junk candidate)."""

    x: int
    y: int
    w: int
    h: int
    label: str
    confidence: float

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


@dataclass
class HeatmapPayload:
    """A scalar field section; the raw map lives in the artifact store.

    ``heatmap`` is populated right after a pipeline run; reports loaded
    back from the store carry only ``artifact`` plus the summary stats.
    """

    heatmap: Heatmap | None = None
    artifact: str | None = None
    mean: float = 0.0
    peak: float = 0.0

    kind = "heatmap"

    @classmethod
    def from_heatmap(cls, hm: Heatmap) -> "HeatmapPayload":
        return cls(heatmap=hm, mean=float(hm.values.mean()), peak=float(hm.values.max()))


@dataclass
class VariantItem:
    """One labelled rendering inside a variants section."""

    label: str
    kind: str  # "image" | "heatmap"
    image: RasterImage | None = None
    heatmap: Heatmap | None = None
    artifact: str | None = None


@dataclass
class VariantsPayload:
    """Labelled image/heatmap renditions (CVD views, adjustment previews)."""

    items: list[VariantItem] = field(default_factory=list)

    kind = "variants"

    def find(self, label: str) -> VariantItem | None:
        for item in self.items:
            if item.label == label:
                return item
        return None


@dataclass
class TextRegionsPayload:
    regions: list[TextRegion] = field(default_factory=list)
    warnings: list[LegibilityWarning] = field(default_factory=list)

    kind = "text_regions"


@dataclass
class ObjectBoxesPayload:
    boxes: list[ObjectBox] = field(default_factory=list)

    kind = "boxes"


@dataclass
class SpecsPayload:
    """The chart's basic properties, shown first in every report."""

    width: int
    height: int
    format: str
    file_size_bytes: int
    color_stats: ColorStats

    kind = "specs"


Payload = HeatmapPayload | VariantsPayload | TextRegionsPayload | ObjectBoxesPayload | SpecsPayload


@dataclass
class SectionResult:
    """One filter's contribution to a report."""

    filter_id: str
    section: str
    status: str
    elapsed_ms: int = 0
    payload: Payload | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if (self.payload is None) != (self.status != STATUS_OK):
            raise ValueError("payload must be present exactly when status is ok")
        if self.elapsed_ms < 0:
            raise ValueError("elapsed_ms must be >= 0")
