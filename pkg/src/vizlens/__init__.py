"""vizlens: perceptual analysis engine and design lab for chart screenshots.

The package decomposes into pixel primitives (``image``), the built-in
perceptual filters (``saliency``, ``color``, ``textdetect``), the plugin
host (``plugins``), heatmap evaluation metrics (``metrics``), versioned
report storage (``report``, ``store``), and the two front doors
(``cli``, ``service``) driven by one shared ``engine``.
"""

from .color import Adjustment, ColorStats, CvdType, apply_adjustment, color_statistics, cvd_difference, simulate_cvd
from .image import (
    GrayImage,
    Heatmap,
    RasterImage,
    ResizePolicy,
    composite_overlay,
    encode_png,
    load_image,
    to_grayscale,
    validate_and_resize,
)
from .metrics import BinaryMask, ConfusionFractions, binarize, confusion, kl_divergence, precision_recall
from .plugins import AnalysisContext, ExternalSpec, FilterDescriptor, FilterRegistry, default_registry, run_external, run_pipeline
from .report import ComparisonDiff, Note, Report, build_report, compare_reports, content_hash
from .saliency import EntropyConfig, normalize_heatmap, spectral_residual_saliency, visual_entropy
from .sections import ObjectBox, SectionResult
from .store import ArchiveEntry, ReportStore
from .textdetect import LegibilityWarning, TextRegion, detect_text_regions, legibility_flags, merge_ocr_results

__version__ = "0.1.0"

__all__ = [
    "Adjustment",
    "AnalysisContext",
    "ArchiveEntry",
    "BinaryMask",
    "ColorStats",
    "ComparisonDiff",
    "ConfusionFractions",
    "CvdType",
    "EntropyConfig",
    "ExternalSpec",
    "FilterDescriptor",
    "FilterRegistry",
    "GrayImage",
    "Heatmap",
    "LegibilityWarning",
    "Note",
    "ObjectBox",
    "RasterImage",
    "Report",
    "ReportStore",
    "ResizePolicy",
    "SectionResult",
    "TextRegion",
    "apply_adjustment",
    "binarize",
    "build_report",
    "color_statistics",
    "compare_reports",
    "composite_overlay",
    "confusion",
    "content_hash",
    "cvd_difference",
    "default_registry",
    "detect_text_regions",
    "encode_png",
    "kl_divergence",
    "legibility_flags",
    "load_image",
    "merge_ocr_results",
    "normalize_heatmap",
    "precision_recall",
    "run_external",
    "run_pipeline",
    "simulate_cvd",
    "spectral_residual_saliency",
    "to_grayscale",
    "validate_and_resize",
    "visual_entropy",
]
