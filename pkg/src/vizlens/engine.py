"""One engine behind both the CLI and the HTTP service.

``Analyzer`` owns the store, the filter registry, and the policies; the
CLI's ``analyze`` and the service's ``/analyze`` endpoint run the exact
same code path, which is what keeps their reports payload-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import AppConfig, build_registry
from .errors import NotFound
from .image import (
    Heatmap,
    RasterImage,
    blend_images,
    composite_overlay,
    encode_png,
    load_image,
    validate_and_resize,
)
from .plugins import AnalysisContext, FilterRegistry, run_pipeline
from .report import Report, build_report
from .saliency import EntropyConfig
from .sections import (
    SECTION_SPECS,
    STATUS_OK,
    HeatmapPayload,
    SpecsPayload,
    VariantsPayload,
)
from .store import ReportStore


@dataclass
class Analyzer:
    config: AppConfig
    store: ReportStore = None  # type: ignore[assignment]
    registry: FilterRegistry = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.store is None:
            self.store = ReportStore(self.config.store_path)
        if self.registry is None:
            self.registry = build_registry(self.config)

    # -- ingest -------------------------------------------------------------

    def ingest(self, data: bytes) -> tuple[str, list[str]]:
        """Decode, validate/resize, and store a chart; returns (ref, warnings)."""
        img, warnings = self._prepare(data)
        ref = self.store.put_image(encode_png(img))
        return ref, warnings

    def _prepare(self, data: bytes) -> tuple[RasterImage, list[str]]:
        img = load_image(data)
        return validate_and_resize(img, self.config.resize)

    # -- analysis -----------------------------------------------------------

    def analyze_stored(
        self, image_ref: str, user_id: str, warnings: list[str] | None = None, now=None
    ) -> tuple[str, Report]:
        """Run the pipeline over a stored chart and archive the report."""
        img = load_image(self.store.get_image(image_ref))
        report = self._run(img, user_id, warnings or [], now)
        report_id = self.store.save_report(report)
        return report_id, report

    def analyze_bytes(self, data: bytes, user_id: str, now=None) -> tuple[str, Report]:
        """Ingest + analyze in one step (the CLI path)."""
        image_ref, warnings = self.ingest(data)
        img = load_image(self.store.get_image(image_ref))
        report = self._run(img, user_id, warnings, now)
        report_id = self.store.save_report(report)
        return report_id, report

    def _run(self, img: RasterImage, user_id: str, warnings: list[str], now) -> Report:
        ctx = AnalysisContext.for_image(
            img,
            entropy_config=EntropyConfig(window_radius=self.config.entropy_window_radius),
            min_text_height=self.config.min_text_height,
        )
        results = run_pipeline(img, self.registry, ctx, workers=self.config.pipeline_workers)
        specs = self._specs_from_results(results, img)
        report = build_report(img, specs, results, user_id, now)
        report.warnings.extend(warnings)
        return report

    @staticmethod
    def _specs_from_results(results, img: RasterImage) -> SpecsPayload:
        for result in results:
            if result.section == SECTION_SPECS and result.status == STATUS_OK:
                return result.payload  # type: ignore[return-value]
        # Specs filter disabled or failed; fall back to bare geometry.
        from .color import color_statistics

        return SpecsPayload(
            width=img.width,
            height=img.height,
            format=img.source_format,
            file_size_bytes=img.source_bytes_len,
            color_stats=color_statistics(img),
        )

    # -- overlays -----------------------------------------------------------

    def render_overlay(
        self, report: Report, section: str, opacity: float, variant: str | None = None
    ) -> bytes:
        """PNG of the chart with one section's layer composited over it.

        Heatmap sections blend through the colormap; variants sections
        (CVD and adjustment previews) blend the variant image, or its risk
        heatmap for heatmap-kind variants. Opacity 0 returns the stored
        chart bit-identically.
        """
        result = report.section(section)
        if result is None or result.status != STATUS_OK:
            raise NotFound(f"section {section} has no renderable payload")
        base = load_image(self.store.get_image(report.image_ref))

        payload = result.payload
        if isinstance(payload, HeatmapPayload):
            hm = payload.heatmap or self.store.load_heatmap(payload.artifact or "")
            return encode_png(composite_overlay(base, hm, opacity))
        if isinstance(payload, VariantsPayload):
            item = payload.find(variant) if variant else (payload.items[0] if payload.items else None)
            if item is None:
                raise NotFound(f"section {section} has no variant {variant!r}")
            if item.kind == "heatmap":
                hm = item.heatmap or self.store.load_heatmap(item.artifact or "")
                return encode_png(composite_overlay(base, hm, opacity))
            top = item.image or load_image(self.store.get_image(item.artifact or ""))
            return encode_png(blend_images(base, top, opacity))
        raise NotFound(f"section {section} is not overlayable")
