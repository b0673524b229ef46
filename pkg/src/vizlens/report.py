"""Design reports: building, canonical JSON serialization, and comparison.

A report is the versioned output of one pipeline run over one chart. Its
JSON form is the stable interchange format (schema_version 1, JSON Schema
in ``vizlens/schemas/report-v1.json``); heavy pixel data (heatmaps, CVD
renderings) is stored as referenced PNG artifacts, never inline.
Serialization is canonical: the same report always produces the same
bytes, which versioning and the archive tests rely on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

from .errors import UnknownSection
from .image import Heatmap, RasterImage, encode_png
from .metrics import kl_divergence
from .sections import (
    CANONICAL_SECTIONS,
    STATUS_OK,
    STATUS_UNAVAILABLE,
    HeatmapPayload,
    ObjectBox,
    ObjectBoxesPayload,
    Payload,
    SectionResult,
    SpecsPayload,
    TextRegionsPayload,
    VariantItem,
    VariantsPayload,
)
from .color import ColorStats
from .textdetect import LegibilityWarning, TextRegion

SCHEMA_VERSION = 1


def content_hash(data: bytes) -> str:
    """SHA-256 hex digest; the identity of every stored blob."""
    return hashlib.sha256(data).hexdigest()


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


@dataclass(frozen=True)
class Note:
    note_id: str
    section: str
    text: str
    created_at: str


@dataclass
class Report:
    """Versioned bundle of section results, notes, and the image reference."""

    report_id: str
    user_id: str
    created_at: str  # ISO-8601 UTC
    image_ref: str
    image_specs: SpecsPayload
    sections: list[SectionResult]
    notes: list[Note] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def section(self, name: str) -> SectionResult | None:
        for result in self.sections:
            if result.section == name:
                return result
        return None

    def section_names(self) -> list[str]:
        return [result.section for result in self.sections]


def build_report(
    img: RasterImage,
    specs: SpecsPayload,
    section_results: list[SectionResult],
    user_id: str,
    now: str | datetime | None = None,
) -> Report:
    """Assemble a report in canonical section order with empty notes.

    Missing canonical sections are completed with unavailable
    placeholders, so every report exposes the same section set. The
    preliminary report_id is the content hash of the serialized document;
    the store prefixes a sequence number when the report is saved.
    """
    if now is None:
        created_at = utc_now_iso()
    elif isinstance(now, datetime):
        created_at = now.astimezone(timezone.utc).replace(microsecond=0).isoformat()
    else:
        created_at = now

    by_section: dict[str, SectionResult] = {}
    extras: list[SectionResult] = []
    for result in section_results:
        if result.section in CANONICAL_SECTIONS and result.section not in by_section:
            by_section[result.section] = result
        else:
            extras.append(result)
    ordered = [
        by_section.get(
            section,
            SectionResult(filter_id=section, section=section, status=STATUS_UNAVAILABLE),
        )
        for section in CANONICAL_SECTIONS
    ]
    ordered.extend(extras)

    report = Report(
        report_id="",
        user_id=user_id,
        created_at=created_at,
        image_ref=content_hash(encode_png(img)),
        image_specs=specs,
        sections=ordered,
    )
    digest = content_hash(serialize_report(report))
    return replace(report, report_id=digest[:16])


# ---------------------------------------------------------------------------
# Serialization


def serialize_report(report: Report) -> bytes:
    """Canonical JSON bytes of a report (artifact refs resolved first)."""
    doc, _ = report_to_doc(report)
    return document_bytes(doc)


def document_bytes(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def report_to_doc(report: Report) -> tuple[dict, dict[str, bytes]]:
    """JSON-ready document plus the PNG artifacts it references."""
    artifacts: dict[str, bytes] = {}
    sections = [_section_to_doc(s, artifacts) for s in report.sections]
    doc = {
        "schema_version": report.schema_version,
        "report_id": report.report_id,
        "user_id": report.user_id,
        "created_at": report.created_at,
        "image_ref": report.image_ref,
        "image_specs": _specs_to_doc(report.image_specs),
        "sections": sections,
        "notes": [
            {"note_id": n.note_id, "section": n.section, "text": n.text, "created_at": n.created_at}
            for n in report.notes
        ],
        "warnings": list(report.warnings),
    }
    return doc, artifacts


def _store_artifact(data_png: bytes, artifacts: dict[str, bytes]) -> str:
    ref = content_hash(data_png)
    artifacts[ref] = data_png
    return ref


def _section_to_doc(result: SectionResult, artifacts: dict[str, bytes]) -> dict:
    doc: dict = {
        "filter_id": result.filter_id,
        "section": result.section,
        "status": result.status,
        "elapsed_ms": result.elapsed_ms,
        "payload": _payload_to_doc(result.payload, artifacts),
    }
    if result.error is not None:
        doc["error"] = result.error
    return doc


def _payload_to_doc(payload: Payload | None, artifacts: dict[str, bytes]) -> dict | None:
    if payload is None:
        return None
    if isinstance(payload, SpecsPayload):
        return _specs_to_doc(payload)
    if isinstance(payload, HeatmapPayload):
        artifact = payload.artifact
        if payload.heatmap is not None:
            artifact = _store_artifact(encode_png(payload.heatmap), artifacts)
        return {"kind": "heatmap", "artifact": artifact, "mean": payload.mean, "peak": payload.peak}
    if isinstance(payload, VariantsPayload):
        items = []
        for item in payload.items:
            artifact = item.artifact
            data = None
            if item.kind == "image" and item.image is not None:
                data = encode_png(item.image)
            elif item.kind == "heatmap" and item.heatmap is not None:
                data = encode_png(item.heatmap)
            if data is not None:
                artifact = _store_artifact(data, artifacts)
            items.append({"label": item.label, "kind": item.kind, "artifact": artifact})
        return {"kind": "variants", "items": items}
    if isinstance(payload, TextRegionsPayload):
        regions = [_region_to_doc(r) for r in payload.regions]
        warnings = []
        for w in payload.warnings:
            try:
                index = payload.regions.index(w.region)
            except ValueError:
                index = -1
            warnings.append({"region_index": index, "reason": w.reason, "threshold": w.threshold})
        return {"kind": "text_regions", "regions": regions, "warnings": warnings}
    if isinstance(payload, ObjectBoxesPayload):
        return {
            "kind": "boxes",
            "boxes": [
                {"x": b.x, "y": b.y, "w": b.w, "h": b.h, "label": b.label, "confidence": b.confidence}
                for b in payload.boxes
            ],
        }
    raise TypeError(f"unknown payload type {type(payload).__name__}")


def _region_to_doc(r: TextRegion) -> dict:
    return {
        "x": r.x, "y": r.y, "w": r.w, "h": r.h,
        "est_height": r.est_height, "confidence": r.confidence, "text": r.text,
    }


def _specs_to_doc(specs: SpecsPayload) -> dict:
    stats = specs.color_stats
    return {
        "kind": "specs",
        "width": specs.width,
        "height": specs.height,
        "format": specs.format,
        "file_size_bytes": specs.file_size_bytes,
        "color_stats": {
            "dominant_colors": [
                {"rgb": list(rgb), "fraction": fraction}
                for rgb, fraction in stats.dominant_colors
            ],
            "mean_saturation": stats.mean_saturation,
            "mean_value": stats.mean_value,
            "distinct_quantized_colors": stats.distinct_quantized_colors,
        },
    }


# ---------------------------------------------------------------------------
# Deserialization


def report_from_doc(doc: dict) -> Report:
    return Report(
        report_id=doc["report_id"],
        user_id=doc["user_id"],
        created_at=doc["created_at"],
        image_ref=doc["image_ref"],
        image_specs=_specs_from_doc(doc["image_specs"]),
        sections=[_section_from_doc(s) for s in doc["sections"]],
        notes=[Note(**n) for n in doc["notes"]],
        warnings=list(doc["warnings"]),
        schema_version=doc["schema_version"],
    )


def _section_from_doc(doc: dict) -> SectionResult:
    return SectionResult(
        filter_id=doc["filter_id"],
        section=doc["section"],
        status=doc["status"],
        elapsed_ms=doc["elapsed_ms"],
        payload=_payload_from_doc(doc.get("payload")),
        error=doc.get("error"),
    )


def _payload_from_doc(doc: dict | None) -> Payload | None:
    if doc is None:
        return None
    kind = doc["kind"]
    if kind == "specs":
        return _specs_from_doc(doc)
    if kind == "heatmap":
        return HeatmapPayload(artifact=doc["artifact"], mean=doc["mean"], peak=doc["peak"])
    if kind == "variants":
        return VariantsPayload(
            items=[
                VariantItem(label=i["label"], kind=i["kind"], artifact=i["artifact"])
                for i in doc["items"]
            ]
        )
    if kind == "text_regions":
        regions = [_region_from_doc(r) for r in doc["regions"]]
        warnings = []
        for w in doc["warnings"]:
            index = w["region_index"]
            if 0 <= index < len(regions):
                warnings.append(
                    LegibilityWarning(region=regions[index], reason=w["reason"], threshold=w["threshold"])
                )
        return TextRegionsPayload(regions=regions, warnings=warnings)
    if kind == "boxes":
        return ObjectBoxesPayload(boxes=[ObjectBox(**b) for b in doc["boxes"]])
    raise ValueError(f"unknown payload kind {kind!r}")


def _region_from_doc(doc: dict) -> TextRegion:
    return TextRegion(
        x=doc["x"], y=doc["y"], w=doc["w"], h=doc["h"],
        est_height=doc["est_height"], confidence=doc["confidence"], text=doc.get("text"),
    )


def _specs_from_doc(doc: dict) -> SpecsPayload:
    stats = doc["color_stats"]
    return SpecsPayload(
        width=doc["width"],
        height=doc["height"],
        format=doc["format"],
        file_size_bytes=doc["file_size_bytes"],
        color_stats=ColorStats(
            dominant_colors=tuple(
                (tuple(int(v) for v in e["rgb"]), e["fraction"]) for e in stats["dominant_colors"]
            ),
            mean_saturation=stats["mean_saturation"],
            mean_value=stats["mean_value"],
            distinct_quantized_colors=stats["distinct_quantized_colors"],
        ),
    )


# ---------------------------------------------------------------------------
# Notes


def add_note_to_report(report: Report, section: str, text: str, now: str | None = None) -> Report:
    """Append one note; the section must exist in the report."""
    if report.section(section) is None:
        raise UnknownSection(section)
    note = Note(
        note_id=f"n{len(report.notes) + 1:03d}",
        section=section,
        text=text,
        created_at=now or utc_now_iso(),
    )
    return replace(report, notes=[*report.notes, note])


# ---------------------------------------------------------------------------
# Comparison

HEATMAP_SECTIONS = ("entropy", "gaze", "low_level_salience")


@dataclass(frozen=True)
class SectionComparison:
    section: str
    status_a: str
    status_b: str
    deltas: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ComparisonDiff:
    report_a: str
    report_b: str
    per_section: tuple[SectionComparison, ...]

    def to_doc(self) -> dict:
        return {
            "report_a": self.report_a,
            "report_b": self.report_b,
            "per_section": [
                {
                    "section": c.section,
                    "status_a": c.status_a,
                    "status_b": c.status_b,
                    "deltas": dict(sorted(c.deltas.items())),
                }
                for c in self.per_section
            ],
        }


def compare_reports(a: Report, b: Report, load_heatmap=None) -> ComparisonDiff:
    """Per-section scalar deltas between two reports (b minus a).

    ``load_heatmap`` maps an artifact ref to a Heatmap; when provided, KL
    divergence of b relative to a is included for heatmap sections that
    are ok on both sides. Sections not ok on either side keep their status
    pair and omit deltas.
    """
    names = list(dict.fromkeys(a.section_names() + b.section_names()))
    rows = []
    for name in names:
        sa, sb = a.section(name), b.section(name)
        status_a = sa.status if sa else "missing"
        status_b = sb.status if sb else "missing"
        deltas: dict[str, float] = {}
        if sa and sb and sa.status == STATUS_OK and sb.status == STATUS_OK:
            deltas = _section_deltas(name, sa, sb, load_heatmap)
        rows.append(SectionComparison(section=name, status_a=status_a, status_b=status_b, deltas=deltas))
    return ComparisonDiff(report_a=a.report_id, report_b=b.report_id, per_section=tuple(rows))


def _section_deltas(name: str, sa: SectionResult, sb: SectionResult, load_heatmap) -> dict[str, float]:
    pa, pb = sa.payload, sb.payload
    deltas: dict[str, float] = {}
    if isinstance(pa, HeatmapPayload) and isinstance(pb, HeatmapPayload):
        deltas["mean_delta"] = pb.mean - pa.mean
        hm_a = pa.heatmap or (load_heatmap(pa.artifact) if load_heatmap and pa.artifact else None)
        hm_b = pb.heatmap or (load_heatmap(pb.artifact) if load_heatmap and pb.artifact else None)
        if hm_a is not None and hm_b is not None:
            try:
                deltas["kl_b_vs_a"] = kl_divergence(hm_b, hm_a)
            except Exception:
                pass  # degenerate all-zero maps carry no comparable signal
    elif isinstance(pa, TextRegionsPayload) and isinstance(pb, TextRegionsPayload):
        deltas["region_count_delta"] = float(len(pb.regions) - len(pa.regions))
        deltas["warning_count_delta"] = float(len(pb.warnings) - len(pa.warnings))
    elif isinstance(pa, SpecsPayload) and isinstance(pb, SpecsPayload):
        set_a = {tuple(v >> 4 for v in rgb) for rgb, _ in pa.color_stats.dominant_colors}
        set_b = {tuple(v >> 4 for v in rgb) for rgb, _ in pb.color_stats.dominant_colors}
        deltas["dominant_color_symmetric_diff"] = float(len(set_a ^ set_b))
    elif isinstance(pa, ObjectBoxesPayload) and isinstance(pb, ObjectBoxesPayload):
        deltas["box_count_delta"] = float(len(pb.boxes) - len(pa.boxes))
    return deltas
