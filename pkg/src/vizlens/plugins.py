"""Filter registry and pipeline execution.

Built-in filters run in-process; external ones run as child processes or
HTTP endpoints behind a timeout, so a crashing or hanging plugin costs its
own section and nothing else. The default registry wires the built-in
filters to the canonical report sections; learned models (gaze predictors,
object detectors, OCR engines) attach as external plugins.

External wire protocol, process mode: the host writes one request frame
(4-byte big-endian length + PNG bytes of the chart) to the child's stdin
and reads one response frame (4-byte big-endian length + UTF-8 JSON
document) from its stdout. One request per process invocation.

Response document, both modes::

    {
      "status": "ok" | "error",
      "payload_kind": "heatmap" | "boxes" | "text_regions",
      "heatmap_png_b64": "...",          # payload_kind == heatmap
      "boxes": [{x, y, w, h, label, confidence}, ...],
      "text_regions": [{x, y, w, h, text, confidence}, ...],
      "error": "message"                 # status == error
    }

HTTP mode POSTs the PNG bytes (content type image/png) and expects the
same document back as application/json.
"""

from __future__ import annotations

import base64
import json
import os
import signal
import struct
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import httpx

from .color import Adjustment, CvdType, apply_adjustment, color_statistics, cvd_difference, simulate_cvd
from .errors import (
    DuplicateId,
    DuplicateSection,
    NoFiltersEnabled,
    PluginReportedError,
    PluginTimeout,
    ProtocolError,
    SpawnError,
)
from .image import GrayImage, RasterImage, decode_heatmap, encode_png, resize_heatmap, to_grayscale
from .saliency import EntropyConfig, spectral_residual_saliency, visual_entropy
from .sections import (
    CANONICAL_SECTIONS,
    SECTION_CUSTOM,
    STATUS_FAILED,
    STATUS_OK,
    STATUS_TIMEOUT,
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
from .textdetect import DEFAULT_MIN_TEXT_HEIGHT, TextRegion, detect_text_regions, legibility_flags

MIN_TIMEOUT_MS = 100
DEFAULT_TIMEOUT_MS = 30_000


@dataclass(frozen=True)
class ExternalSpec:
    """How to reach an external plugin: child process or HTTP endpoint."""

    command: tuple[str, ...] | None = None
    url: str | None = None

    def __post_init__(self) -> None:
        if bool(self.command) == bool(self.url):
            raise ValueError("exactly one of command/url must be set")


@dataclass(frozen=True)
class FilterDescriptor:
    id: str
    title: str
    section: str
    kind: str  # "builtin" | "external"
    external: ExternalSpec | None = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    enabled: bool = True
    run: Callable[["AnalysisContext"], Payload] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if (self.external is not None) != (self.kind == "external"):
            raise ValueError("external spec present iff kind is external")
        if self.kind == "builtin" and self.run is None:
            raise ValueError("builtin filters need a run callable")
        if self.timeout_ms < MIN_TIMEOUT_MS:
            raise ValueError(f"timeout_ms must be >= {MIN_TIMEOUT_MS}")


@dataclass
class AnalysisContext:
    """Shared per-run inputs handed to every builtin filter."""

    image: RasterImage
    gray: GrayImage
    entropy_config: EntropyConfig = field(default_factory=EntropyConfig)
    min_text_height: int = DEFAULT_MIN_TEXT_HEIGHT

    @classmethod
    def for_image(
        cls,
        image: RasterImage,
        entropy_config: EntropyConfig | None = None,
        min_text_height: int = DEFAULT_MIN_TEXT_HEIGHT,
    ) -> "AnalysisContext":
        return cls(
            image=image,
            gray=to_grayscale(image),
            entropy_config=entropy_config or EntropyConfig(),
            min_text_height=min_text_height,
        )


class FilterRegistry:
    """Ordered, id-unique collection of filter descriptors."""

    def __init__(self) -> None:
        self._filters: dict[str, FilterDescriptor] = {}

    def register(self, desc: FilterDescriptor) -> "FilterRegistry":
        if desc.id in self._filters:
            raise DuplicateId(desc.id)
        self._filters[desc.id] = desc
        return self

    def get(self, filter_id: str) -> FilterDescriptor:
        return self._filters[filter_id]

    def list_filters(self) -> list[FilterDescriptor]:
        return list(self._filters.values())

    def enabled(self) -> list[FilterDescriptor]:
        return [f for f in self._filters.values() if f.enabled]

    def set_enabled(self, filter_id: str, enabled: bool) -> None:
        self._filters[filter_id] = replace(self._filters[filter_id], enabled=enabled)


# ---------------------------------------------------------------------------
# Built-in filters


def _run_specs(ctx: AnalysisContext) -> Payload:
    img = ctx.image
    return SpecsPayload(
        width=img.width,
        height=img.height,
        format=img.source_format,
        file_size_bytes=img.source_bytes_len,
        color_stats=color_statistics(img),
    )


def _run_text(ctx: AnalysisContext) -> Payload:
    regions = detect_text_regions(ctx.gray)
    return TextRegionsPayload(
        regions=regions, warnings=legibility_flags(regions, ctx.min_text_height)
    )


def _run_entropy(ctx: AnalysisContext) -> Payload:
    return HeatmapPayload.from_heatmap(visual_entropy(ctx.gray, ctx.entropy_config))


def _run_spectral(ctx: AnalysisContext) -> Payload:
    return HeatmapPayload.from_heatmap(spectral_residual_saliency(ctx.image))


def _run_cvd(ctx: AnalysisContext) -> Payload:
    items: list[VariantItem] = []
    for kind in CvdType:
        simulated = simulate_cvd(ctx.image, kind)
        items.append(VariantItem(label=kind.value, kind="image", image=simulated))
        items.append(
            VariantItem(
                label=f"{kind.value}-risk",
                kind="heatmap",
                heatmap=cvd_difference(ctx.image, simulated),
            )
        )
    return VariantsPayload(items=items)


# Representative preview amounts for the adjustment suggestions section.
COLOR_SUGGESTION_PREVIEWS = (
    Adjustment("blur", 2.0),
    Adjustment("grayscale", 1.0),
    Adjustment("contrast", 1.5),
    Adjustment("saturate", 0.5),
    Adjustment("gamma", 2.2),
)


def _run_color_suggestions(ctx: AnalysisContext) -> Payload:
    items = [
        VariantItem(
            label=f"{adj.kind}-{adj.amount:g}",
            kind="image",
            image=apply_adjustment(ctx.image, adj),
        )
        for adj in COLOR_SUGGESTION_PREVIEWS
    ]
    return VariantsPayload(items=items)


BUILTIN_FILTERS = (
    FilterDescriptor(id="image-specs", title="Image specifications", section="specs", kind="builtin", run=_run_specs),
    FilterDescriptor(id="text-regions", title="Text legibility", section="text", kind="builtin", run=_run_text),
    FilterDescriptor(id="visual-entropy", title="Visual entropy", section="entropy", kind="builtin", run=_run_entropy),
    FilterDescriptor(id="spectral-saliency", title="Low-level salience", section="low_level_salience", kind="builtin", run=_run_spectral),
    FilterDescriptor(id="cvd-simulation", title="Color vision deficiency", section="cvd", kind="builtin", run=_run_cvd),
    FilterDescriptor(id="color-suggestions", title="Color suggestions", section="custom", kind="builtin", run=_run_color_suggestions, enabled=False),
)


def default_registry() -> FilterRegistry:
    """Registry with the built-in filters.

    Color suggestions start disabled so a plain run produces exactly the
    seven canonical sections; enable the filter to append it as a custom
    section.
    """
    registry = FilterRegistry()
    for desc in BUILTIN_FILTERS:
        registry.register(desc)
    return registry


# ---------------------------------------------------------------------------
# External plugin execution


def _write_frame(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def _read_frame(stream: bytes) -> bytes:
    if len(stream) < 4:
        raise ProtocolError("response shorter than the frame header")
    (length,) = struct.unpack(">I", stream[:4])
    body = stream[4 : 4 + length]
    if len(body) != length:
        raise ProtocolError(f"frame announces {length} bytes, got {len(body)}")
    return body


def run_external(spec: ExternalSpec, img: RasterImage, timeout_ms: int) -> Payload:
    """Send the image to an external plugin and decode its payload.

    Raises SpawnError, PluginTimeout, ProtocolError, or
    PluginReportedError; the pipeline maps these onto section statuses.
    """
    png = encode_png(img)
    timeout_s = timeout_ms / 1000.0
    if spec.command:
        document = _call_process(spec.command, png, timeout_s)
    else:
        document = _call_http(spec.url or "", png, timeout_s)
    return _decode_document(document, img)


def _call_process(command: tuple[str, ...], png: bytes, timeout_s: float) -> dict:
    try:
        proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
    except OSError as exc:
        raise SpawnError(str(exc)) from exc
    try:
        stdout, _ = proc.communicate(input=_write_frame(png), timeout=timeout_s)
    except subprocess.TimeoutExpired:
        _kill_process_tree(proc)
        raise PluginTimeout(f"no response within {timeout_s:.1f}s")
    body = _read_frame(stdout)
    try:
        document = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"response is not a JSON document: {exc}") from exc
    if not isinstance(document, dict):
        raise ProtocolError("response document must be a JSON object")
    return document


def _kill_process_tree(proc: subprocess.Popen) -> None:
    """Kill the plugin's whole session so no orphan survives a timeout."""
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError, OSError):
        proc.kill()
    try:
        proc.communicate(timeout=5)
    except subprocess.TimeoutExpired:  # pragma: no cover - kernel-level stall
        pass


def _call_http(url: str, png: bytes, timeout_s: float) -> dict:
    try:
        response = httpx.post(
            url,
            content=png,
            headers={"content-type": "image/png"},
            timeout=timeout_s,
        )
    except httpx.TimeoutException as exc:
        raise PluginTimeout(str(exc)) from exc
    except httpx.HTTPError as exc:
        raise SpawnError(f"endpoint unreachable: {exc}") from exc
    if response.status_code != 200:
        raise ProtocolError(f"endpoint answered HTTP {response.status_code}")
    try:
        document = response.json()
    except (json.JSONDecodeError, ValueError) as exc:
        raise ProtocolError(f"response is not a JSON document: {exc}") from exc
    if not isinstance(document, dict):
        raise ProtocolError("response document must be a JSON object")
    return document


def _decode_document(document: dict, img: RasterImage) -> Payload:
    status = document.get("status")
    if status == "error":
        raise PluginReportedError(str(document.get("error", "plugin reported an error")))
    if status != "ok":
        raise ProtocolError(f"unknown status {status!r}")
    kind = document.get("payload_kind")
    if kind == "heatmap":
        encoded = document.get("heatmap_png_b64")
        if not isinstance(encoded, str):
            raise ProtocolError("heatmap payload without heatmap_png_b64")
        try:
            hm = decode_heatmap(base64.b64decode(encoded, validate=True))
        except Exception as exc:
            raise ProtocolError(f"undecodable heatmap: {exc}") from exc
        # Learned models often answer at their own working resolution.
        return HeatmapPayload.from_heatmap(resize_heatmap(hm, img.width, img.height))
    if kind == "boxes":
        return ObjectBoxesPayload(boxes=[_decode_box(b, img) for b in _expect_list(document, "boxes")])
    if kind == "text_regions":
        return TextRegionsPayload(
            regions=[_decode_text_region(r, img) for r in _expect_list(document, "text_regions")]
        )
    raise ProtocolError(f"unknown payload_kind {kind!r}")


def _expect_list(document: dict, key: str) -> list:
    value = document.get(key)
    if not isinstance(value, list):
        raise ProtocolError(f"{key} must be a list")
    return value


def _clamp_bbox(entry: dict, img: RasterImage) -> tuple[int, int, int, int]:
    try:
        x, y, w, h = (int(entry[k]) for k in ("x", "y", "w", "h"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed bbox: {entry!r}") from exc
    x = min(max(x, 0), img.width - 1)
    y = min(max(y, 0), img.height - 1)
    w = max(1, min(w, img.width - x))
    h = max(1, min(h, img.height - y))
    return x, y, w, h


def _decode_box(entry: dict, img: RasterImage) -> ObjectBox:
    x, y, w, h = _clamp_bbox(entry, img)
    confidence = float(entry.get("confidence", 0.0))
    return ObjectBox(x=x, y=y, w=w, h=h, label=str(entry.get("label", "object")), confidence=min(max(confidence, 0.0), 1.0))


def _decode_text_region(entry: dict, img: RasterImage) -> TextRegion:
    x, y, w, h = _clamp_bbox(entry, img)
    confidence = float(entry.get("confidence", 0.0))
    text = entry.get("text")
    return TextRegion(
        x=x, y=y, w=w, h=h, est_height=h,
        confidence=min(max(confidence, 0.0), 1.0),
        text=str(text) if text is not None else None,
    )


# ---------------------------------------------------------------------------
# Pipeline


def run_pipeline(
    img: RasterImage,
    registry: FilterRegistry,
    context: AnalysisContext | None = None,
    workers: int = 4,
) -> list[SectionResult]:
    """Run every enabled filter and assemble the stable section list.

    Each enabled filter yields exactly one SectionResult; failures and
    timeouts are confined to their own section. Canonical sections with no
    enabled filter get an ``unavailable`` placeholder. Results come back
    in canonical order with custom sections appended in registration
    order, independent of execution interleaving.
    """
    enabled = registry.enabled()
    if not enabled:
        raise NoFiltersEnabled("no enabled filters in the registry")
    claimed: dict[str, str] = {}
    for desc in enabled:
        if desc.section in CANONICAL_SECTIONS:
            if desc.section in claimed:
                raise DuplicateSection(
                    f"{desc.id} and {claimed[desc.section]} both claim {desc.section}"
                )
            claimed[desc.section] = desc.id

    ctx = context or AnalysisContext.for_image(img)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {desc.id: pool.submit(_run_one, desc, ctx) for desc in enabled}
        outcomes = {fid: fut.result() for fid, fut in futures.items()}

    by_section = {registry.get(fid).section: res for fid, res in outcomes.items() if registry.get(fid).section in CANONICAL_SECTIONS}
    results = []
    for section in CANONICAL_SECTIONS:
        if section in by_section:
            results.append(by_section[section])
        else:
            results.append(
                SectionResult(filter_id=section, section=section, status=STATUS_UNAVAILABLE)
            )
    for desc in enabled:
        if desc.section not in CANONICAL_SECTIONS:
            results.append(outcomes[desc.id])
    return results


def _run_one(desc: FilterDescriptor, ctx: AnalysisContext) -> SectionResult:
    started = time.perf_counter()

    def elapsed() -> int:
        return int((time.perf_counter() - started) * 1000)

    try:
        if desc.kind == "builtin":
            payload = desc.run(ctx)  # type: ignore[misc]
        else:
            payload = run_external(desc.external, ctx.image, desc.timeout_ms)  # type: ignore[arg-type]
        return SectionResult(
            filter_id=desc.id, section=desc.section, status=STATUS_OK,
            elapsed_ms=elapsed(), payload=payload,
        )
    except PluginTimeout as exc:
        return SectionResult(
            filter_id=desc.id, section=desc.section, status=STATUS_TIMEOUT,
            elapsed_ms=elapsed(), error=str(exc),
        )
    except Exception as exc:
        return SectionResult(
            filter_id=desc.id, section=desc.section, status=STATUS_FAILED,
            elapsed_ms=elapsed(), error=f"{type(exc).__name__}: {exc}",
        )
