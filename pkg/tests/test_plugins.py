"""Registry semantics, external protocol, and pipeline fault isolation."""

import http.server
import json
import sys
import threading
import time

import numpy as np
import pytest

from vizlens.errors import (
    DuplicateId,
    DuplicateSection,
    NoFiltersEnabled,
    PluginReportedError,
    PluginTimeout,
    ProtocolError,
    SpawnError,
)
from vizlens.image import RasterImage
from vizlens.plugins import (
    AnalysisContext,
    ExternalSpec,
    FilterDescriptor,
    FilterRegistry,
    default_registry,
    run_external,
    run_pipeline,
)
from vizlens.sections import (
    CANONICAL_SECTIONS,
    STATUS_OK,
    STATUS_TIMEOUT,
    STATUS_UNAVAILABLE,
    HeatmapPayload,
    ObjectBoxesPayload,
    TextRegionsPayload,
)


def stub_command(*args: str) -> tuple[str, ...]:
    return (sys.executable, "-m", "vizlens.stub_plugin", *args)


@pytest.fixture
def image() -> RasterImage:
    px = np.full((60, 80, 3), 255, dtype=np.uint8)
    px[10:50, 10:30] = (200, 60, 60)
    return RasterImage(px, "png", 100)


class TestRegistry:
    def test_register_and_list(self):
        registry = default_registry()
        ids = [f.id for f in registry.list_filters()]
        assert "visual-entropy" in ids
        assert registry.get("visual-entropy").section == "entropy"

    def test_duplicate_id_rejected(self):
        registry = default_registry()
        with pytest.raises(DuplicateId):
            registry.register(
                FilterDescriptor(id="visual-entropy", title="again", section="custom",
                                 kind="external", external=ExternalSpec(command=("true",)))
            )

    def test_descriptor_round_trip(self):
        registry = FilterRegistry()
        desc = FilterDescriptor(
            id="gaze-plugin", title="Gaze", section="gaze", kind="external",
            external=ExternalSpec(command=("echo",)), timeout_ms=5000,
        )
        registry.register(desc)
        assert registry.get("gaze-plugin").timeout_ms == 5000

    def test_descriptor_validation(self):
        with pytest.raises(ValueError):
            FilterDescriptor(id="x", title="x", section="gaze", kind="external")  # no spec
        with pytest.raises(ValueError):
            FilterDescriptor(id="x", title="x", section="gaze", kind="builtin")  # no run
        with pytest.raises(ValueError):
            FilterDescriptor(id="x", title="x", section="gaze", kind="external",
                             external=ExternalSpec(command=("a",)), timeout_ms=10)
        with pytest.raises(ValueError):
            ExternalSpec()
        with pytest.raises(ValueError):
            ExternalSpec(command=("a",), url="http://x")


class TestPipeline:
    def test_builtins_only_produces_stable_section_set(self, image):
        results = run_pipeline(image, default_registry())
        assert [r.section for r in results] == list(CANONICAL_SECTIONS)
        by_section = {r.section: r for r in results}
        assert by_section["gaze"].status == STATUS_UNAVAILABLE
        assert by_section["objects"].status == STATUS_UNAVAILABLE
        for name in ("specs", "text", "entropy", "low_level_salience", "cvd"):
            assert by_section[name].status == STATUS_OK
            assert by_section[name].payload is not None

    def test_all_disabled_raises(self, image):
        registry = default_registry()
        for desc in registry.list_filters():
            registry.set_enabled(desc.id, False)
        with pytest.raises(NoFiltersEnabled):
            run_pipeline(image, registry)

    def test_two_enabled_filters_on_one_section_rejected(self, image):
        registry = default_registry()
        registry.register(
            FilterDescriptor(id="neural-salience", title="x", section="low_level_salience",
                             kind="external", external=ExternalSpec(command=("true",)))
        )
        with pytest.raises(DuplicateSection):
            run_pipeline(image, registry)

    def test_plugin_replaces_builtin_when_builtin_disabled(self, image):
        registry = default_registry()
        registry.set_enabled("spectral-saliency", False)
        registry.register(
            FilterDescriptor(id="neural-salience", title="x", section="low_level_salience",
                             kind="external", external=ExternalSpec(command=stub_command("--value", "0.25"))))
        results = run_pipeline(image, registry)
        row = [r for r in results if r.section == "low_level_salience"][0]
        assert row.filter_id == "neural-salience"
        assert row.status == STATUS_OK
        assert row.payload.mean == pytest.approx(64 / 255, abs=1e-9)

    def test_custom_filter_appends_after_canonical(self, image):
        registry = default_registry()
        registry.set_enabled("color-suggestions", True)
        results = run_pipeline(image, registry)
        assert len(results) == len(CANONICAL_SECTIONS) + 1
        assert results[-1].filter_id == "color-suggestions"
        assert results[-1].section == "custom"
        labels = [item.label for item in results[-1].payload.items]
        assert "grayscale-1" in labels

    def test_timeout_isolated_to_its_section(self, image):
        registry = default_registry()
        registry.register(
            FilterDescriptor(id="sleepy", title="Sleepy", section="gaze", kind="external",
                             external=ExternalSpec(command=stub_command("--sleep", "60")), timeout_ms=1000))
        registry.register(
            FilterDescriptor(id="boxes", title="Objects", section="objects", kind="external",
                             external=ExternalSpec(command=stub_command("--kind", "boxes"))))
        started = time.perf_counter()
        results = run_pipeline(image, registry)
        elapsed = time.perf_counter() - started
        by_section = {r.section: r for r in results}
        assert by_section["gaze"].status == STATUS_TIMEOUT
        assert 1000 <= by_section["gaze"].elapsed_ms <= 2000
        others = [r for r in results if r.section != "gaze"]
        assert all(r.status == STATUS_OK for r in others)
        assert elapsed < 3.0

    def test_failure_isolated(self, image):
        registry = default_registry()
        registry.register(
            FilterDescriptor(id="broken", title="Broken", section="gaze", kind="external",
                             external=ExternalSpec(command=stub_command("--fail"))))
        results = run_pipeline(image, registry)
        gaze = [r for r in results if r.section == "gaze"][0]
        assert gaze.status == "failed"
        assert "stub plugin was told to fail" in (gaze.error or "")
        assert gaze.payload is None

    def test_deterministic_across_worker_counts(self, image):
        registry = default_registry()
        a = run_pipeline(image, registry, workers=1)
        b = run_pipeline(image, registry, workers=8)
        assert [r.section for r in a] == [r.section for r in b]
        for ra, rb in zip(a, b):
            assert ra.status == rb.status
            if isinstance(ra.payload, HeatmapPayload):
                assert np.array_equal(ra.payload.heatmap.values, rb.payload.heatmap.values)


class TestRunExternal:
    def test_constant_heatmap_round_trip(self, image):
        payload = run_external(ExternalSpec(command=stub_command("--value", "0.5")), image, 10_000)
        assert isinstance(payload, HeatmapPayload)
        assert payload.heatmap.values.shape == (image.height, image.width)
        assert np.allclose(payload.heatmap.values, 128 / 255)

    def test_boxes_payload(self, image):
        payload = run_external(ExternalSpec(command=stub_command("--kind", "boxes")), image, 10_000)
        assert isinstance(payload, ObjectBoxesPayload)
        assert len(payload.boxes) == 2
        for box in payload.boxes:
            assert 0 <= box.x < image.width and 0 <= box.y < image.height
            assert box.x + box.w <= image.width and box.y + box.h <= image.height

    def test_text_regions_payload(self, image):
        payload = run_external(ExternalSpec(command=stub_command("--kind", "text_regions")), image, 10_000)
        assert isinstance(payload, TextRegionsPayload)
        assert payload.regions[0].text == "stub text"

    def test_malformed_frame(self, image):
        with pytest.raises(ProtocolError):
            run_external(ExternalSpec(command=stub_command("--malformed")), image, 10_000)

    def test_plugin_reported_error(self, image):
        with pytest.raises(PluginReportedError):
            run_external(ExternalSpec(command=stub_command("--fail")), image, 10_000)

    def test_nonexistent_command(self, image):
        with pytest.raises(SpawnError):
            run_external(ExternalSpec(command=("/nonexistent-plugin-binary",)), image, 10_000)

    def test_timeout_kills_process(self, image):
        started = time.perf_counter()
        with pytest.raises(PluginTimeout):
            run_external(ExternalSpec(command=stub_command("--sleep", "60")), image, 500)
        assert time.perf_counter() - started < 5.0


class _PluginHandler(http.server.BaseHTTPRequestHandler):
    document: dict = {}

    def do_POST(self):
        length = int(self.headers.get("content-length", 0))
        self.rfile.read(length)
        body = json.dumps(type(self).document).encode()
        self.send_response(200)
        self.send_header("content-type", "application/json")
        self.send_header("content-length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_plugin():
    server = http.server.HTTPServer(("127.0.0.1", 0), _PluginHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/analyze"
    server.shutdown()


class TestHttpMode:
    def test_boxes_over_http(self, image, http_plugin):
        _PluginHandler.document = {
            "status": "ok",
            "payload_kind": "boxes",
            "boxes": [{"x": 1, "y": 2, "w": 5, "h": 6, "label": "net", "confidence": 0.7}],
        }
        payload = run_external(ExternalSpec(url=http_plugin), image, 10_000)
        assert isinstance(payload, ObjectBoxesPayload)
        assert payload.boxes[0].label == "net"

    def test_error_document_over_http(self, image, http_plugin):
        _PluginHandler.document = {"status": "error", "error": "no model loaded"}
        with pytest.raises(PluginReportedError):
            run_external(ExternalSpec(url=http_plugin), image, 10_000)

    def test_unreachable_endpoint(self, image):
        with pytest.raises(SpawnError):
            run_external(ExternalSpec(url="http://127.0.0.1:1/x"), image, 2_000)
