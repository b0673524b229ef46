"""HTTP API contracts: auth, upload, analyze, overlays, notes, compare, jobs."""

import io
import sys
import time

import numpy as np
import pytest
from PIL import Image

from conftest import make_chart
from vizlens.config import AppConfig
from vizlens.image import RasterImage, encode_png
from vizlens.report import content_hash


def upload(client, headers, png: bytes) -> str:
    response = client.post(
        "/api/charts", files={"file": ("chart.png", png, "image/png")}, headers=headers
    )
    assert response.status_code == 200, response.text
    return response.json()["image_ref"]


def analyze(client, headers, image_ref: str) -> str:
    response = client.post(f"/api/charts/{image_ref}/analyze", headers=headers)
    assert response.status_code == 200, response.text
    return response.json()["report_id"]


class TestAuth:
    @pytest.mark.parametrize(
        "method,path",
        [
            ("get", "/api/reports"),
            ("get", "/api/reports/r0001-abc"),
            ("post", "/api/charts"),
            ("post", "/api/charts/x/analyze"),
            ("get", "/api/jobs/x"),
            ("get", "/api/compare?a=x&b=y"),
            ("get", "/api/images/x"),
        ],
    )
    def test_unauthenticated_requests_rejected(self, service_client, method, path):
        assert getattr(service_client, method)(path).status_code == 401

    def test_wrong_password(self, service_client):
        response = service_client.post(
            "/api/login", json={"username": "demo", "password": "nope"}
        )
        assert response.status_code == 401

    def test_unknown_user(self, service_client):
        response = service_client.post(
            "/api/login", json={"username": "ghost", "password": "x"}
        )
        assert response.status_code == 401

    def test_login_and_token_works(self, service_client):
        response = service_client.post(
            "/api/login", json={"username": "demo", "password": "demo1234"}
        )
        assert response.status_code == 200
        token = response.json()["token"]
        assert len(token) >= 32  # 256 bits, urlsafe encoded
        listing = service_client.get(
            "/api/reports", headers={"Authorization": f"Bearer {token}"}
        )
        assert listing.status_code == 200

    def test_garbage_token_rejected(self, service_client):
        response = service_client.get(
            "/api/reports", headers={"Authorization": "Bearer not-a-token"}
        )
        assert response.status_code == 401


class TestUpload:
    def test_valid_png(self, service_client, auth_headers, small_chart_png):
        response = service_client.post(
            "/api/charts",
            files={"file": ("c.png", small_chart_png, "image/png")},
            headers=auth_headers,
        )
        assert response.status_code == 200
        assert response.json()["warnings"] == []

    def test_gif_rejected_400(self, service_client, auth_headers):
        buf = io.BytesIO()
        Image.new("P", (4, 4)).save(buf, format="GIF")
        response = service_client.post(
            "/api/charts", files={"file": ("x.gif", buf.getvalue(), "image/gif")},
            headers=auth_headers,
        )
        assert response.status_code == 400

    def test_oversized_stored_downscaled(self, service_client, auth_headers):
        big = encode_png(RasterImage(np.zeros((1200, 1600, 3), dtype=np.uint8)))
        ref = upload(service_client, auth_headers, big)
        stored = service_client.get(f"/api/images/{ref}", headers=auth_headers)
        w, h = Image.open(io.BytesIO(stored.content)).size
        assert (w, h) == (1000, 750)

    def test_small_upload_warns(self, service_client, auth_headers):
        tiny = encode_png(RasterImage(np.full((150, 200, 3), 255, dtype=np.uint8)))
        response = service_client.post(
            "/api/charts", files={"file": ("t.png", tiny, "image/png")}, headers=auth_headers
        )
        assert response.status_code == 200
        assert any("400x300" in w for w in response.json()["warnings"])

    def test_identical_bytes_same_ref(self, service_client, auth_headers, small_chart_png):
        first = upload(service_client, auth_headers, small_chart_png)
        second = upload(service_client, auth_headers, small_chart_png)
        assert first == second


class TestAnalyze:
    def test_unknown_image_404(self, service_client, auth_headers):
        response = service_client.post("/api/charts/deadbeef/analyze", headers=auth_headers)
        assert response.status_code == 404

    def test_analyze_returns_report(self, service_client, auth_headers, small_chart_png):
        ref = upload(service_client, auth_headers, small_chart_png)
        report_id = analyze(service_client, auth_headers, ref)
        report = service_client.get(f"/api/reports/{report_id}", headers=auth_headers).json()
        assert [s["section"] for s in report["sections"]] == [
            "specs", "text", "entropy", "gaze", "low_level_salience", "objects", "cvd",
        ]

    def test_rerun_payload_identical(self, service_client, auth_headers, small_chart_png):
        ref = upload(service_client, auth_headers, small_chart_png)
        first = analyze(service_client, auth_headers, ref)
        second = analyze(service_client, auth_headers, ref)
        assert first != second
        doc_a = service_client.get(f"/api/reports/{first}", headers=auth_headers).json()
        doc_b = service_client.get(f"/api/reports/{second}", headers=auth_headers).json()
        payloads_a = [s["payload"] for s in doc_a["sections"]]
        payloads_b = [s["payload"] for s in doc_b["sections"]]
        assert payloads_a == payloads_b


class TestSlowAnalysis:
    """A long pipeline answers 202 and finishes through the job endpoint."""

    @pytest.fixture
    def slow_client(self, tmp_path, users_file):
        from fastapi.testclient import TestClient

        from vizlens.plugins import ExternalSpec, FilterDescriptor
        from vizlens.service import create_app

        sleeper = FilterDescriptor(
            id="sleepy-gaze", title="Slow plugin", section="gaze", kind="external",
            external=ExternalSpec(
                command=(sys.executable, "-m", "vizlens.stub_plugin", "--sleep", "3")
            ),
            timeout_ms=1500,
        )
        cfg = AppConfig(
            store_path=str(tmp_path / "store"), users_file=str(users_file),
            sync_wait_s=0.2, plugins=(sleeper,),
        )
        with TestClient(create_app(cfg)) as client:
            yield client

    def test_202_then_done_with_timeout_section(self, slow_client):
        login = slow_client.post("/api/login", json={"username": "demo", "password": "demo1234"})
        headers = {"Authorization": f"Bearer {login.json()['token']}"}
        png = encode_png(RasterImage(make_chart(420, 320, title=False)))
        ref = upload(slow_client, headers, png)

        response = slow_client.post(f"/api/charts/{ref}/analyze", headers=headers)
        assert response.status_code == 202
        job_id = response.json()["job_id"]

        deadline = time.time() + 30
        state = None
        while time.time() < deadline:
            state = slow_client.get(f"/api/jobs/{job_id}", headers=headers).json()
            if state["state"] in ("done", "failed"):
                break
            time.sleep(0.1)
        assert state is not None and state["state"] == "done", state
        report = slow_client.get(f"/api/reports/{state['report_id']}", headers=headers).json()
        gaze = [s for s in report["sections"] if s["section"] == "gaze"][0]
        assert gaze["status"] == "timeout"
        others = [s for s in report["sections"] if s["section"] not in ("gaze", "objects")]
        assert all(s["status"] == "ok" for s in others)

    def test_unknown_job_404(self, slow_client):
        login = slow_client.post("/api/login", json={"username": "demo", "password": "demo1234"})
        headers = {"Authorization": f"Bearer {login.json()['token']}"}
        assert slow_client.get("/api/jobs/nope", headers=headers).status_code == 404


class TestReportsAndOverlays:
    @pytest.fixture
    def report_id(self, service_client, auth_headers, small_chart_png):
        ref = upload(service_client, auth_headers, small_chart_png)
        return analyze(service_client, auth_headers, ref)

    def test_overlay_opacity_zero_is_the_chart(self, service_client, auth_headers, report_id):
        report = service_client.get(f"/api/reports/{report_id}", headers=auth_headers).json()
        overlay = service_client.get(
            f"/api/reports/{report_id}/overlays/entropy?opacity=0", headers=auth_headers
        )
        assert overlay.status_code == 200
        assert content_hash(overlay.content) == report["image_ref"]

    def test_overlay_variant_section(self, service_client, auth_headers, report_id):
        response = service_client.get(
            f"/api/reports/{report_id}/overlays/cvd?opacity=1&variant=deuteranopia",
            headers=auth_headers,
        )
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"

    @pytest.mark.parametrize("query", ["opacity=1.5", "opacity=-0.25"])
    def test_bad_opacity_400(self, service_client, auth_headers, report_id, query):
        response = service_client.get(
            f"/api/reports/{report_id}/overlays/entropy?{query}", headers=auth_headers
        )
        assert response.status_code == 400

    def test_non_overlayable_section_400(self, service_client, auth_headers, report_id):
        response = service_client.get(
            f"/api/reports/{report_id}/overlays/specs", headers=auth_headers
        )
        assert response.status_code == 400

    def test_unavailable_section_400(self, service_client, auth_headers, report_id):
        response = service_client.get(
            f"/api/reports/{report_id}/overlays/gaze", headers=auth_headers
        )
        assert response.status_code == 400

    def test_unknown_report_404(self, service_client, auth_headers):
        response = service_client.get(
            "/api/reports/r9999-ffffffffffff/overlays/entropy", headers=auth_headers
        )
        assert response.status_code == 404

    def test_note_round_trip(self, service_client, auth_headers, report_id):
        response = service_client.post(
            f"/api/reports/{report_id}/notes",
            json={"section": "entropy", "text": "crowded legend"},
            headers=auth_headers,
        )
        assert response.status_code == 200
        notes = response.json()["notes"]
        assert notes[0]["section"] == "entropy"
        again = service_client.get(f"/api/reports/{report_id}", headers=auth_headers).json()
        assert again["notes"] == notes

    def test_note_unknown_section_400(self, service_client, auth_headers, report_id):
        response = service_client.post(
            f"/api/reports/{report_id}/notes",
            json={"section": "bogus", "text": "x"},
            headers=auth_headers,
        )
        assert response.status_code == 400

    def test_compare_self_zero(self, service_client, auth_headers, report_id):
        response = service_client.get(
            f"/api/compare?a={report_id}&b={report_id}", headers=auth_headers
        )
        assert response.status_code == 200
        doc = response.json()
        for row in doc["per_section"]:
            for value in row["deltas"].values():
                assert abs(value) <= 1e-9

    def test_archive_listing_chronological(self, service_client, auth_headers, report_id, small_chart_png):
        ref = upload(service_client, auth_headers, small_chart_png)
        analyze(service_client, auth_headers, ref)
        listing = service_client.get("/api/reports", headers=auth_headers).json()
        assert len(listing) == 2
        stamps = [e["created_at"] for e in listing]
        assert stamps == sorted(stamps)
