"""Shared fixtures: synthetic charts, a tiny bitmap font, stores, clients."""

from __future__ import annotations

import sys

import numpy as np
import pytest

from vizlens.config import AppConfig, add_user
from vizlens.engine import Analyzer
from vizlens.image import RasterImage, encode_png

# 5x8 bitmap glyphs (cap height 8 rows); scaled by an integer factor when
# rendered, so cap height in pixels is 8 * scale.
GLYPHS = {
    "A": ["01110", "10001", "10001", "11111", "10001", "10001", "10001", "10001"],
    "B": ["11110", "10001", "10001", "11110", "10001", "10001", "10001", "11110"],
    "E": ["11111", "10000", "10000", "11110", "10000", "10000", "10000", "11111"],
    "H": ["10001", "10001", "10001", "11111", "10001", "10001", "10001", "10001"],
    "L": ["10000", "10000", "10000", "10000", "10000", "10000", "10000", "11111"],
    "N": ["10001", "11001", "11001", "10101", "10011", "10011", "10001", "10001"],
    "O": ["01110", "10001", "10001", "10001", "10001", "10001", "10001", "01110"],
    "T": ["11111", "00100", "00100", "00100", "00100", "00100", "00100", "00100"],
}
GLYPH_ROWS = 8
GLYPH_COLS = 5


def render_text_mask(text: str, scale: int = 2, gap_cols: int = 1) -> np.ndarray:
    """Render block capitals as a boolean mask; cap height = 8 * scale px."""
    advance = (GLYPH_COLS + gap_cols) * scale
    mask = np.zeros((GLYPH_ROWS * scale, advance * len(text)), dtype=bool)
    for index, ch in enumerate(text):
        glyph = GLYPHS[ch]
        x0 = index * advance
        for row, line in enumerate(glyph):
            for col, bit in enumerate(line):
                if bit == "1":
                    mask[row * scale : (row + 1) * scale, x0 + col * scale : x0 + (col + 1) * scale] = True
    return mask


def make_chart(width: int = 800, height: int = 600, seed: int = 5, title: bool = True) -> np.ndarray:
    """A deterministic flat-color bar chart with axes and text-like marks."""
    px = np.full((height, width, 3), 255, dtype=np.uint8)
    px[height - 60, 60 : width - 40] = (40, 40, 40)
    px[40 : height - 60, 60] = (40, 40, 40)
    colors = [(214, 84, 58), (58, 120, 214), (58, 180, 90), (230, 170, 40), (140, 90, 200)]
    bar_w = (width - 140) // len(colors)
    rng = np.random.default_rng(seed)
    for i, color in enumerate(colors):
        bar_h = int((height - 140) * (0.3 + 0.7 * rng.random()))
        x0 = 70 + i * bar_w
        px[height - 60 - bar_h : height - 60, x0 : x0 + bar_w - 18] = color
    if title:
        mask = render_text_mask("HOTEL", scale=2)
        h, w = mask.shape
        px[14 : 14 + h, 64 : 64 + w][mask[:, : min(w, width - 64)]] = (20, 20, 20)
    return px


@pytest.fixture
def chart_image() -> RasterImage:
    return RasterImage(make_chart(), source_format="png", source_bytes_len=0)


@pytest.fixture
def chart_png() -> bytes:
    return encode_png(RasterImage(make_chart()))


@pytest.fixture
def small_chart_png() -> bytes:
    return encode_png(RasterImage(make_chart(500, 400, title=False)))


@pytest.fixture
def store_dir(tmp_path):
    return tmp_path / "store"


@pytest.fixture
def analyzer(store_dir) -> Analyzer:
    return Analyzer(AppConfig(store_path=str(store_dir)))


@pytest.fixture
def users_file(tmp_path):
    path = tmp_path / "users.json"
    add_user(path, "demo", "demo1234")
    return path


@pytest.fixture
def service_client(store_dir, users_file):
    from fastapi.testclient import TestClient

    from vizlens.service import create_app

    cfg = AppConfig(store_path=str(store_dir), users_file=str(users_file), sync_wait_s=30.0)
    app = create_app(cfg)
    with TestClient(app) as client:
        yield client


@pytest.fixture
def auth_headers(service_client):
    response = service_client.post(
        "/api/login", json={"username": "demo", "password": "demo1234"}
    )
    assert response.status_code == 200
    return {"Authorization": f"Bearer {response.json()['token']}"}


def pytest_runtest_makereport(item, call):
    """Echo one PASS/FAIL line per acceptance criterion, capture-proof."""
    if call.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    label = item.name.replace("test_", "", 1)
    outcome = "FAIL" if call.excinfo else "PASS"
    sys.__stdout__.write(f"ACCEPTANCE {outcome}: {label}\n")
    sys.__stdout__.flush()
