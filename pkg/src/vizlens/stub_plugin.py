"""Reference external plugin: answers with canned payloads.

Speaks the process-mode wire protocol (one length-prefixed PNG request on
stdin, one length-prefixed JSON response on stdout). Useful as a protocol
example, as a test double, and for fault injection::

    python -m vizlens.stub_plugin --kind heatmap --value 0.5
    python -m vizlens.stub_plugin --kind boxes
    python -m vizlens.stub_plugin --sleep 60          # timeout testing
    python -m vizlens.stub_plugin --fail              # plugin-side error
    python -m vizlens.stub_plugin --malformed         # protocol violation
"""

from __future__ import annotations

import argparse
import base64
import io
import json
import struct
import sys
import time


def _read_request(stream) -> bytes:
    header = stream.read(4)
    if len(header) != 4:
        raise SystemExit("missing frame header")
    (length,) = struct.unpack(">I", header)
    body = stream.read(length)
    if len(body) != length:
        raise SystemExit("truncated request frame")
    return body


def _png_dimensions(png: bytes) -> tuple[int, int]:
    # IHDR is always the first chunk: width/height at offsets 16/20.
    if len(png) < 24 or png[:8] != b"\x89PNG\r\n\x1a\n":
        raise SystemExit("request is not a PNG")
    width, height = struct.unpack(">II", png[16:24])
    return width, height


def _constant_heatmap_png(width: int, height: int, value: float) -> bytes:
    from PIL import Image

    level = max(0, min(255, round(value * 255)))
    img = Image.new("L", (width, height), color=level)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", choices=["heatmap", "boxes", "text_regions"], default="heatmap")
    parser.add_argument("--value", type=float, default=0.5, help="constant heatmap level")
    parser.add_argument("--sleep", type=float, default=0.0, help="stall before answering")
    parser.add_argument("--fail", action="store_true", help="answer with a plugin error")
    parser.add_argument("--malformed", action="store_true", help="answer with garbage bytes")
    args = parser.parse_args(argv)

    png = _read_request(sys.stdin.buffer)
    if args.sleep > 0:
        time.sleep(args.sleep)

    out = sys.stdout.buffer
    if args.malformed:
        out.write(b"\x00\x00\x00\x04oops")
        out.flush()
        return 0

    if args.fail:
        document = {"status": "error", "error": "stub plugin was told to fail"}
    elif args.kind == "heatmap":
        width, height = _png_dimensions(png)
        document = {
            "status": "ok",
            "payload_kind": "heatmap",
            "heatmap_png_b64": base64.b64encode(
                _constant_heatmap_png(width, height, args.value)
            ).decode("ascii"),
        }
    elif args.kind == "boxes":
        document = {
            "status": "ok",
            "payload_kind": "boxes",
            "boxes": [
                {"x": 4, "y": 4, "w": 16, "h": 12, "label": "stub-object", "confidence": 0.9},
                {"x": 30, "y": 10, "w": 10, "h": 10, "label": "stub-object", "confidence": 0.5},
            ],
        }
    else:
        document = {
            "status": "ok",
            "payload_kind": "text_regions",
            "text_regions": [
                {"x": 2, "y": 2, "w": 40, "h": 12, "text": "stub text", "confidence": 0.95},
            ],
        }

    body = json.dumps(document).encode("utf-8")
    out.write(struct.pack(">I", len(body)) + body)
    out.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
