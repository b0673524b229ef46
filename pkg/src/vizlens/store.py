"""Content-addressed file store for charts, artifacts, and report versions.

Layout::

    <root>/images/<sha256>.png   charts and PNG artifacts, content-addressed
    <root>/reports/<id>.json     report documents, canonical bytes
    <root>/index.json            sequence counter + archive listing

Writes go through a temp file + atomic rename and are serialized by an
in-process lock (single-writer discipline); readers never observe partial
documents. The interface is deliberately narrow so a database-backed
implementation could replace it.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import NotFound, StoreIo
from .image import Heatmap, decode_heatmap
from .report import (
    ComparisonDiff,
    Report,
    add_note_to_report,
    compare_reports,
    content_hash,
    document_bytes,
    report_from_doc,
    report_to_doc,
)

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass(frozen=True)
class ArchiveEntry:
    report_id: str
    user_id: str
    created_at: str
    seq: int
    image_ref: str
    thumbnail_ref: str


class ReportStore:
    """File-backed archive of reports with content-addressed blobs."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        try:
            (self.root / "images").mkdir(parents=True, exist_ok=True)
            (self.root / "reports").mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreIo(f"cannot initialize store at {self.root}: {exc}") from exc

    # -- blobs --------------------------------------------------------------

    def put_image(self, png: bytes) -> str:
        """Store PNG bytes under their content hash; idempotent."""
        ref = content_hash(png)
        path = self.root / "images" / f"{ref}.png"
        if not path.exists():
            with self._lock:
                self._atomic_write(path, png)
        return ref

    def get_image(self, ref: str) -> bytes:
        path = self.root / "images" / f"{ref}.png"
        if not _ID_RE.match(ref) or not path.exists():
            raise NotFound(f"image {ref}")
        try:
            return path.read_bytes()
        except OSError as exc:
            raise StoreIo(str(exc)) from exc

    def has_image(self, ref: str) -> bool:
        return bool(_ID_RE.match(ref)) and (self.root / "images" / f"{ref}.png").exists()

    def load_heatmap(self, ref: str) -> Heatmap:
        return decode_heatmap(self.get_image(ref))

    # -- reports ------------------------------------------------------------

    def save_report(self, report: Report) -> str:
        """Persist a report and its artifacts; returns the assigned id.

        The id is ``r<seq>-<hash12>``: a monotonically increasing sequence
        plus a content-hash prefix of the document.
        """
        with self._lock:
            index = self._read_index()
            seq = index["next_seq"]
            doc, artifacts = report_to_doc(report)
            doc["report_id"] = ""
            digest = content_hash(document_bytes(doc))
            report_id = f"r{seq:04d}-{digest[:12]}"
            doc["report_id"] = report_id

            for ref, data in artifacts.items():
                path = self.root / "images" / f"{ref}.png"
                if not path.exists():
                    self._atomic_write(path, data)
            self._atomic_write(
                self.root / "reports" / f"{report_id}.json", document_bytes(doc)
            )
            index["next_seq"] = seq + 1
            index["reports"].append(
                {
                    "report_id": report_id,
                    "user_id": report.user_id,
                    "created_at": report.created_at,
                    "seq": seq,
                    "image_ref": report.image_ref,
                    "thumbnail_ref": report.image_ref,
                }
            )
            self._write_index(index)
        return report_id

    def update_report(self, report: Report) -> None:
        """Rewrite an existing report document (same id) atomically."""
        path = self.root / "reports" / f"{report.report_id}.json"
        if not path.exists():
            raise NotFound(f"report {report.report_id}")
        with self._lock:
            doc, artifacts = report_to_doc(report)
            for ref, data in artifacts.items():
                blob = self.root / "images" / f"{ref}.png"
                if not blob.exists():
                    self._atomic_write(blob, data)
            self._atomic_write(path, document_bytes(doc))

    def load_report(self, report_id: str) -> Report:
        return report_from_doc(json.loads(self.load_report_bytes(report_id)))

    def load_report_bytes(self, report_id: str) -> bytes:
        path = self.root / "reports" / f"{report_id}.json"
        if not _ID_RE.match(report_id) or not path.exists():
            raise NotFound(f"report {report_id}")
        try:
            return path.read_bytes()
        except OSError as exc:
            raise StoreIo(str(exc)) from exc

    def list_archive(self, user_id: str | None = None) -> list[ArchiveEntry]:
        """Archive entries ascending by (created_at, seq)."""
        index = self._read_index()
        entries = [ArchiveEntry(**e) for e in index["reports"]]
        if user_id is not None:
            entries = [e for e in entries if e.user_id == user_id]
        return sorted(entries, key=lambda e: (e.created_at, e.seq))

    def add_note(self, report_id: str, section: str, text: str, now: str | None = None) -> Report:
        """Append a note to a stored report; prior notes are untouched."""
        updated = add_note_to_report(self.load_report(report_id), section, text, now)
        self.update_report(updated)
        return updated

    def compare(self, report_id_a: str, report_id_b: str) -> ComparisonDiff:
        a = self.load_report(report_id_a)
        b = self.load_report(report_id_b)
        return compare_reports(a, b, load_heatmap=self.load_heatmap)

    # -- internals ----------------------------------------------------------

    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _read_index(self) -> dict:
        path = self._index_path()
        if not path.exists():
            return {"next_seq": 1, "reports": []}
        try:
            return json.loads(path.read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreIo(f"corrupt index: {exc}") from exc

    def _write_index(self, index: dict) -> None:
        self._atomic_write(
            self._index_path(), (json.dumps(index, sort_keys=True, indent=2) + "\n").encode()
        )

    def _atomic_write(self, path: Path, data: bytes) -> None:
        tmp = path.with_name(path.name + ".tmp")
        try:
            tmp.write_bytes(data)
            os.replace(tmp, path)
        except OSError as exc:
            raise StoreIo(f"cannot write {path}: {exc}") from exc
