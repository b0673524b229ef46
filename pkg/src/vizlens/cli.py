"""Command-line front door: analyze, metrics, compare, archive, serve.

Exit codes: 0 success (warnings allowed), 2 bad input (unsupported or
corrupt image, dimension mismatch, missing file), 3 store or config
failure. ``--porcelain`` switches machine-readable output to JSON lines.
The ``PAT_STORE`` environment variable supplies the default store path.
"""

from __future__ import annotations

import json
import os
import socket
import sys
from pathlib import Path

import click

from .config import STORE_ENV_VAR, AppConfig, add_user, load_config
from .engine import Analyzer
from .errors import (
    ConfigError,
    DecodeError,
    DimensionMismatch,
    NotFound,
    StoreIo,
    UnsupportedFormat,
    VizlensError,
)
from .image import decode_heatmap
from .metrics import binarize, confusion, kl_divergence, precision_recall
from .report import compare_reports, report_from_doc
from .sections import STATUS_OK, HeatmapPayload, VariantsPayload
from .store import ReportStore

EXIT_BAD_INPUT = 2
EXIT_STORE = 3


def _resolve_store(store: str | None, config: AppConfig) -> str:
    return store or os.environ.get(STORE_ENV_VAR) or config.store_path


def _load_app_config(config_path: str | None) -> AppConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STORE)


@click.group()
def main() -> None:
    """Perceptual analysis reports for chart screenshots."""


@main.command()
@click.argument("chart", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=Path("report.json"), show_default=True, help="Where to write the report JSON.")
@click.option("--overlays", type=click.Path(path_type=Path), default=None, help="Directory for one overlay PNG per renderable section.")
@click.option("--store", default=None, help="Report store directory (default: $PAT_STORE or config).")
@click.option("--config", "config_path", default=None, help="Config file with plugins and policies.")
@click.option("--user", default="cli", show_default=True, help="User id recorded in the report.")
@click.option("--porcelain", is_flag=True, help="Print a machine-readable JSON line.")
def analyze(chart: Path, out: Path, overlays: Path | None, store: str | None, config_path: str | None, user: str, porcelain: bool) -> None:
    """Analyze one chart image and write its report."""
    cfg = _load_app_config(config_path)
    try:
        data = chart.read_bytes()
    except OSError as exc:
        click.echo(f"error: cannot read {chart}: {exc}", err=True)
        sys.exit(EXIT_BAD_INPUT)
    try:
        analyzer = Analyzer(cfg, store=ReportStore(_resolve_store(store, cfg)))
        report_id, report = analyzer.analyze_bytes(data, user)
    except (UnsupportedFormat, DecodeError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_BAD_INPUT)
    except (StoreIo, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STORE)

    raw = analyzer.store.load_report_bytes(report_id)
    try:
        out.write_bytes(raw)
    except OSError as exc:
        click.echo(f"error: cannot write {out}: {exc}", err=True)
        sys.exit(EXIT_STORE)

    written: list[str] = []
    if overlays is not None:
        overlays.mkdir(parents=True, exist_ok=True)
        stored = analyzer.store.load_report(report_id)
        for section in stored.sections:
            if section.status != STATUS_OK:
                continue
            if isinstance(section.payload, HeatmapPayload):
                png = analyzer.render_overlay(stored, section.section, 0.6)
                path = overlays / f"{section.section}.png"
                path.write_bytes(png)
                written.append(path.name)
            elif isinstance(section.payload, VariantsPayload):
                for item in section.payload.items:
                    png = analyzer.render_overlay(stored, section.section, 1.0, variant=item.label)
                    path = overlays / f"{section.section}-{item.label}.png"
                    path.write_bytes(png)
                    written.append(path.name)

    if porcelain:
        click.echo(json.dumps({
            "report_id": report_id,
            "out": str(out),
            "warnings": report.warnings,
            "overlays": written,
        }, sort_keys=True))
    else:
        click.echo(f"report {report_id} -> {out}")
        for warning in report.warnings:
            click.echo(f"warning: {warning}")
        if written:
            click.echo(f"overlays: {', '.join(written)}")


@main.command()
@click.argument("pred", type=click.Path(path_type=Path))
@click.argument("gt", type=click.Path(path_type=Path))
@click.option("--kl", "with_kl", is_flag=True, help="Also report KL divergence (gt relative to pred).")
@click.option("--porcelain", is_flag=True, help="Print a machine-readable JSON line.")
def metrics(pred: Path, gt: Path, with_kl: bool, porcelain: bool) -> None:
    """Confusion fractions and precision/recall of two heatmap PNGs."""
    try:
        pred_map = decode_heatmap(pred.read_bytes())
        gt_map = decode_heatmap(gt.read_bytes())
    except (OSError, UnsupportedFormat, DecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_BAD_INPUT)
    try:
        fractions = confusion(binarize(pred_map), binarize(gt_map))
    except DimensionMismatch as exc:
        click.echo(f"error: dimension mismatch: {exc}", err=True)
        sys.exit(EXIT_BAD_INPUT)
    precision, recall = precision_recall(fractions)
    values = {
        "tp": fractions.tp, "tn": fractions.tn, "fp": fractions.fp, "fn": fractions.fn,
        "precision": precision, "recall": recall,
    }
    if with_kl:
        values["kl"] = kl_divergence(gt_map, pred_map)
    if porcelain:
        click.echo(json.dumps(values, sort_keys=True))
        return
    for key in ("tp", "tn", "fp", "fn"):
        click.echo(f"{key:10s} {values[key]:.6f}")
    click.echo(f"{'precision':10s} {precision:.4f}")
    click.echo(f"{'recall':10s} {recall:.4f}")
    if with_kl:
        click.echo(f"{'kl':10s} {values['kl']:.6f}")
    click.echo("metrics " + " ".join(f"{k}={values[k]:.6f}" for k in sorted(values)))


@main.command()
@click.argument("report_a", type=click.Path(path_type=Path))
@click.argument("report_b", type=click.Path(path_type=Path))
@click.option("--store", default=None, help="Store directory for heatmap artifacts (enables KL).")
@click.option("--porcelain", is_flag=True, help="Print the diff as one JSON line.")
def compare(report_a: Path, report_b: Path, store: str | None, porcelain: bool) -> None:
    """Compare two report JSON files section by section."""
    try:
        doc_a = json.loads(report_a.read_text("utf-8"))
        doc_b = json.loads(report_b.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_BAD_INPUT)
    load_heatmap = None
    store_path = store or os.environ.get(STORE_ENV_VAR)
    if store_path and Path(store_path).exists():
        report_store = ReportStore(store_path)

        def load_heatmap(ref: str):
            try:
                return report_store.load_heatmap(ref)
            except (NotFound, StoreIo):
                return None

    diff = compare_reports(report_from_doc(doc_a), report_from_doc(doc_b), load_heatmap)
    if porcelain:
        click.echo(json.dumps(diff.to_doc(), sort_keys=True))
        return
    click.echo(f"compare {diff.report_a} vs {diff.report_b}")
    for row in diff.per_section:
        deltas = " ".join(f"{k}={v:+.6f}" for k, v in sorted(row.deltas.items()))
        click.echo(f"  {row.section:20s} {row.status_a:>12s}/{row.status_b:<12s} {deltas}")


@main.group()
def archive() -> None:
    """Inspect the report archive."""


@archive.command("list")
@click.option("--store", default=None, help="Store directory (default: $PAT_STORE or ./store).")
@click.option("--user", default=None, help="Only this user's reports.")
@click.option("--porcelain", is_flag=True, help="One JSON line per report.")
def archive_list(store: str | None, user: str | None, porcelain: bool) -> None:
    """Chronological listing of stored reports."""
    store_path = _resolve_store(store, AppConfig())
    if not Path(store_path).exists():
        return  # an absent store is an empty archive
    try:
        entries = ReportStore(store_path).list_archive(user)
    except (StoreIo, VizlensError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STORE)
    for entry in entries:
        if porcelain:
            click.echo(json.dumps({
                "report_id": entry.report_id, "user_id": entry.user_id,
                "created_at": entry.created_at, "thumbnail_ref": entry.thumbnail_ref,
            }, sort_keys=True))
        else:
            click.echo(f"{entry.created_at}  {entry.user_id:12s} {entry.report_id}")


@main.command()
@click.option("--port", type=int, default=None, help="Listen port; 0 binds an ephemeral port.")
@click.option("--host", default=None, help="Listen address.")
@click.option("--config", "config_path", default=None, help="Config file.")
def serve(port: int | None, host: str | None, config_path: str | None) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    from .service import create_app

    cfg = _load_app_config(config_path)
    bind_host = host or cfg.listen_host
    bind_port = cfg.listen_port if port is None else port
    if bind_port == 0:
        with socket.socket() as probe:
            probe.bind((bind_host, 0))
            bind_port = probe.getsockname()[1]
    click.echo(f"listening on http://{bind_host}:{bind_port}")
    try:
        app = create_app(cfg)
    except (StoreIo, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STORE)
    uvicorn.run(app, host=bind_host, port=bind_port, log_level="warning")


@main.command()
@click.argument("users_file", type=click.Path(path_type=Path))
@click.argument("username")
@click.option("--password", prompt=True, hide_input=True)
def useradd(users_file: Path, username: str, password: str) -> None:
    """Create or update a user in the credentials file."""
    add_user(users_file, username, password)
    click.echo(f"user {username} written to {users_file}")


if __name__ == "__main__":
    main()
