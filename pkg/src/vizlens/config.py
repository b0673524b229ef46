"""Configuration file handling and the credentials file.

The config is one JSON document shared by the CLI and the HTTP service::

    {
      "store": "./store",
      "listen": {"host": "127.0.0.1", "port": 8040},
      "cors_origin": "http://localhost:5173",
      "users_file": "./users.json",
      "ui_dir": null,
      "resize": {"max_w": 1000, "max_h": 1000, "warn_min_w": 400, "warn_min_h": 300},
      "entropy_window_radius": 4,
      "min_text_height": 10,
      "pipeline_workers": 4,
      "analysis_workers": 2,
      "analysis_queue_limit": 8,
      "sync_wait_s": 60,
      "builtins": {"enable": [], "disable": []},
      "plugins": [
        {"id": "gaze-model", "title": "Gaze prediction", "section": "gaze",
         "command": ["python", "-m", "vizlens.stub_plugin"],
         "timeout_ms": 30000, "enabled": true}
      ]
    }

A plugin entry carries either ``command`` (argv list, process mode) or
``url`` (HTTP mode). The ``VIZLENS_PORT`` environment variable overrides
the listen port; ``PAT_STORE`` overrides the store path.

The users file maps usernames to salted password hashes:
``{"users": [{"username": ..., "salt": <hex>, "password_sha256": <hex>}]}``.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .image import ResizePolicy
from .plugins import ExternalSpec, FilterDescriptor, FilterRegistry, default_registry

STORE_ENV_VAR = "PAT_STORE"
PORT_ENV_VAR = "VIZLENS_PORT"
DEFAULT_STORE = "./store"


@dataclass(frozen=True)
class AppConfig:
    store_path: str = DEFAULT_STORE
    listen_host: str = "127.0.0.1"
    listen_port: int = 8040
    cors_origin: str | None = None
    users_file: str | None = None
    ui_dir: str | None = None
    resize: ResizePolicy = field(default_factory=ResizePolicy)
    entropy_window_radius: int = 4
    min_text_height: int = 10
    pipeline_workers: int = 4
    analysis_workers: int = 2
    analysis_queue_limit: int = 8
    sync_wait_s: float = 60.0
    builtins_enable: tuple[str, ...] = ()
    builtins_disable: tuple[str, ...] = ()
    plugins: tuple[FilterDescriptor, ...] = ()


def load_config(path: str | Path | None) -> AppConfig:
    """Read a config file; with no path, return defaults plus env overrides."""
    cfg = AppConfig()
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text("utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"unreadable config {path}: {exc}") from exc
        cfg = _config_from_doc(doc, base_dir=Path(path).resolve().parent)
    store_env = os.environ.get(STORE_ENV_VAR)
    if store_env:
        cfg = replace(cfg, store_path=store_env)
    port_env = os.environ.get(PORT_ENV_VAR)
    if port_env:
        try:
            cfg = replace(cfg, listen_port=int(port_env))
        except ValueError as exc:
            raise ConfigError(f"{PORT_ENV_VAR} must be an integer") from exc
    return cfg


def _config_from_doc(doc: dict, base_dir: Path) -> AppConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    def resolve(p: str | None) -> str | None:
        if p is None:
            return None
        path = Path(p)
        return str(path if path.is_absolute() else base_dir / path)

    listen = doc.get("listen", {})
    resize_doc = doc.get("resize", {})
    builtins = doc.get("builtins", {})
    try:
        plugins = tuple(_plugin_from_doc(p) for p in doc.get("plugins", []))
        return AppConfig(
            store_path=resolve(doc.get("store", DEFAULT_STORE)),
            listen_host=listen.get("host", "127.0.0.1"),
            listen_port=int(listen.get("port", 8040)),
            cors_origin=doc.get("cors_origin"),
            users_file=resolve(doc.get("users_file")),
            ui_dir=resolve(doc.get("ui_dir")),
            resize=ResizePolicy(
                max_w=int(resize_doc.get("max_w", 1000)),
                max_h=int(resize_doc.get("max_h", 1000)),
                warn_min_w=int(resize_doc.get("warn_min_w", 400)),
                warn_min_h=int(resize_doc.get("warn_min_h", 300)),
            ),
            entropy_window_radius=int(doc.get("entropy_window_radius", 4)),
            min_text_height=int(doc.get("min_text_height", 10)),
            pipeline_workers=int(doc.get("pipeline_workers", 4)),
            analysis_workers=int(doc.get("analysis_workers", 2)),
            analysis_queue_limit=int(doc.get("analysis_queue_limit", 8)),
            sync_wait_s=float(doc.get("sync_wait_s", 60.0)),
            builtins_enable=tuple(builtins.get("enable", [])),
            builtins_disable=tuple(builtins.get("disable", [])),
            plugins=plugins,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def _plugin_from_doc(doc: dict) -> FilterDescriptor:
    command = doc.get("command")
    url = doc.get("url")
    if bool(command) == bool(url):
        raise ConfigError(f"plugin {doc.get('id')!r} needs exactly one of command/url")
    return FilterDescriptor(
        id=str(doc["id"]),
        title=str(doc.get("title", doc["id"])),
        section=str(doc.get("section", "custom")),
        kind="external",
        external=ExternalSpec(
            command=tuple(command) if command else None,
            url=url,
        ),
        timeout_ms=int(doc.get("timeout_ms", 30_000)),
        enabled=bool(doc.get("enabled", True)),
    )


def build_registry(cfg: AppConfig) -> FilterRegistry:
    """Default built-ins plus configured plugins, with enable/disable applied."""
    registry = default_registry()
    for filter_id in cfg.builtins_enable:
        registry.set_enabled(filter_id, True)
    for filter_id in cfg.builtins_disable:
        registry.set_enabled(filter_id, False)
    for desc in cfg.plugins:
        registry.register(desc)
    return registry


# ---------------------------------------------------------------------------
# Users file


def hash_password(password: str, salt: bytes) -> str:
    return hashlib.sha256(salt + password.encode("utf-8")).hexdigest()


def add_user(path: str | Path, username: str, password: str) -> None:
    """Create or update a user entry; creates the file when missing."""
    path = Path(path)
    doc = {"users": []}
    if path.exists():
        doc = json.loads(path.read_text("utf-8"))
    salt = secrets.token_bytes(16)
    entry = {
        "username": username,
        "salt": salt.hex(),
        "password_sha256": hash_password(password, salt),
    }
    doc["users"] = [u for u in doc["users"] if u["username"] != username] + [entry]
    path.write_text(json.dumps(doc, indent=2) + "\n", "utf-8")


def verify_user(path: str | Path | None, username: str, password: str) -> bool:
    if path is None or not Path(path).exists():
        return False
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError):
        return False
    for entry in doc.get("users", []):
        if entry.get("username") == username:
            expected = entry.get("password_sha256", "")
            actual = hash_password(password, bytes.fromhex(entry.get("salt", "")))
            return secrets.compare_digest(expected, actual)
    return False
