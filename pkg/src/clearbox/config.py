"""Configuration for the safekeeper server.

Three layers, strongest last when merging: config file (JSON), environment
variables (``CLEARBOX_*``), explicit overrides (CLI flags).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Optional, Union

__all__ = ["ServeConfig", "load_serve_config", "ENV_PREFIX"]

ENV_PREFIX = "CLEARBOX_"

_ENV_KEYS = {
    "listen": "CLEARBOX_LISTEN",
    "storage_backend": "CLEARBOX_STORAGE_BACKEND",
    "storage_path": "CLEARBOX_STORAGE_PATH",
    "authority_key_path": "CLEARBOX_AUTHORITY_KEY_PATH",
    "clock_skew_seconds": "CLEARBOX_CLOCK_SKEW_SECONDS",
}


@dataclass(frozen=True)
class ServeConfig:
    listen: str = "127.0.0.1:8787"
    storage_backend: str = "memory"
    storage_path: Optional[str] = None
    authority_key_path: Optional[str] = None
    clock_skew_seconds: int = 300

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def load_serve_config(
    config_path: Optional[Union[str, Path]] = None,
    env: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, object]] = None,
) -> ServeConfig:
    """Merge file, environment, and overrides (flags); the later wins."""
    env = os.environ if env is None else env
    merged: dict = {}
    if config_path is not None:
        data = json.loads(Path(config_path).read_text())
        if not isinstance(data, dict):
            raise ValueError(f"{config_path}: config must be a JSON object")
        known = {f.name for f in fields(ServeConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{config_path}: unknown config keys {sorted(unknown)}")
        merged.update(data)
    for field_name, env_key in _ENV_KEYS.items():
        if env_key in env and env[env_key] != "":
            merged[field_name] = env[env_key]
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    if "clock_skew_seconds" in merged:
        merged["clock_skew_seconds"] = int(merged["clock_skew_seconds"])
    config = ServeConfig(**merged)
    if config.storage_backend not in ("memory", "jsonl"):
        raise ValueError(f"unknown storage backend {config.storage_backend!r}")
    if config.storage_backend == "jsonl" and not config.storage_path:
        raise ValueError("storage_path is required for the jsonl backend")
    if not config.authority_key_path:
        raise ValueError("authority_key_path is required")
    return config
