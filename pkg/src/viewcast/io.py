"""Shared output helpers: module loggers, CSV results, manifests and JSON reports."""

from __future__ import annotations

import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Union

import pandas as pd

UTC = timezone.utc

PathLike = Union[str, Path]

PACKAGE_LOGGER = "viewcast"
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s %(name)s [%(levelname)s] %(message)s",
)
logging.getLogger(PACKAGE_LOGGER).setLevel(logging.INFO)


def get_logger(name: str) -> logging.Logger:
    """Return a module-level logger; its level follows the package logger."""
    return logging.getLogger(name)


def set_log_level(level: str) -> None:
    """Apply a level name such as ``"DEBUG"`` to every viewcast logger."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"unknown log level {level!r}")
    logging.getLogger(PACKAGE_LOGGER).setLevel(numeric)


def csv_bytes(df: pd.DataFrame) -> bytes:
    """Render a DataFrame as UTF-8 CSV with a header row and '.' decimals."""
    if not isinstance(df, pd.DataFrame):
        raise TypeError("csv_bytes expects a pandas.DataFrame")
    return df.to_csv(index=False, float_format="%.12g").encode("utf-8")


def write_csv(df: pd.DataFrame, path: PathLike) -> bytes:
    """
    Serialize a DataFrame to UTF-8 CSV at ``path``, creating parent directories.

    Returns the bytes written so callers can hash them into a manifest.
    """
    payload = csv_bytes(df)
    path_obj = Path(path)
    path_obj.parent.mkdir(parents=True, exist_ok=True)
    path_obj.write_bytes(payload)
    return payload


def write_manifest(path: PathLike, meta: dict[str, Any]) -> Path:
    """Write a manifest.json adjacent to the provided file or inside the directory."""
    manifest_payload = json.dumps(meta, indent=2, sort_keys=True).encode("utf-8")
    path_obj = Path(path)
    if path_obj.suffix:
        manifest_path = path_obj.parent / "manifest.json"
    else:
        manifest_path = path_obj / "manifest.json"
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_bytes(manifest_payload)
    return manifest_path


def write_json(path: PathLike, payload: dict[str, Any]) -> None:
    """Write a JSON document with sorted keys and a trailing newline."""
    path_obj = Path(path)
    path_obj.parent.mkdir(parents=True, exist_ok=True)
    path_obj.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def hash_bytes_md5(data: bytes) -> str:
    """Return hex digest of the provided bytes using MD5."""
    return hashlib.md5(data, usedforsecurity=False).hexdigest()  # noqa: S324


def sizeof_bytes(data: bytes) -> int:
    """Return byte length of the provided payload."""
    return len(data)


def utc_now_iso() -> str:
    """Return current UTC time as ISO-8601 string with Z suffix."""
    return datetime.now(UTC).replace(microsecond=0).isoformat().replace("+00:00", "Z")
