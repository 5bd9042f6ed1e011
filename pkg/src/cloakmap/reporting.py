"""Deterministic result serialization: JSON envelopes, CSV tables, atomic writes.

Every artifact embeds the schema version and the full configuration that
produced it, and every float is rendered in shortest round-trip decimal form,
so identical configurations yield byte-identical files.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

SCHEMA_VERSION = "1"


def as_builtin(obj):
    """Recursively convert numpy scalars/arrays to plain Python values."""
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [as_builtin(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): as_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [as_builtin(v) for v in obj]
    return obj


def format_float(x) -> str:
    """Shortest decimal string that round-trips to the same binary64 value."""
    return repr(float(x))


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    text = str(value)
    if any(ch in text for ch in ",\n\r\""):
        raise ValueError(f"CSV cell {text!r} needs quoting, which this format forbids")
    return text


def _timestamp() -> str | None:
    # Wall-clock time would break byte-identical reruns; only an explicit
    # SOURCE_DATE_EPOCH (the reproducible-builds convention) is honored.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


@dataclass(frozen=True)
class ResultEnvelope:
    """Versioned container for one command's outputs."""

    schema_version: str
    config: dict
    timestamp: str | None
    results: dict

    @classmethod
    def build(cls, config: dict, results: dict) -> "ResultEnvelope":
        return cls(SCHEMA_VERSION, as_builtin(config), _timestamp(), as_builtin(results))

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "config": self.config,
            "timestamp": self.timestamp,
            "results": self.results,
        }
        return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text_atomic(path: str, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_comment(config: dict) -> str:
    items = " ".join(f"{k}={v}" for k, v in sorted(as_builtin(config).items()))
    return f"# schema_version={SCHEMA_VERSION}\n# config: {items}\n"


def csv_text(header: list, rows, config: dict | None = None) -> str:
    """CSV with '.' decimals, '\\n' newlines, a mandatory header row, and the
    reproducibility preamble as '#' comment lines."""
    lines = []
    if config is not None:
        lines.append(config_comment(config))
    lines.append(",".join(format_cell(h) for h in header) + "\n")
    for row in rows:
        lines.append(",".join(format_cell(cell) for cell in row) + "\n")
    return "".join(lines)


def write_csv_atomic(path: str, header: list, rows, config: dict | None = None) -> None:
    write_text_atomic(path, csv_text(header, rows, config))


def write_json_atomic(path: str, envelope: ResultEnvelope) -> None:
    write_text_atomic(path, envelope.to_json())
