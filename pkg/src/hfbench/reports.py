"""Deterministic report emission: canonical JSON and CSV tables.

The JSON bundle is written with sorted keys and no timestamps, so two
runs with the same configuration and seed produce byte-identical files.
CSV tables carry the configuration hash in a leading ``#`` comment line;
read them back with ``pandas.read_csv(path, comment="#")``.
"""

from __future__ import annotations

import json
from pathlib import Path

import pandas as pd


def canonical_json(payload: dict) -> str:
    """Serialise with sorted keys and stable float formatting."""
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(canonical_json(payload))
    return path


def write_csv(path: str | Path, frame: pd.DataFrame, config_hash: str) -> Path:
    path = Path(path)
    body = frame.to_csv()
    path.write_text(f"# config_hash={config_hash}\n{body}")
    return path
