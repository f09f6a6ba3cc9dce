"""
Run artifact writers.

JSON for structured artifacts, CSV for plot-ready tables, JSON lines for
loop traces. Output is deterministic (sorted keys, fixed float repr) so two
runs with the same seed produce byte-identical files.
"""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def _to_builtin(value):
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    path.write_text(json.dumps(_to_builtin(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path, records) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    lines = [json.dumps(_to_builtin(record), sort_keys=True) for record in records]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def read_jsonl(path):
    text = Path(path).read_text(encoding="utf-8")
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def write_csv(path, rows, columns=None) -> Path:
    """Write a list of dicts (or a DataFrame) as CSV with a header row."""
    path = Path(path)
    ensure_dir(path.parent)
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(_to_builtin(list(rows)), columns=columns)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def read_csv(path) -> pd.DataFrame:
    return pd.read_csv(path)
