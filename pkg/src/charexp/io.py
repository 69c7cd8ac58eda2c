"""Deterministic CSV/JSON emission with an embedded metadata block."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def jsonable(o):
    """Convert numpy scalars, tuples and non-finite floats into plain JSON values."""
    if isinstance(o, dict):
        return {str(k): jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return jsonable(o.tolist())
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return jsonable(o.item())
    if isinstance(o, float) and not math.isfinite(o):
        return "inf" if o > 0 else ("-inf" if o < 0 else "nan")
    return o


def metadata(command: str, params: dict, seed: int | None = None) -> dict:
    """Metadata block: package version, command, seed and the full parameter set (no timestamps)."""
    return {"version": __version__, "command": command, "seed": seed, "params": jsonable(dict(sorted(params.items())))}


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def to_csv(header, rows, meta: dict | None = None) -> str:
    """RFC-4180 CSV with ``# key: value`` metadata lines ahead of the header row."""
    buf = io.StringIO()
    if meta:
        for k, v in meta.items():
            text = json.dumps(jsonable(v), sort_keys=True) if isinstance(v, (dict, list, tuple)) else _cell(v)
            buf.write(f"# {k}: {text}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def to_json(payload: dict, meta: dict | None = None) -> str:
    out = dict(jsonable(payload))
    if meta is not None:
        out["metadata"] = jsonable(meta)
    return json.dumps(out, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def read_csv_metadata(text: str) -> dict:
    meta = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        k, _, v = line[1:].partition(":")
        meta[k.strip()] = v.strip()
    return meta


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path
