"""File formats: data CSVs, JSON documents, run manifests."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_data_csv(path, data: np.ndarray, names: Optional[Sequence[str]] = None) -> None:
    """Header of variable names, then one row per observation (``repr`` precision round-trips)."""
    data = np.asarray(data, dtype=float)
    if names is None:
        names = [f"y{i + 1}" for i in range(data.shape[1])]
    lines = [",".join(names)]
    lines += [",".join(repr(float(v)) for v in row) for row in data]
    write_atomic(path, "\n".join(lines) + "\n")


def read_data_csv(path) -> tuple[np.ndarray, list]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty data file")
    names = [s.strip() for s in rows[0]]
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(names):
        raise ValueError(f"{path}: rows do not match the {len(names)}-column header")
    return data, names


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def write_manifest(out_dir, command: str, config: dict, seed: int, inputs: dict, stats, started: str) -> dict:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "inputs": {name: file_digest(p) for name, p in inputs.items()},
        "stats": stats,
        "started": started,
        "finished": now(),
    }
    write_json(Path(out_dir) / "manifest.json", manifest)
    return manifest


def write_irf_draws(path, values: np.ndarray) -> None:
    """Raw tensor ``(draw, variable, shock, horizon)`` as little-endian float64, C order."""
    np.ascontiguousarray(values, dtype="<f8").tofile(path)


def read_irf_draws(path, n: int, m: int, H: int) -> np.ndarray:
    return np.fromfile(path, dtype="<f8").reshape(-1, n, m, H + 1)
