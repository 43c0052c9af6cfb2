"""Run-directory persistence: JSON reports, CSV profiles, manifests.

JSON floats use Python's shortest round-trip repr; CSV floats carry 17
significant digits. Writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .discretization import Field, Grid2D
from .errors import OutputError, ValidationError

logger = logging.getLogger(__name__)

CSV_FLOAT = "{:.17g}"


def ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write_text(path: Path, text: str) -> Path:
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, payload: dict) -> Path:
    return _write_text(path, json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> Optional[dict]:
    if not path.is_file():
        return None
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([CSV_FLOAT.format(float(x)) if not isinstance(x, (int, np.integer)) else int(x)
                         for x in row])
    return _write_text(path, buf.getvalue())


def write_manifest(path: Path, text: str) -> Path:
    return _write_text(path, text)


# ---- fields ----

def solution_rows(field: Field, u: np.ndarray):
    x1, x2 = field.grid.coords
    return zip(x1.ravel(), x2.ravel(), field.values.ravel(), u.ravel())


def radial_rows(field: Field, u: np.ndarray):
    return zip(field.grid.r, field.values, u)


def read_solution(path: Path, grid: Grid2D) -> Field:
    """Inverse of the solution.csv writer (columns x1,x2,v,u, row-major)."""
    if not path.is_file():
        raise ValidationError(f"missing {path}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if data.shape != (grid.n * grid.n, 4):
        raise ValidationError(f"{path} does not match a {grid.n}x{grid.n} grid")
    return Field(grid, data[:, 2].reshape(grid.shape))
