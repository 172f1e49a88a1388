from __future__ import annotations

import csv
import json
from collections import Counter
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

REPORT_NAME = "report.json"
VERTICES_NAME = "vertices.csv"
CONSTRAINTS_NAME = "constraints.json"


def _private_dir(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    try:
        path.chmod(0o700)
    except OSError:
        pass


def _private_file(path: Path) -> None:
    try:
        path.chmod(0o600)
    except OSError:
        pass


def jsonable(value: Any) -> Any:
    """Plain JSON types; floats keep their shortest round-trip repr.

    Infinities become the strings ``"inf"``/``"-inf"`` and NaN becomes null.
    """
    if isinstance(value, Counter):
        return {str(key): int(count) for key, count in sorted(value.items())}
    if isinstance(value, Mapping):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if not np.isfinite(number):
            return None if np.isnan(number) else ("inf" if number > 0 else "-inf")
        return number
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Any) -> str:
    return json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, payload: Any) -> Path:
    _private_dir(path.parent)
    temporary = path.with_suffix(path.suffix + ".tmp")
    temporary.write_text(dumps(payload), encoding="utf-8")
    _private_file(temporary)
    temporary.replace(path)
    _private_file(path)
    return path


def write_vertices(path: Path, vertices: Sequence[Sequence[float]], axes: Sequence[str]) -> Path:
    _private_dir(path.parent)
    temporary = path.with_suffix(path.suffix + ".tmp")
    with temporary.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(axes))
        writer.writeheader()
        for vertex in vertices:
            writer.writerow({axis: repr(float(value)) for axis, value in zip(axes, vertex)})
    _private_file(temporary)
    temporary.replace(path)
    _private_file(path)
    return path


def read_vertices(path: Path) -> list[tuple[float, ...]]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        return [tuple(float(value) for value in row.values()) for row in csv.DictReader(handle)]
