"""Design reports and file round-trips (JSON reports, CSV matrices).

Every report carries the content hash of the covariate matrix it was
computed from plus a full parameter echo, so a stored allocation can be
re-evaluated against the right input later.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .covariates import matrix_hash
from .objective import Allocation

METHODS = ("EXACT", "LB_APPROX", "RAND")


@dataclass(frozen=True, eq=False)
class DesignReport:
    """Outcome of one design run, ready for serialization."""

    method: str
    allocation: Allocation
    surrogate_value: float
    original_value: float | None
    status: str
    wall_time: float
    seed: int
    n: int
    p: int
    matrix_sha256: str
    diagnostics: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.allocation.n != self.n:
            raise ValueError("allocation length disagrees with n")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "allocation": [int(v) for v in self.allocation.x],
            "surrogate_value": float(self.surrogate_value),
            "original_value": (
                None if self.original_value is None else float(self.original_value)
            ),
            "status": self.status,
            "wall_time": float(self.wall_time),
            "seed": int(self.seed),
            "n": int(self.n),
            "p": int(self.p),
            "matrix_sha256": self.matrix_sha256,
            "diagnostics": _plain(self.diagnostics),
            "parameters": _plain(self.parameters),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, doc: dict) -> "DesignReport":
        return cls(
            method=doc["method"],
            allocation=Allocation.from_signs(doc["allocation"]),
            surrogate_value=float(doc["surrogate_value"]),
            original_value=(
                None if doc.get("original_value") is None else float(doc["original_value"])
            ),
            status=doc["status"],
            wall_time=float(doc["wall_time"]),
            seed=int(doc["seed"]),
            n=int(doc["n"]),
            p=int(doc["p"]),
            matrix_sha256=doc["matrix_sha256"],
            diagnostics=doc.get("diagnostics", {}),
            parameters=doc.get("parameters", {}),
        )

    @classmethod
    def load(cls, path) -> "DesignReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _plain(value):
    """Recursively convert numpy scalars and arrays for JSON."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# CSV round-trips


def write_matrix_csv(path, matrix, columns: tuple[str, ...] | None = None) -> None:
    arr = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if columns is not None:
            if len(columns) != arr.shape[1]:
                raise ValueError("column count disagrees with matrix width")
            writer.writerow(columns)
        for row in arr:
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    """Read a numeric CSV, skipping a header row when one is present."""
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ValueError(f"{path}: empty file")
    start = 0
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        start = 1
    if start == len(rows):
        raise ValueError(f"{path}: no data rows")
    return np.array([[float(v) for v in row] for row in rows[start:]])


def write_allocation_csv(path, allocation: Allocation) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "sign"])
        for i, v in enumerate(allocation.x):
            writer.writerow([i, int(v)])


def read_allocation_csv(path) -> Allocation:
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != ["index", "sign"]:
        raise ValueError(f"{path}: expected an 'index,sign' header")
    signs = np.empty(len(rows) - 1, dtype=np.int64)
    for row in rows[1:]:
        signs[int(row[0])] = int(row[1])
    return Allocation(signs)


__all__ = [
    "DesignReport",
    "matrix_hash",
    "read_allocation_csv",
    "read_matrix_csv",
    "write_allocation_csv",
    "write_matrix_csv",
]
