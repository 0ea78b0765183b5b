"""Readers for the solver's file formats.

Deliberately implemented from the documented formats rather than by
importing the solver package: the files are the contract.

* trace CSV: header row with columns
  ``step,t,E_orig,E_mod,R,F_int,p_value,s_value,lambda0,kappa,dissipation,branch``
* convergence CSV: header ``dt,error,rate`` (rate empty on the first row)
* GFZF1 snapshot: one text header line
  ``GFZF1 <axes> <dims...> <extents...> <time> <model>`` then float64
  little-endian values, row-major.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRACE_COLUMNS = (
    "step", "t", "E_orig", "E_mod", "R", "F_int",
    "p_value", "s_value", "lambda0", "kappa", "dissipation", "branch",
)


class SchemaError(ValueError):
    """Input file does not match the documented format."""


@dataclass(frozen=True)
class Trace:
    label: str
    columns: dict  # name -> numpy array (branch is an object array)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]


@dataclass(frozen=True)
class SnapshotData:
    dims: tuple[int, ...]
    extents: tuple[float, ...]
    time: float
    model: str
    values: np.ndarray


def read_trace(path) -> Trace:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty trace file") from None
        missing = [c for c in TRACE_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        if tuple(header) != TRACE_COLUMNS:
            raise SchemaError(f"{path}: unexpected column order {header}")
        records = list(reader)
    if not records:
        raise SchemaError(f"{path}: trace has no rows")
    columns: dict = {"branch": np.array([r[11] for r in records], dtype=object)}
    columns["step"] = np.array([int(r[0]) for r in records])
    for i, name in enumerate(TRACE_COLUMNS[1:11], start=1):
        columns[name] = np.array([float(r[i]) for r in records])
    return Trace(label=path.stem, columns=columns)


def read_convergence(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["dt", "error", "rate"]:
            raise SchemaError(f"{path}: expected 'dt,error,rate' header")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: convergence table has no rows")
    dts = np.array([float(r[0]) for r in rows])
    errors = np.array([float(r[1]) for r in rows])
    rates = np.array([float(r[2]) if r[2].strip() else np.nan for r in rows])
    return dts, errors, rates


def read_snapshot(path) -> SnapshotData:
    blob = Path(path).read_bytes()
    newline = blob.find(b"\n")
    if newline < 0:
        raise SchemaError(f"{path}: snapshot has no header line")
    tokens = blob[:newline].decode("utf-8").split(" ")
    if not tokens or tokens[0] != "GFZF1":
        raise SchemaError(f"{path}: bad snapshot tag")
    try:
        axes = int(tokens[1])
        dims = tuple(int(x) for x in tokens[2:2 + axes])
        extents = tuple(float(x) for x in tokens[2 + axes:2 + 2 * axes])
        time = float(tokens[2 + 2 * axes])
        model = tokens[3 + 2 * axes]
    except (IndexError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed snapshot header") from exc
    payload = blob[newline + 1:]
    expected = 8 * int(np.prod(dims))
    if len(payload) != expected:
        raise SchemaError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(dims)
    return SnapshotData(dims, extents, time, model, values)
