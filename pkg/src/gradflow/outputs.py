"""Bit-defined output formats: trace CSV, GFZF1 snapshots, run manifest.

These files are the only contract between the solver and the report
renderer, so their layout is fixed:

* trace CSV: RFC-4180, header row, columns exactly
  ``step,t,E_orig,E_mod,R,F_int,p_value,s_value,lambda0,kappa,dissipation,branch``
* GFZF1 snapshot: one UTF-8 header line
  ``GFZF1 <axes> <dims...> <extents...> <time> <model>`` followed by the
  field payload as 64-bit little-endian reals in row-major order
* manifest: UTF-8 ``key = value`` lines

Floats are written with ``repr`` (shortest round-trip form), so a re-read
recovers them bit for bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .spectral import Field, make_grid

TRACE_COLUMNS = (
    "step", "t", "E_orig", "E_mod", "R", "F_int",
    "p_value", "s_value", "lambda0", "kappa", "dissipation", "branch",
)

SNAPSHOT_TAG = "GFZF1"


class SnapshotFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Snapshot:
    field: Field
    time: float
    model: str

    def __post_init__(self):
        if " " in self.model or not self.model:
            raise ValueError("snapshot model tag must be a single token")


def format_trace_row(step: int, t: float, report) -> list[str]:
    return [
        str(step),
        repr(float(t)),
        repr(float(report.e_orig)),
        repr(float(report.e_mod)),
        repr(float(report.r_new)),
        repr(float(report.f_int)),
        repr(float(report.p_value)),
        repr(float(report.s_value)),
        repr(float(report.lambda0)),
        repr(float(report.kappa)),
        repr(float(report.dissipation)),
        report.branch,
    ]


def write_trace(path, rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        writer.writerows(rows)


def read_trace(path) -> list[dict]:
    """Parse a trace CSV back into typed row dicts."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns {header}")
        rows = []
        for record in reader:
            row: dict = {"step": int(record[0]), "branch": record[11]}
            for name, text in zip(TRACE_COLUMNS[1:11], record[1:11]):
                row[name] = float(text)
            rows.append(row)
    return rows


def write_snapshot(snapshot: Snapshot) -> bytes:
    grid = snapshot.field.grid
    header = " ".join(
        [
            SNAPSHOT_TAG,
            str(grid.ndim),
            *[str(d) for d in grid.dims],
            *[repr(float(l)) for l in grid.extents],
            repr(float(snapshot.time)),
            snapshot.model,
        ]
    )
    payload = np.ascontiguousarray(snapshot.field.values, dtype="<f8").tobytes()
    return header.encode("utf-8") + b"\n" + payload


def read_snapshot(blob: bytes) -> Snapshot:
    newline = blob.find(b"\n")
    if newline < 0:
        raise SnapshotFormatError("snapshot has no header line")
    tokens = blob[:newline].decode("utf-8").split(" ")
    if not tokens or tokens[0] != SNAPSHOT_TAG:
        raise SnapshotFormatError(f"bad snapshot tag {tokens[:1]}")
    try:
        axes = int(tokens[1])
        dims = tuple(int(x) for x in tokens[2:2 + axes])
        extents = tuple(float(x) for x in tokens[2 + axes:2 + 2 * axes])
        time = float(tokens[2 + 2 * axes])
        model = tokens[3 + 2 * axes]
    except (IndexError, ValueError) as exc:
        raise SnapshotFormatError(f"malformed snapshot header: {exc}") from exc
    if len(tokens) != 4 + 2 * axes:
        raise SnapshotFormatError("snapshot header has trailing tokens")
    payload = blob[newline + 1:]
    expected = 8 * int(np.prod(dims))
    if len(payload) != expected:
        raise SnapshotFormatError(
            f"snapshot payload is {len(payload)} bytes, expected {expected}"
        )
    grid = make_grid(dims, extents)
    values = np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)
    return Snapshot(Field(grid, values), time, model)


def save_snapshot(path, snapshot: Snapshot) -> None:
    with open(path, "wb") as handle:
        handle.write(write_snapshot(snapshot))


def load_snapshot(path) -> Snapshot:
    with open(path, "rb") as handle:
        return read_snapshot(handle.read())


def write_manifest(path, items: list[tuple[str, str]]) -> None:
    buffer = io.StringIO()
    for key, value in items:
        buffer.write(f"{key} = {value}\n")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(buffer.getvalue())
