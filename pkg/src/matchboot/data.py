"""Dataset container, validation helpers, and CSV input/output.

The on-disk format is a plain CSV with one header row. Columns are
``x1..xm`` (covariates), ``d`` (binary treatment label), and ``y``
(outcome), in any order. Diagnostics name the offending row (1-based,
counting data rows only) and column.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass

import numpy as np


class InputError(ValueError):
    """Raised when user-supplied data or parameters violate a contract."""


def _as_float_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise InputError(f"covariates must be a 1-D or 2-D array, got ndim={x.ndim}")
    return x


@dataclass(frozen=True)
class Dataset:
    """Immutable treatment-outcome sample.

    Attributes:
        x: (n, m) float64 covariate matrix.
        d: (n,) int64 treatment labels, each 0 or 1.
        y: (n,) float64 outcomes.
    """

    x: np.ndarray
    d: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_float_matrix(self.x)
        d = np.asarray(self.d)
        y = np.asarray(self.y, dtype=np.float64)
        if d.ndim != 1 or y.ndim != 1:
            raise InputError("treatment and outcome must be 1-D arrays")
        n = x.shape[0]
        if n == 0:
            raise InputError("dataset is empty")
        if x.shape[1] == 0:
            raise InputError("dataset has no covariate columns")
        if d.shape[0] != n or y.shape[0] != n:
            raise InputError(
                f"length mismatch: x has {n} rows, d has {d.shape[0]}, y has {y.shape[0]}"
            )
        if not np.isfinite(x).all():
            i, j = np.argwhere(~np.isfinite(x))[0]
            raise InputError(f"non-finite value at row {i + 1}, column x{j + 1}")
        if not np.isfinite(y).all():
            i = int(np.flatnonzero(~np.isfinite(y))[0])
            raise InputError(f"non-finite value at row {i + 1}, column y")
        d_float = np.asarray(d, dtype=np.float64)
        if not np.isfinite(d_float).all() or not np.isin(d_float, (0.0, 1.0)).all():
            bad = ~(np.isfinite(d_float) & np.isin(d_float, (0.0, 1.0)))
            i = int(np.flatnonzero(bad)[0])
            raise InputError(f"non-binary treatment at row {i + 1}, column d")
        d = d_float.astype(np.int64)
        x = np.ascontiguousarray(x)
        y = np.ascontiguousarray(y)
        for arr in (x, d, y):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]

    @property
    def n_treated(self) -> int:
        return int(np.sum(self.d == 1))

    @property
    def n_control(self) -> int:
        return int(np.sum(self.d == 0))


def as_dataset(x, d, y) -> Dataset:
    """Validate and wrap raw arrays into a Dataset."""
    return Dataset(x=x, d=d, y=y)


@dataclass(frozen=True)
class TreatmentSplit:
    """Index sets of the two arms, each sorted ascending."""

    treated_idx: np.ndarray
    control_idx: np.ndarray

    def arm(self, omega: int) -> np.ndarray:
        return self.treated_idx if omega == 1 else self.control_idx


def split(ds: Dataset) -> TreatmentSplit:
    """Partition unit indices by treatment label."""
    treated = np.flatnonzero(ds.d == 1)
    control = np.flatnonzero(ds.d == 0)
    for arr in (treated, control):
        arr.setflags(write=False)
    return TreatmentSplit(treated_idx=treated, control_idx=control)


_X_COL = re.compile(r"^x([1-9][0-9]*)$")


def _parse_header(header: list[str]) -> tuple[list[int], int, int, int]:
    names = [h.strip() for h in header]
    x_slots: dict[int, int] = {}
    d_col = -1
    y_col = -1
    for j, name in enumerate(names):
        match = _X_COL.match(name)
        if match:
            k = int(match.group(1))
            if k in x_slots:
                raise InputError(f"duplicate column x{k}")
            x_slots[k] = j
        elif name == "d":
            if d_col >= 0:
                raise InputError("duplicate column d")
            d_col = j
        elif name == "y":
            if y_col >= 0:
                raise InputError("duplicate column y")
            y_col = j
        else:
            raise InputError(f"unknown column {name!r}; expected x1..xm, d, y")
    if d_col < 0:
        raise InputError("missing column d")
    if y_col < 0:
        raise InputError("missing column y")
    if not x_slots:
        raise InputError("missing covariate columns x1..xm")
    m = max(x_slots)
    missing = sorted(set(range(1, m + 1)) - set(x_slots))
    if missing:
        raise InputError(f"missing column x{missing[0]}")
    return [x_slots[k] for k in range(1, m + 1)], d_col, y_col, len(names)


def _parse_cell(raw: str, row: int, col: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise InputError(f"unparseable value {raw!r} at row {row}, column {col}") from None
    if not math.isfinite(value):
        raise InputError(f"non-finite value at row {row}, column {col}")
    return value


def load_csv(path) -> Dataset:
    """Read a dataset from a CSV file with columns x1..xm, d, y."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"empty file: {path}") from None
        x_cols, d_col, y_col, width = _parse_header(header)
        m = len(x_cols)
        x_rows: list[list[float]] = []
        d_vals: list[int] = []
        y_vals: list[float] = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != width:
                raise InputError(
                    f"row {row_no} has {len(row)} fields, expected {width}"
                )
            x_rows.append(
                [_parse_cell(row[c], row_no, f"x{k + 1}") for k, c in enumerate(x_cols)]
            )
            d_raw = _parse_cell(row[d_col], row_no, "d")
            if d_raw not in (0.0, 1.0):
                raise InputError(f"non-binary treatment at row {row_no}, column d")
            d_vals.append(int(d_raw))
            y_vals.append(_parse_cell(row[y_col], row_no, "y"))
    if not x_rows:
        raise InputError(f"no data rows in {path}")
    return Dataset(
        x=np.array(x_rows, dtype=np.float64).reshape(len(x_rows), m),
        d=np.array(d_vals, dtype=np.int64),
        y=np.array(y_vals, dtype=np.float64),
    )


def write_csv(ds: Dataset, path) -> None:
    """Write a dataset as CSV; floats use shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k + 1}" for k in range(ds.m)] + ["d", "y"])
        for i in range(ds.n):
            writer.writerow(
                [repr(float(v)) for v in ds.x[i]]
                + [str(int(ds.d[i])), repr(float(ds.y[i]))]
            )
