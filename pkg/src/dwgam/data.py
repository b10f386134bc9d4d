"""Count-response datasets and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CONTINUOUS = "continuous"
DUMMY = "dummy"


class DataError(ValueError):
    """Malformed input data (bad cells, missing columns, invalid counts)."""


@dataclass
class Dataset:
    """Response counts plus named covariate columns tagged continuous/dummy."""

    y: np.ndarray
    covariates: dict[str, np.ndarray]
    kinds: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1:
            raise DataError("response must be one-dimensional")
        if y.size and (np.any(y < 0) or np.any(y != np.round(y))):
            raise DataError("response must contain non-negative integers")
        self.y = y.astype(np.int64)
        n = len(self.y)
        cols = {}
        for name, col in self.covariates.items():
            col = np.asarray(col, dtype=float)
            if col.shape != (n,):
                raise DataError(f"column {name!r} has length {col.size}, expected {n}")
            if not np.all(np.isfinite(col)):
                raise DataError(f"column {name!r} contains non-finite values")
            cols[name] = col
        self.covariates = cols
        kinds = dict(self.kinds)
        for name, col in cols.items():
            kinds.setdefault(name, DUMMY if _is_binary(col) else CONTINUOUS)
            if kinds[name] == DUMMY and not _is_binary(col):
                raise DataError(f"dummy column {name!r} must contain only 0/1")
            if kinds[name] not in (DUMMY, CONTINUOUS):
                raise DataError(f"unknown kind {kinds[name]!r} for {name!r}")
        self.kinds = {k: kinds[k] for k in cols}

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def names(self) -> list[str]:
        return list(self.covariates)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.covariates[name]
        except KeyError:
            raise DataError(f"missing column {name!r}") from None

    def subset(self, idx) -> Dataset:
        return Dataset(self.y[idx], {k: v[idx] for k, v in self.covariates.items()},
                       dict(self.kinds))

    def to_csv(self, path, response: str = "y", extra: dict | None = None):
        extra = extra or {}
        names = [response, *self.covariates, *extra]
        cols = [self.y, *self.covariates.values(), *extra.values()]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in zip(*cols):
                w.writerow([_fmt(v) for v in row])


def _is_binary(col) -> bool:
    return bool(np.all((col == 0) | (col == 1)))


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def read_csv(path, response: str = "y", columns=None, dummies=None,
             continuous=None, require_response: bool = True) -> Dataset:
    """Load a CSV with a header row.

    Empty, NaN or non-numeric cells raise :class:`DataError` naming the row
    and column. Covariates whose values are all 0/1 are tagged as dummies
    unless listed in ``continuous``; ``dummies`` forces the tag.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if require_response and response not in header:
        raise DataError(f"{path}: response column {response!r} not found")
    wanted = list(columns) if columns is not None else [h for h in header if h != response]
    for name in wanted:
        if name not in header:
            raise DataError(f"{path}: missing column {name!r}")
    index = {h: i for i, h in enumerate(header)}
    keep = ([response] if response in header else []) + wanted
    values = {name: np.empty(len(rows)) for name in keep}
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        for name in keep:
            cell = row[index[name]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {r}, column {name!r}: non-numeric cell {cell!r}") from None
            if math.isnan(v) or math.isinf(v):
                raise DataError(f"{path}: row {r}, column {name!r}: non-finite cell {cell!r}")
            values[name][r - 2] = v
    kinds = {}
    for name in wanted:
        if dummies and name in dummies:
            kinds[name] = DUMMY
        elif continuous and name in continuous:
            kinds[name] = CONTINUOUS
    y = values.pop(response) if response in values else np.zeros(len(rows), dtype=np.int64)
    if np.any(y < 0) or np.any(y != np.round(y)):
        bad = int(np.flatnonzero((y < 0) | (y != np.round(y)))[0]) + 2
        raise DataError(f"{path}: row {bad}, column {response!r}: response must be a non-negative integer")
    return Dataset(y, values, kinds)
