"""Truncated-power polynomial/spline bases for the regression links.

A covariate with degree ``D`` and knots ``g_1 < ... < g_K`` contributes the
columns ``x, x**2, ..., x**D, (x - g_1)**D * I(x > g_1), ..., (x - g_K)**D *
I(x > g_K)``. The constant term is shared: every design has exactly one
intercept column, placed first.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import CONTINUOUS, DUMMY, DataError, Dataset

INTERCEPT = "(Intercept)"


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class CovariateSpec:
    """Basis configuration for one covariate in one link."""

    covariate: str
    kind: str = CONTINUOUS
    degree: int = 1
    num_knots: int = 0
    knots: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, DUMMY):
            raise BasisError(f"{self.covariate}: unknown kind {self.kind!r}")
        if self.degree < 0 or self.num_knots < 0:
            raise BasisError(f"{self.covariate}: degree and num_knots must be >= 0")
        if self.kind == DUMMY and (self.degree > 1 or self.num_knots > 0):
            raise BasisError(f"{self.covariate}: dummy covariates allow degree <= 1 and no knots")
        if self.num_knots > 0 and self.degree < 1:
            raise BasisError(f"{self.covariate}: knots require degree >= 1")
        if self.knots is not None:
            knots = tuple(float(k) for k in self.knots)
            object.__setattr__(self, "knots", knots)
            if len(knots) != self.num_knots:
                raise BasisError(f"{self.covariate}: {len(knots)} knots given, num_knots={self.num_knots}")
            if any(b <= a for a, b in zip(knots, knots[1:])):
                raise BasisError(f"{self.covariate}: knots must be strictly increasing")

    @property
    def n_columns(self) -> int:
        return self.degree + self.num_knots

    def labels(self) -> list[str]:
        out = [self.covariate if d == 1 else f"{self.covariate}^{d}"
               for d in range(1, self.degree + 1)]
        out += [f"{self.covariate}:knot{k}" for k in range(1, self.num_knots + 1)]
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["knots"] = list(self.knots) if self.knots is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> CovariateSpec:
        knots = d.get("knots")
        return cls(d["covariate"], d.get("kind", CONTINUOUS), int(d.get("degree", 1)),
                   int(d.get("num_knots", 0)), tuple(knots) if knots is not None else None)


@dataclass
class DesignMatrix:
    columns: np.ndarray
    column_labels: list[str]
    intercept_included: bool = True

    @property
    def shape(self):
        return self.columns.shape


@dataclass(frozen=True)
class Scaling:
    """Min-max transform ``(x - lo) / (hi - lo)`` per continuous covariate."""

    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    @classmethod
    def fit(cls, data: Dataset, names) -> Scaling:
        ranges = {}
        for name in names:
            if data.kinds.get(name) != CONTINUOUS:
                continue
            col = data.column(name)
            lo, hi = float(col.min()), float(col.max())
            if hi > lo:
                ranges[name] = (lo, hi)
        return cls(ranges)

    def apply(self, name: str, x):
        if name not in self.ranges:
            return np.asarray(x, dtype=float)
        lo, hi = self.ranges[name]
        return (np.asarray(x, dtype=float) - lo) / (hi - lo)

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.ranges.items()}

    @classmethod
    def from_dict(cls, d: dict | None) -> Scaling | None:
        if d is None:
            return None
        return cls({k: (float(v[0]), float(v[1])) for k, v in d.items()})


def place_knots(x, num_knots: int) -> np.ndarray:
    """Knots at the ``j / (K + 1)`` empirical quantiles of ``x``.

    Knots that coincide with each other or with the extremes of ``x`` are
    moved to the midpoint between the previous knot (or the minimum) and the
    next distinct data value, so the result is strictly increasing and
    strictly inside the observed range.
    """
    x = np.asarray(x, dtype=float)
    if num_knots < 1:
        raise BasisError("num_knots must be >= 1")
    distinct = np.unique(x)
    if distinct.size < num_knots + 2:
        raise BasisError(
            f"need at least {num_knots + 2} distinct values to place {num_knots} knots, "
            f"got {distinct.size}")
    raw = np.quantile(x, np.arange(1, num_knots + 1) / (num_knots + 1))
    lo, hi = distinct[0], distinct[-1]
    knots = []
    prev = lo
    for k in raw:
        if k <= prev or k >= hi:
            nxt = distinct[distinct > prev][0]
            k = 0.5 * (prev + nxt)
        knots.append(k)
        prev = k
    return np.array(knots)


def basis_columns(x, spec: CovariateSpec) -> np.ndarray:
    """Column block ``[x^1..x^D, (x-g_k)^D I(x>g_k)]`` for one covariate."""
    x = np.asarray(x, dtype=float)
    if spec.num_knots and spec.knots is None:
        raise BasisError(f"{spec.covariate}: knots not resolved")
    cols = [x ** d for d in range(1, spec.degree + 1)]
    for g in spec.knots or ():
        cols.append(np.where(x > g, (x - g) ** spec.degree, 0.0))
    if not cols:
        return np.empty((x.size, 0))
    return np.column_stack(cols)


def resolve_knots(data: Dataset, specs, scaling: Scaling | None = None) -> list[CovariateSpec]:
    """Fill in missing knot vectors by quantile placement (on the scaled axis)."""
    out = []
    for s in specs:
        if s.num_knots and s.knots is None:
            x = data.column(s.covariate)
            if scaling is not None:
                x = scaling.apply(s.covariate, x)
            s = CovariateSpec(s.covariate, s.kind, s.degree, s.num_knots,
                              tuple(place_knots(x, s.num_knots)))
        out.append(s)
    return out


def build_design(data: Dataset, specs, scaling: Scaling | None = None) -> DesignMatrix:
    """Intercept followed by each covariate's basis block.

    Knots, when present, are on the scaled axis if ``scaling`` is given.
    """
    n = data.n
    blocks = [np.ones((n, 1))]
    labels = [INTERCEPT]
    seen = set()
    for s in specs:
        if s.covariate in seen:
            raise BasisError(f"covariate {s.covariate!r} listed twice")
        seen.add(s.covariate)
        if s.covariate not in data.covariates:
            raise DataError(f"missing column {s.covariate!r}")
        x = data.column(s.covariate)
        if scaling is not None:
            x = scaling.apply(s.covariate, x)
        blocks.append(basis_columns(x, s))
        labels.extend(s.labels())
    return DesignMatrix(np.hstack(blocks), labels, True)


def aliased_columns(X: np.ndarray) -> list[int]:
    """Indices of columns that are linearly dependent on earlier ones.

    The rank comes from a column-pivoted QR of the column-normalized design;
    only when it is deficient are columns scanned in order to decide which
    to drop, so the intercept and lower-order terms are kept preferentially.
    """
    from scipy.linalg import qr

    p = X.shape[1]
    if p == 0:
        return []
    norms = np.linalg.norm(X, axis=0)
    Xn = X / np.where(norms > 0, norms, 1.0)
    r = qr(Xn, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(r))
    tol = max(X.shape) * np.finfo(float).eps * 1e3 * (d[0] if d.size else 1.0)
    rank = int(np.sum(d > tol))
    if rank == p:
        return []
    kept, dropped = [], []
    for j in range(p):
        trial = Xn[:, kept + [j]]
        if norms[j] > 0 and np.linalg.matrix_rank(trial, tol=tol) == len(kept) + 1:
            kept.append(j)
        else:
            dropped.append(j)
    return dropped
