"""Conditional quantiles, moments and partial effects from a fitted model."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import CONTINUOUS, DUMMY, Dataset
from .distribution import MomentOptions, moments, quantile_rate
from .regression import FittedModel, design_pair


class ExtrapolationWarning(UserWarning):
    pass


def _as_dataset(m: FittedModel, x) -> Dataset:
    if isinstance(x, Dataset):
        data = x
    else:
        cols = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in dict(x).items()}
        n = max((v.size for v in cols.values()), default=1)
        cols = {k: np.broadcast_to(v, (n,)).copy() for k, v in cols.items()}
        kinds = {}
        for s in m.spec.q_specs + m.spec.beta_specs:
            if s.covariate in cols and s.kind == CONTINUOUS:
                kinds[s.covariate] = CONTINUOUS
        data = Dataset(np.zeros(n, dtype=np.int64), cols, kinds)
    missing = [c for c in m.spec.covariates if c not in data.covariates]
    if missing:
        raise KeyError(f"missing covariates: {missing}")
    for c, (lo, hi) in m.covariate_ranges.items():
        col = data.covariates[c]
        if np.any(col < lo) or np.any(col > hi):
            warnings.warn(f"{c}: values outside the training range [{lo:g}, {hi:g}]",
                          ExtrapolationWarning, stacklevel=3)
    return data


def predict_rates(m: FittedModel, x):
    """Per-row ``(-log q, beta)``; ``x`` is a Dataset or a mapping of columns."""
    return m.rates(_as_dataset(m, x))


def predict_params(m: FittedModel, x):
    """Per-row ``(q, beta)`` arrays."""
    lam, beta = predict_rates(m, x)
    return np.exp(-lam), beta


def _mstar(lam, beta, tau):
    return np.exp(np.log(-math.log1p(-tau) / lam) / beta) - 1.0


def predict_quantile(m: FittedModel, x, tau: float):
    """``(integer quantile, continuous quantile)`` per row."""
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    lam, beta = predict_rates(m, x)
    return quantile_rate(tau, lam, beta), _mstar(lam, beta, tau)


def predict_median(m: FittedModel, x) -> np.ndarray:
    return predict_quantile(m, x, 0.5)[0]


def predict_mean(m: FittedModel, x, opts: MomentOptions | None = None) -> np.ndarray:
    q, beta = predict_params(m, x)
    return np.array([moments(qi, bi, opts).mean for qi, bi in zip(q, beta)])


@dataclass
class EffectTable:
    """Partial effects on the continuous tau-quantile, one row per covariate.

    ``significant`` comes from delta-method standard errors at the 5% level
    and is approximate.
    """

    covariates: list[str]
    taus: np.ndarray
    values: np.ndarray
    se: np.ndarray | None = None

    @property
    def significant(self) -> np.ndarray | None:
        if self.se is None:
            return None
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.abs(self.values / self.se) > stats.norm.isf(0.025)

    def to_tsv(self, path=None, header_comment: str | None = None, digits: int = 4) -> str:
        lines = []
        if header_comment:
            lines.append(f"# {header_comment}")
        lines.append("\t".join(["covariate"] + [f"{t:g}" for t in self.taus]))
        sig = self.significant
        for i, c in enumerate(self.covariates):
            cells = []
            for j in range(len(self.taus)):
                cell = f"{self.values[i, j]:.{digits}f}"
                if sig is not None and sig[i, j]:
                    cell += "*"
                cells.append(cell)
            lines.append("\t".join([c] + cells))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def baseline_profile(m: FittedModel, data: Dataset) -> dict[str, float]:
    """Continuous covariates at their sample means, dummies at 0."""
    out = {}
    for c in m.spec.covariates:
        if data.kinds.get(c) == DUMMY:
            out[c] = 0.0
        else:
            out[c] = float(np.mean(data.column(c)))
    return out


def _quantile_and_grad(m: FittedModel, profile: dict, taus):
    """Continuous quantiles at one covariate profile and their coefficient gradients."""
    one = Dataset(np.zeros(1, dtype=np.int64), {k: np.array([v]) for k, v in profile.items()},
                  {s.covariate: s.kind for s in m.spec.q_specs + m.spec.beta_specs})
    d = design_pair(one, m.spec, m.scaling_record)
    xq, xb = d.q.columns[0], d.beta.columns[0]
    eta = xq @ m.theta
    zeta = xb @ m.vartheta
    beta = math.exp(zeta)
    vals, grads = [], []
    for tau in taus:
        g = (math.log(-math.log1p(-tau)) - eta) / beta  # log(mstar + 1)
        e = math.exp(g)
        vals.append(e - 1.0)
        d_theta = -e / beta * xq
        d_vartheta = -e * g * xb
        grads.append(d_theta if m.fixed_beta is not None else np.concatenate([d_theta, d_vartheta]))
    return np.array(vals), np.array(grads)


def partial_effects(m: FittedModel, data: Dataset, taus, covariates=None) -> EffectTable:
    """Change in the continuous tau-quantile for a one-unit increase of each covariate.

    The baseline profile sets continuous covariates to their sample means and
    dummies to 0.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any((taus <= 0) | (taus >= 1)) or np.any(np.diff(taus) <= 0):
        raise ValueError("taus must be strictly increasing inside (0, 1)")
    covariates = list(covariates) if covariates is not None else list(data.names)
    for c in covariates:
        if c not in data.covariates:
            raise KeyError(f"covariate {c!r} not found")
    base = baseline_profile(m, data)
    v0, g0 = _quantile_and_grad(m, base, taus)
    values = np.zeros((len(covariates), taus.size))
    se = np.full_like(values, np.nan) if m.covariance is not None else None
    cov = None
    if m.covariance is not None:
        cov = np.nan_to_num(m.covariance, nan=0.0)
    for i, c in enumerate(covariates):
        if c not in base:
            continue  # absent from both links: effect is exactly zero
        prof = dict(base)
        prof[c] = base[c] + 1.0
        v1, g1 = _quantile_and_grad(m, prof, taus)
        values[i] = v1 - v0
        if cov is not None:
            dg = g1 - g0
            se[i] = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", dg, cov, dg), 0.0))
    return EffectTable(covariates, taus, values, se)


@dataclass
class Interpretation:
    applicable: bool
    baseline: float | None = None
    slopes: dict[str, float] | None = None
    note: str = ""


def interpret_coefficients(m: FittedModel) -> Interpretation:
    """Log-median reading of a linear q-link with constant beta.

    ``(log log 2 - theta_0) / beta`` is ``log(median + 1)`` at zero covariates
    and ``-theta_p / beta`` its change per unit of covariate ``p``.
    """
    linear = all(s.degree <= 1 and s.num_knots == 0 for s in m.spec.q_specs)
    if m.spec.beta_specs or not linear:
        return Interpretation(False, note="beta varies with covariates or the q-link is "
                                          "non-linear; use partial effects instead")
    beta = math.exp(m.vartheta[0])
    base = (math.log(math.log(2.0)) - m.theta[0]) / beta
    slopes = {lab: -c / beta for lab, c in zip(m.q_labels[1:], m.theta[1:])}
    return Interpretation(True, base, slopes)


def quantile_curves(m: FittedModel, data: Dataset, covariate: str, taus, grid=None,
                    points: int = 50):
    """Continuous quantiles along ``covariate`` with the others at the baseline profile.

    Returns ``(grid, values)`` with ``values[i, j]`` the tau_j quantile at grid_i.
    """
    base = baseline_profile(m, data)
    if grid is None:
        col = data.column(covariate)
        grid = np.linspace(col.min(), col.max(), points)
    grid = np.asarray(grid, dtype=float)
    prof = {k: np.full(grid.size, v) for k, v in base.items()}
    prof[covariate] = grid
    vals = np.column_stack([predict_quantile(m, prof, t)[1] for t in taus])
    return grid, vals
