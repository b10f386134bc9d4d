"""Poisson and negative binomial comparison models on the same bases.

The negative binomial uses the mean/dispersion form with
``Var(Y) = mu + sigma * mu**2`` and log links on both ``mu`` and ``sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .basis import build_design, resolve_knots
from .data import Dataset
from .optimize import bfgs, fd_hessian
from .regression import FitError, _column_scale, _covariance


@dataclass
class PoissonFit:
    coef: np.ndarray
    covariance: np.ndarray | None
    loglik: float
    specs: list
    labels: list[str]
    converged: bool

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.coef.size

    def mean(self, data: Dataset) -> np.ndarray:
        X = build_design(data, self.specs).columns
        return np.exp(X @ self.coef)

    def quantile(self, data: Dataset, tau: float) -> np.ndarray:
        return stats.poisson.ppf(tau, self.mean(data)).astype(np.int64)


@dataclass
class NegBinFit:
    coef_mu: np.ndarray
    coef_sigma: np.ndarray
    covariance: np.ndarray | None
    loglik: float
    mu_specs: list
    sigma_specs: list
    mu_labels: list[str]
    sigma_labels: list[str]
    converged: bool

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * (self.coef_mu.size + self.coef_sigma.size)

    def params(self, data: Dataset):
        mu = np.exp(build_design(data, self.mu_specs).columns @ self.coef_mu)
        sigma = np.exp(build_design(data, self.sigma_specs).columns @ self.coef_sigma)
        return mu, sigma

    def quantile(self, data: Dataset, tau: float) -> np.ndarray:
        mu, sigma = self.params(data)
        return nb_quantile(tau, mu, sigma)


def nb_dist(mu, sigma):
    """scipy ``nbinom`` with mean ``mu`` and variance ``mu + sigma * mu**2``."""
    r = 1.0 / np.asarray(sigma, dtype=float)
    return stats.nbinom(r, r / (r + np.asarray(mu, dtype=float)))


def nb_quantile(tau, mu, sigma) -> np.ndarray:
    return nb_dist(mu, sigma).ppf(tau).astype(np.int64)


def fit_poisson(data: Dataset, specs, max_iter: int = 100) -> PoissonFit:
    """Poisson log-linear MLE by Newton-Raphson with step halving."""
    specs = resolve_knots(data, specs)
    design = build_design(data, specs)
    X = design.columns
    s = _column_scale(X)
    Xs = X / s
    y = data.y.astype(float)
    b = np.zeros(X.shape[1])
    b[0] = math.log(max(y.mean(), 1e-3))

    def nll(b):
        eta = Xs @ b
        if np.any(eta > 700):
            return math.inf
        return float(np.sum(np.exp(eta) - y * eta + special.gammaln(y + 1)))

    f = nll(b)
    converged = False
    for _ in range(max_iter):
        mu = np.exp(Xs @ b)
        g = Xs.T @ (mu - y)
        H = (Xs * mu[:, None]).T @ Xs
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        while True:
            f_new = nll(b - t * step)
            if f_new <= f + 1e-12 * abs(f):
                break
            t *= 0.5
            if t < 1e-10:
                break
        b = b - t * step
        done = abs(f - f_new) < 1e-12 * max(abs(f_new), 1.0) or np.max(np.abs(g)) < 1e-8
        f = f_new
        if done:
            converged = True
            break
    mu = np.exp(Xs @ b)
    cov, _ = _covariance((Xs * mu[:, None]).T @ Xs)
    if cov is not None:
        cov = cov / np.outer(s, s)
    return PoissonFit(b / s, cov, -f, specs, design.column_labels, converged)


class _NBObjective:
    def __init__(self, y, Xm, Xs):
        self.y = np.asarray(y, dtype=float)
        self.Xm, self.Xs = Xm, Xs
        self.km = Xm.shape[1]
        self.const = special.gammaln(self.y + 1)

    def __call__(self, params):
        bm, bs = params[:self.km], params[self.km:]
        eta, xi = self.Xm @ bm, self.Xs @ bs
        if np.any(np.abs(eta) > 700) or np.any(np.abs(xi) > 700):
            return math.inf, np.zeros_like(params)
        y = self.y
        mu, r = np.exp(eta), np.exp(-xi)
        log_rmu = np.logaddexp(-xi, eta)  # log(r + mu)
        ll = (special.gammaln(y + r) - special.gammaln(r) - self.const
              + r * (-xi - log_rmu) + y * (eta - log_rmu))
        f = -float(np.sum(ll))
        if not np.isfinite(f):
            return math.inf, np.zeros_like(params)
        d_eta = r * (y - mu) / (r + mu)
        d_r = (special.digamma(y + r) - special.digamma(r) + (-xi - log_rmu)
               + 1.0 - (r + y) / (r + mu))
        d_xi = -r * d_r
        g = -np.concatenate([self.Xm.T @ d_eta, self.Xs.T @ d_xi])
        return f, g


def fit_negbin(data: Dataset, mu_specs, sigma_specs) -> NegBinFit:
    """NB MLE with log-mean and log-dispersion links, by BFGS from a Poisson start."""
    mu_specs = resolve_knots(data, mu_specs)
    sigma_specs = resolve_knots(data, sigma_specs)
    dm, ds = build_design(data, mu_specs), build_design(data, sigma_specs)
    sm, ss = _column_scale(dm.columns), _column_scale(ds.columns)
    obj = _NBObjective(data.y, dm.columns / sm, ds.columns / ss)
    pois = fit_poisson(data, mu_specs)
    x0 = np.zeros(dm.shape[1] + ds.shape[1])
    x0[:dm.shape[1]] = pois.coef * sm
    ybar = data.y.mean()
    excess = (data.y.var() - ybar) / max(ybar, 1e-6) ** 2
    x0[dm.shape[1]] = math.log(min(max(excess, 1e-2), 10.0))
    res = bfgs(obj, x0)
    if not np.isfinite(res.fun):
        raise FitError("negative binomial fit failed")
    scale = np.concatenate([sm, ss])
    cov, _ = _covariance(fd_hessian(lambda p: obj(p)[1], res.x))
    if cov is not None:
        cov = cov / np.outer(scale, scale)
    est = res.x / scale
    k = dm.shape[1]
    return NegBinFit(est[:k], est[k:], cov, -res.fun, mu_specs, sigma_specs,
                     dm.column_labels, ds.column_labels, res.converged)
