"""Maximum-likelihood fitting of discrete Weibull additive models.

Both parameters get their own additive predictor::

    log(-log q(x)) = X_q @ theta
    log(beta(x))   = X_b @ vartheta

with truncated-power bases from :mod:`dwgam.basis`.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import __version__
from .basis import (
    BasisError, CovariateSpec, DesignMatrix, Scaling, aliased_columns,
    build_design, resolve_knots,
)
from .data import CONTINUOUS, Dataset
from .distribution import log_pmf_rate, sf_rate
from .optimize import bfgs, fd_hessian

log = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
_EXP_MAX = 700.0


class LinkOverflowError(FloatingPointError):
    """A linear predictor is non-finite or too large to exponentiate."""


class FitError(RuntimeError):
    pass


class CovarianceUnavailable(RuntimeError):
    pass


class CollinearityWarning(UserWarning):
    pass


class CovarianceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Basis specs for the q-link and the beta-link (either may be empty)."""

    q_specs: tuple[CovariateSpec, ...] = ()
    beta_specs: tuple[CovariateSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "q_specs", tuple(self.q_specs))
        object.__setattr__(self, "beta_specs", tuple(self.beta_specs))

    @classmethod
    def linear(cls, data: Dataset, names=None, beta: bool = True) -> ModelSpec:
        names = data.names if names is None else list(names)
        specs = tuple(CovariateSpec(c, data.kinds[c], 1, 0) for c in names)
        return cls(specs, specs if beta else ())

    @property
    def covariates(self) -> list[str]:
        seen = {}
        for s in self.q_specs + self.beta_specs:
            seen.setdefault(s.covariate, s.kind)
        return list(seen)

    def resolved(self, data: Dataset, scaling: Scaling | None = None) -> ModelSpec:
        """Place missing knots; a covariate with equal knot counts shares knots across links."""
        q = resolve_knots(data, self.q_specs, scaling)
        shared = {s.covariate: s for s in q if s.num_knots}
        b = []
        for s in self.beta_specs:
            t = shared.get(s.covariate)
            if s.knots is None and t is not None and t.num_knots == s.num_knots:
                s = replace(s, knots=t.knots)
            b.append(s)
        return ModelSpec(q, resolve_knots(data, b, scaling))

    def n_columns(self) -> tuple[int, int]:
        return (1 + sum(s.n_columns for s in self.q_specs),
                1 + sum(s.n_columns for s in self.beta_specs))

    def to_dict(self) -> dict:
        return {"q": [s.to_dict() for s in self.q_specs],
                "beta": [s.to_dict() for s in self.beta_specs]}

    @classmethod
    def from_dict(cls, d: dict) -> ModelSpec:
        return cls(tuple(CovariateSpec.from_dict(s) for s in d.get("q", [])),
                   tuple(CovariateSpec.from_dict(s) for s in d.get("beta", [])))

    def describe(self) -> str:
        def part(specs):
            if not specs:
                return "1"
            return "+".join(s.covariate if (s.degree, s.num_knots) == (1, 0)
                            else f"{s.covariate}:d{s.degree}k{s.num_knots}" for s in specs)
        return f"q={part(self.q_specs)}, beta={part(self.beta_specs)}"


@dataclass
class DesignPair:
    q: DesignMatrix
    beta: DesignMatrix


def design_pair(data: Dataset, spec: ModelSpec, scaling: Scaling | None = None) -> DesignPair:
    return DesignPair(build_design(data, spec.q_specs, scaling),
                      build_design(data, spec.beta_specs, scaling))


def _cols(d):
    return d.columns if isinstance(d, DesignMatrix) else np.asarray(d, dtype=float)


def _check_predictor(eta, name):
    bad = ~np.isfinite(eta) | (np.abs(eta) > _EXP_MAX)
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise LinkOverflowError(f"{name} linear predictor overflows at row {row} (value {eta[row]!r})")


def link_rates(designs: DesignPair, theta, vartheta):
    """Per-row ``(-log q, beta)``; the rate form keeps q near 1 accurate."""
    Xq, Xb = _cols(designs.q), _cols(designs.beta)
    theta = np.asarray(theta, dtype=float)
    vartheta = np.asarray(vartheta, dtype=float)
    if theta.shape != (Xq.shape[1],) or vartheta.shape != (Xb.shape[1],):
        raise ValueError(f"coefficient lengths {theta.size}/{vartheta.size} do not match "
                         f"design columns {Xq.shape[1]}/{Xb.shape[1]}")
    eta = Xq @ theta
    zeta = Xb @ vartheta
    _check_predictor(eta, "q-link")
    _check_predictor(zeta, "beta-link")
    return np.exp(eta), np.exp(zeta)


def link_eval(designs: DesignPair, theta, vartheta):
    """Per-row ``(q, beta)`` with ``q = exp(-exp(eta))`` and ``beta = exp(zeta)``."""
    lam, beta = link_rates(designs, theta, vartheta)
    return np.exp(-lam), beta


def neg_loglik(y, designs: DesignPair, theta, vartheta) -> float:
    lam, beta = link_rates(designs, theta, vartheta)
    return float(-np.sum(log_pmf_rate(y, lam, beta)))


class DWObjective:
    """Negative log-likelihood and its analytic gradient in ``(theta, vartheta)``.

    With ``lam = exp(eta)``, ``a = y**beta``, ``b = (y+1)**beta`` and
    ``t = lam * (b - a)`` the per-row log-likelihood is
    ``-lam*a + log(1 - exp(-t))``; its derivatives are

        d/d eta  = -lam*a + t / expm1(t)
        d/d zeta = beta*lam*(-a*log y + (b*log(y+1) - a*log y) / expm1(t))
    """

    def __init__(self, y, Xq, Xb, fixed_zeta=None):
        y = np.asarray(y, dtype=float)
        self.Xq = np.asarray(Xq, dtype=float)
        self.Xb = None if fixed_zeta is not None else np.asarray(Xb, dtype=float)
        self.fixed_zeta = fixed_zeta
        self.pos = y > 0
        self.ly = np.log(np.where(self.pos, y, 1.0))
        self.l1y = np.log1p(y)
        self.kq = self.Xq.shape[1]
        self.kb = 0 if self.Xb is None else self.Xb.shape[1]

    def split(self, params):
        return params[:self.kq], params[self.kq:]

    def _rows(self, params, need_grad=True):
        th, vt = self.split(params)
        eta = self.Xq @ th
        zeta = np.full(eta.shape, self.fixed_zeta) if self.Xb is None else self.Xb @ vt
        if not (np.all(np.abs(eta) < _EXP_MAX) and np.all(np.abs(zeta) < _EXP_MAX)):
            return None
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            lam = np.exp(eta)
            beta = np.exp(zeta)
            a = np.where(self.pos, np.exp(beta * self.ly), 0.0)
            b = np.exp(beta * self.l1y)
            t = lam * (b - a)
            ll = -lam * a + np.where(t < math.log(2.0), np.log(-np.expm1(-t)), np.log1p(-np.exp(-t)))
            if not need_grad:
                return ll, None, None
            r = 1.0 / np.expm1(t)
            d_eta = -lam * a + t * r
            a1 = a * self.ly
            d_zeta = beta * lam * (-a1 + (b * self.l1y - a1) * r)
        return ll, d_eta, d_zeta

    def value(self, params) -> float:
        rows = self._rows(np.asarray(params, dtype=float), need_grad=False)
        if rows is None:
            return math.inf
        f = -float(np.sum(rows[0]))
        return f if np.isfinite(f) else math.inf

    def __call__(self, params):
        params = np.asarray(params, dtype=float)
        rows = self._rows(params)
        if rows is None:
            return math.inf, np.zeros_like(params)
        ll, d_eta, d_zeta = rows
        f = -float(np.sum(ll))
        if not np.isfinite(f):
            return math.inf, np.zeros_like(params)
        g = [-(self.Xq.T @ d_eta)]
        if self.Xb is not None:
            g.append(-(self.Xb.T @ d_zeta))
        g = np.concatenate(g)
        if not np.all(np.isfinite(g)):
            return math.inf, np.zeros_like(params)
        return f, g

    def gradient(self, params):
        return self(params)[1]


@dataclass
class FitOptions:
    """Controls for :func:`fit`.

    ``fixed_beta`` pins beta to a constant (the beta-link must then be empty).
    ``init`` maps ``{"theta": {label: value}, "vartheta": {...}}`` to warm-start
    values; unmatched labels start at zero.
    """

    n_starts: int = 3
    seed: int = 0
    jitter: float = 0.1
    gtol: float = 1e-6
    ftol: float = 1e-10
    max_iter: int = 1000
    scale: bool = False
    fixed_beta: float | None = None
    init: dict | None = None


@dataclass
class FittedModel:
    theta: np.ndarray
    vartheta: np.ndarray
    covariance: np.ndarray | None
    loglik: float
    aic: float
    n: int
    spec: ModelSpec
    converged: bool
    scaling_record: Scaling | None = None
    q_labels: list[str] = field(default_factory=list)
    beta_labels: list[str] = field(default_factory=list)
    covariance_status: str = "ok"
    aliased: dict[str, list[str]] = field(default_factory=dict)
    fixed_beta: float | None = None
    covariate_ranges: dict[str, tuple[float, float]] = field(default_factory=dict)
    iterations: int = 0
    message: str = ""
    config: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        n_alias = sum(len(v) for v in self.aliased.values())
        k = self.theta.size + (0 if self.fixed_beta is not None else self.vartheta.size)
        return k - n_alias

    @property
    def labels(self) -> list[str]:
        return [f"q:{l}" for l in self.q_labels] + [f"beta:{l}" for l in self.beta_labels]

    @property
    def coefficients(self) -> np.ndarray:
        if self.fixed_beta is not None:
            return self.theta.copy()
        return np.concatenate([self.theta, self.vartheta])

    def designs(self, data: Dataset) -> DesignPair:
        return design_pair(data, self.spec, self.scaling_record)

    def rates(self, data: Dataset):
        """Per-row ``(-log q, beta)`` for the rows of ``data``."""
        return link_rates(self.designs(data), self.theta, self.vartheta)

    def params(self, data: Dataset):
        lam, beta = self.rates(data)
        return np.exp(-lam), beta

    def to_dict(self) -> dict:
        cov = None
        if self.covariance is not None:
            cov = {"dim": int(self.covariance.shape[0]), "labels": self.labels_estimated(),
                   "values": [float(v) for v in self.covariance.ravel()]}
        return {
            "format_version": FORMAT_VERSION,
            "tool": "dwgam",
            "version": __version__,
            "spec": self.spec.to_dict(),
            "theta": {"labels": self.q_labels, "values": self.theta.tolist()},
            "vartheta": {"labels": self.beta_labels, "values": self.vartheta.tolist()},
            "fixed_beta": self.fixed_beta,
            "covariance": cov,
            "covariance_status": self.covariance_status,
            "loglik": self.loglik,
            "aic": self.aic,
            "n": self.n,
            "n_params": self.n_params,
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
            "scaling": self.scaling_record.to_dict() if self.scaling_record else None,
            "aliased": self.aliased,
            "covariate_ranges": {k: list(v) for k, v in self.covariate_ranges.items()},
            "config": self.config,
        }

    def labels_estimated(self) -> list[str]:
        return self.labels if self.fixed_beta is None else [f"q:{l}" for l in self.q_labels]

    @classmethod
    def from_dict(cls, d: dict) -> FittedModel:
        version = str(d.get("format_version", ""))
        if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
            raise ValueError(f"unsupported model format version {version!r}")
        cov = d.get("covariance")
        if cov is not None:
            k = int(cov["dim"])
            cov = np.array(cov["values"], dtype=float).reshape(k, k)
        return cls(
            theta=np.array(d["theta"]["values"], dtype=float),
            vartheta=np.array(d["vartheta"]["values"], dtype=float),
            covariance=cov,
            loglik=float(d["loglik"]),
            aic=float(d["aic"]),
            n=int(d["n"]),
            spec=ModelSpec.from_dict(d["spec"]),
            converged=bool(d["converged"]),
            scaling_record=Scaling.from_dict(d.get("scaling")),
            q_labels=list(d["theta"]["labels"]),
            beta_labels=list(d["vartheta"]["labels"]),
            covariance_status=d.get("covariance_status", "ok"),
            aliased={k: list(v) for k, v in d.get("aliased", {}).items()},
            fixed_beta=d.get("fixed_beta"),
            covariate_ranges={k: tuple(v) for k, v in d.get("covariate_ranges", {}).items()},
            iterations=int(d.get("iterations", 0)),
            message=d.get("message", ""),
            config=d.get("config", {}),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> FittedModel:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _column_scale(X):
    s = np.max(np.abs(X), axis=0)
    s[s == 0] = 1.0
    return s


def _initial(y, q_labels, b_labels, init):
    p0 = float(np.mean(y == 0))
    q0 = min(max(1.0 - p0, 0.01), 0.99)
    th = np.zeros(len(q_labels))
    vt = np.zeros(len(b_labels))
    th[0] = math.log(-math.log(q0))
    if init:
        for lab, v in init.get("theta", {}).items():
            if lab in q_labels:
                th[q_labels.index(lab)] = v
        for lab, v in init.get("vartheta", {}).items():
            if lab in b_labels:
                vt[b_labels.index(lab)] = v
    return th, vt


def _covariance(hess):
    """Inverse observed information with an eigenvalue floor.

    Returns ``(cov, status)`` where status is ``ok``, ``pseudo`` (indefinite
    Hessian, eigenvalues floored) or ``unavailable`` (singular Hessian).
    """
    if not np.all(np.isfinite(hess)):
        return None, "unavailable"
    w, v = np.linalg.eigh(hess)
    top = np.max(np.abs(w))
    if top == 0 or np.min(np.abs(w)) < 1e-12 * top:
        return None, "unavailable"
    status = "ok"
    if np.min(w) <= 0:
        status = "pseudo"
        w = np.maximum(w, 1e-8 * top)
    cov = (v / w) @ v.T
    return 0.5 * (cov + cov.T), status


def fit(data: Dataset, spec: ModelSpec, options: FitOptions | None = None) -> FittedModel:
    """Fit by multi-start BFGS on the analytic gradient; best log-likelihood wins.

    Design columns are rescaled to unit max-abs inside the optimizer and
    aliased columns are dropped (with a warning) and reported as zero
    coefficients with NaN covariance.
    """
    opts = options or FitOptions()
    if opts.fixed_beta is not None and spec.beta_specs:
        raise ValueError("fixed_beta requires an intercept-only beta-link")
    scaling = Scaling.fit(data, spec.covariates) if opts.scale else None
    spec = spec.resolved(data, scaling)
    designs = design_pair(data, spec, scaling)
    Xq, Xb = designs.q.columns, designs.beta.columns
    q_labels, b_labels = designs.q.column_labels, designs.beta.column_labels
    fixed = opts.fixed_beta is not None

    drop_q = aliased_columns(Xq)
    drop_b = [] if fixed else aliased_columns(Xb)
    aliased = {}
    if drop_q or drop_b:
        aliased = {"q": [q_labels[j] for j in drop_q], "beta": [b_labels[j] for j in drop_b]}
        warnings.warn(f"aliased design columns dropped: {aliased}", CollinearityWarning, stacklevel=2)
    keep_q = [j for j in range(Xq.shape[1]) if j not in drop_q]
    keep_b = [] if fixed else [j for j in range(Xb.shape[1]) if j not in drop_b]
    k = len(keep_q) + len(keep_b)
    if data.n <= k:
        raise FitError(f"n={data.n} must exceed the number of parameters ({k})")

    sq = _column_scale(Xq[:, keep_q])
    sb = _column_scale(Xb[:, keep_b]) if keep_b else np.ones(0)
    obj = DWObjective(data.y, Xq[:, keep_q] / sq,
                      Xb[:, keep_b] / sb if keep_b else None,
                      fixed_zeta=math.log(opts.fixed_beta) if fixed else None)
    scale = np.concatenate([sq, sb])

    th0, vt0 = _initial(data.y, q_labels, b_labels, opts.init)
    x0 = np.concatenate([th0[keep_q], vt0[keep_b]]) * scale
    rng = np.random.default_rng(opts.seed)
    best = None
    for start in range(max(opts.n_starts, 1)):
        xs = x0 if start == 0 else x0 + rng.normal(0.0, opts.jitter, size=x0.size)
        res = bfgs(obj, xs, gtol=opts.gtol, ftol=opts.ftol, max_iter=opts.max_iter)
        log.debug("start %d: f=%.6f iters=%d %s", start, res.fun, res.iterations, res.message)
        if best is None or (np.isfinite(res.fun) and res.fun < best.fun):
            best = res
    if not np.isfinite(best.fun):
        raise FitError("optimization failed: non-finite likelihood at every start")

    cov_s, status = _covariance(fd_hessian(obj.gradient, best.x))
    if status == "pseudo":
        warnings.warn("observed information not positive definite; covariance is eigenvalue-floored",
                      CovarianceWarning, stacklevel=2)
    elif status == "unavailable":
        warnings.warn("singular observed information; covariance unavailable",
                      CovarianceWarning, stacklevel=2)

    est = best.x / scale
    theta = np.zeros(Xq.shape[1])
    theta[keep_q] = est[:len(keep_q)]
    vartheta = np.zeros(Xb.shape[1])
    if fixed:
        vartheta[0] = math.log(opts.fixed_beta)
    else:
        vartheta[keep_b] = est[len(keep_q):]

    covariance = None
    if cov_s is not None:
        idx = keep_q + [Xq.shape[1] + j for j in keep_b]
        dim = Xq.shape[1] + (0 if fixed else Xb.shape[1])
        covariance = np.full((dim, dim), np.nan)
        covariance[np.ix_(idx, idx)] = cov_s / np.outer(scale, scale)

    loglik = -best.fun
    ranges = {c: (float(data.column(c).min()), float(data.column(c).max()))
              for c in spec.covariates if data.kinds.get(c) == CONTINUOUS}
    model = FittedModel(
        theta=theta, vartheta=vartheta, covariance=covariance, loglik=loglik,
        aic=-2.0 * loglik + 2.0 * k, n=data.n, spec=spec, converged=best.converged,
        scaling_record=scaling, q_labels=list(q_labels), beta_labels=list(b_labels),
        covariance_status=status, aliased=aliased, fixed_beta=opts.fixed_beta,
        covariate_ranges=ranges, iterations=best.iterations, message=best.message,
        config={"n_starts": opts.n_starts, "seed": opts.seed, "scale": opts.scale},
    )
    if not model.converged:
        log.warning("fit did not converge: %s", best.message)
    return model


@dataclass
class CoefTable:
    labels: list[str]
    coef: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray

    def stars(self) -> list[str]:
        out = []
        for p in self.p:
            if not np.isfinite(p):
                out.append("")
            elif p < 0.001:
                out.append("***")
            elif p < 0.01:
                out.append("**")
            elif p < 0.05:
                out.append("*")
            elif p < 0.1:
                out.append(".")
            else:
                out.append("")
        return out

    def row(self, label: str) -> dict:
        i = self.labels.index(label)
        return {"coef": self.coef[i], "se": self.se[i], "z": self.z[i], "p": self.p[i]}

    def format(self) -> str:
        width = max(12, max(len(l) for l in self.labels))
        lines = [f"{'':{width}}  {'Estimate':>10} {'Std.Err':>10} {'z':>8} {'Pr(>|z|)':>10}"]
        for lab, c, s, z, p, st in zip(self.labels, self.coef, self.se, self.z, self.p, self.stars()):
            lines.append(f"{lab:{width}}  {c:10.4f} {s:10.4f} {z:8.3f} {p:10.3g} {st}")
        return "\n".join(lines)


def standard_errors(m: FittedModel) -> CoefTable:
    """Wald table: ``se = sqrt(diag(cov))``, ``z = coef / se``, two-sided normal p."""
    if m.covariance is None:
        raise CovarianceUnavailable("model has no covariance matrix")
    coef = m.coefficients
    with np.errstate(invalid="ignore", divide="ignore"):
        se = np.sqrt(np.diag(m.covariance))
        z = coef / se
    p = 2.0 * stats.norm.sf(np.abs(z))
    return CoefTable(m.labels_estimated(), coef, se, z, p)


@dataclass
class TraceEntry:
    step: int
    covariate: str | None
    degree: int
    knots: int
    aic: float
    loglik: float
    n_params: int
    accepted: bool
    spec: str
    note: str = ""


def _with_complexity(spec: ModelSpec, covariate: str, degree: int, knots: int) -> ModelSpec:
    def upd(specs):
        return tuple(CovariateSpec(s.covariate, s.kind, degree, knots) if s.covariate == covariate
                     else s for s in specs)
    return ModelSpec(upd(spec.q_specs), upd(spec.beta_specs))


def _complexity(spec: ModelSpec, covariate: str) -> tuple[int, int]:
    for s in spec.q_specs + spec.beta_specs:
        if s.covariate == covariate:
            return s.degree, s.num_knots
    raise KeyError(covariate)


def _warm(m: FittedModel) -> dict:
    return {"theta": dict(zip(m.q_labels, m.theta.tolist())),
            "vartheta": dict(zip(m.beta_labels, m.vartheta.tolist()))}


def stepwise_select(data: Dataset, base_spec: ModelSpec | None = None, continuous_ids=None,
                    max_degree: int = 3, max_knots: int = 3,
                    options: FitOptions | None = None):
    """Forward stepwise search over (degree, knots) of continuous covariates by AIC.

    Each proposal raises one covariate to a larger ``(degree, knots)`` pair in
    both links at once. The best proposal is accepted when it lowers AIC;
    ties go to fewer parameters, then earlier covariate. Dummies are never
    expanded. Returns ``(best_model, trace)``.
    """
    opts = options or FitOptions()
    if base_spec is None:
        base_spec = ModelSpec.linear(data)
    if continuous_ids is None:
        continuous_ids = [c for c in base_spec.covariates if data.kinds.get(c) == CONTINUOUS]
    order = {c: i for i, c in enumerate(continuous_ids)}
    current = fit(data, base_spec, opts)
    current_spec = base_spec
    trace = [TraceEntry(0, None, 1, 0, current.aic, current.loglik, current.n_params, True,
                        base_spec.describe(), "base")]
    tried = set()
    step = 0
    while True:
        step += 1
        candidates = []
        for c in continuous_ids:
            d0, k0 = _complexity(current_spec, c)
            for d in range(d0, max_degree + 1):
                for k in range(k0, max_knots + 1):
                    if (d, k) == (d0, k0) or d < 1:
                        continue
                    cand = _with_complexity(current_spec, c, d, k)
                    key = cand.describe()
                    if key in tried:
                        continue
                    tried.add(key)
                    try:
                        with warnings.catch_warnings():
                            warnings.simplefilter("ignore")
                            m = fit(data, cand, replace(opts, init=_warm(current)))
                    except (FitError, BasisError, LinkOverflowError, np.linalg.LinAlgError) as exc:
                        trace.append(TraceEntry(step, c, d, k, math.nan, math.nan, 0, False, key,
                                                f"fit failed: {exc}"))
                        continue
                    trace.append(TraceEntry(step, c, d, k, m.aic, m.loglik, m.n_params, False, key))
                    candidates.append((m.aic, m.n_params, order[c], len(trace) - 1, cand, m))
        if not candidates:
            break
        candidates.sort(key=lambda t: t[:4])
        aic, _, _, idx, cand, m = candidates[0]
        if not aic < current.aic:
            break
        trace[idx].accepted = True
        current, current_spec = m, cand
    return current, trace


_RESIDUAL_STREAM = 0x52514D


def randomized_quantile_residuals(m: FittedModel, data: Dataset, seed=None) -> np.ndarray:
    """``Phi^{-1}(u)`` with ``u ~ Uniform(F(y-1), F(y)]`` under the fitted row parameters.

    Computed on the survival scale so the upper tail does not round to 1.
    An integer seed is mixed with a fixed stream tag, so reusing the seed that
    generated the data does not replay the generator's uniforms.
    """
    lam, beta = m.rates(data)
    y = data.y.astype(float)
    s_lo = sf_rate(y - 1.0, lam, beta)
    s_hi = sf_rate(y, lam, beta)
    if isinstance(seed, (int, np.integer)):
        seed = np.random.SeedSequence([int(seed), _RESIDUAL_STREAM])
    rng = np.random.default_rng(seed)
    v = 1.0 - rng.random(data.n)  # in (0, 1]
    s = s_lo - v * (s_lo - s_hi)   # = 1 - u
    return stats.norm.isf(s)


@dataclass
class NormalityResult:
    statistic: float
    pvalue: float
    qq: np.ndarray  # (n, 2): theoretical, sample quantiles


def residual_normality(residuals) -> NormalityResult:
    """Kolmogorov-Smirnov test against N(0, 1) plus normal Q-Q pairs."""
    r = np.asarray(residuals, dtype=float)
    if r.size < 8:
        raise ValueError(f"need at least 8 residuals, got {r.size}")
    res = stats.kstest(r, "norm")
    n = r.size
    theo = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return NormalityResult(float(res.statistic), float(res.pvalue),
                           np.column_stack([theo, np.sort(r)]))


def coefficient_summary(m: FittedModel) -> str:
    head = (f"discrete Weibull model  {m.spec.describe()}\n"
            f"n = {m.n}  logLik = {m.loglik:.3f}  AIC = {m.aic:.3f}  params = {m.n_params}  "
            f"converged = {m.converged}")
    try:
        table = standard_errors(m).format()
    except CovarianceUnavailable:
        table = "  (covariance unavailable)\n" + "\n".join(
            f"{l:20s} {c:10.4f}" for l, c in zip(m.labels_estimated(), m.coefficients))
    if m.fixed_beta is not None:
        table += f"\nbeta fixed at {m.fixed_beta}"
    return f"{head}\n{table}"
