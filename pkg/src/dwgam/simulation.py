"""Monte-Carlo benchmark: DW-generated and NB tail-effect scenarios.

Four DW scenarios (linear/spline q-link, constant/varying beta), each in an
over-dispersed (``a``) and under-dispersed (``b``) variant, plus a negative
binomial scenario whose dispersion depends on a covariate that does not enter
the mean. Competing models are scored by the RMSE of their integer
conditional quantiles against the true ones.
"""

from __future__ import annotations

import json
import math
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .baselines import fit_negbin, fit_poisson, nb_dist, nb_quantile
from .basis import CovariateSpec
from .data import CONTINUOUS, DUMMY, Dataset
from .distribution import _continuous_quantile_rate, quantile_rate
from .regression import (
    CovarianceUnavailable, FitOptions, ModelSpec, design_pair, fit, link_rates,
    standard_errors,
)

SIM_KNOTS = (0.25, 0.5, 0.75)
DEFAULT_TAUS = (0.25, 0.5, 0.75)

_SPLINE_Q = [-5.0, -5.0, -6.0, -4.0, -8.0, -9.0, -8.0]

# (q-link coefficients, q degree/knots, {variant: beta-link coefficients}, beta degree/knots)
CASES = {
    1: ([-5.0, -3.0], (1, 0), {"a": [0.9], "b": [1.6]}, (0, 0)),
    2: ([-5.0, -3.0], (1, 0), {"a": [0.6, 0.3], "b": [1.1, 0.5]}, (1, 0)),
    3: (_SPLINE_Q, (3, 3), {"a": [0.9], "b": [1.6]}, (0, 0)),
    4: (_SPLINE_Q, (3, 3),
        {"a": [0.9, 0.7, 0.9, 0.8, 0.9, 1.0, 0.9],
         "b": [1.6, 1.3, 1.5, 1.6, 1.6, 1.6, 1.6]}, (3, 3)),
}


def _link_specs(degree, knots, fixed_knots):
    if degree == 0:
        return ()
    return (CovariateSpec("x", CONTINUOUS, degree, knots,
                          SIM_KNOTS[:knots] if (fixed_knots and knots) else None),)


def case_spec(case: int, fixed_knots: bool = False) -> ModelSpec:
    """Fitting spec matching a scenario's complexity.

    With ``fixed_knots`` the knots are the generating ones, otherwise they are
    left for quantile placement on the data.
    """
    _, qdk, _, bdk = CASES[case]
    return ModelSpec(_link_specs(*qdk, fixed_knots), _link_specs(*bdk, fixed_knots))


def case_truth(case: int, variant: str):
    """``(spec with generating knots, theta, vartheta)`` for a scenario."""
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}")
    theta, _, betas, _ = CASES[case]
    if variant not in betas:
        raise ValueError(f"unknown variant {variant!r}; expected 'a' or 'b'")
    return case_spec(case, fixed_knots=True), np.array(theta), np.array(betas[variant])


@dataclass
class SimulatedData:
    data: Dataset
    taus: tuple[float, ...]
    true_quantiles: dict[float, np.ndarray]
    true_continuous: dict[float, np.ndarray] = field(default_factory=dict)
    true_params: dict[str, np.ndarray] = field(default_factory=dict)


def gen_dw_case(case: int, variant: str, n: int, seed=None, taus=DEFAULT_TAUS) -> SimulatedData:
    """Draw ``X ~ U(0, 1)`` and ``Y | X`` from the scenario's DW model by inverse cdf."""
    spec, theta, vartheta = case_truth(case, variant)
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    data = Dataset(np.zeros(n, dtype=np.int64), {"x": x}, {"x": CONTINUOUS})
    lam, beta = link_rates(design_pair(data, spec), theta, vartheta)
    u = rng.random(n)
    y = quantile_rate(u, lam, beta)
    data = Dataset(y, {"x": x}, {"x": CONTINUOUS})
    tq = {t: quantile_rate(t, lam, beta) for t in taus}
    tc = {t: _continuous_quantile_rate(t, lam, beta) for t in taus}
    return SimulatedData(data, tuple(taus), tq, tc, {"q": np.exp(-lam), "beta": beta})


def gen_nb_tail(n: int, seed=None, taus=DEFAULT_TAUS) -> SimulatedData:
    """NB counts with ``log mu = 0.3 + 0.7 x1`` and ``log sigma = -2 + 2 x2``."""
    rng = np.random.default_rng(seed)
    x1 = rng.random(n)
    x2 = rng.random(n)
    mu = np.exp(0.3 + 0.7 * x1)
    sigma = np.exp(-2.0 + 2.0 * x2)
    dist = nb_dist(mu, sigma)
    y = dist.rvs(random_state=rng).astype(np.int64)
    data = Dataset(y, {"x1": x1, "x2": x2}, {"x1": CONTINUOUS, "x2": CONTINUOUS})
    tq = {t: nb_quantile(t, mu, sigma) for t in taus}
    return SimulatedData(data, tuple(taus), tq, {}, {"mu": mu, "sigma": sigma})


FERTILITY_DUMMIES = [
    "indspeaker", "cprimary", "isecondary", "csecondary", "osecondary",
    "wealth_mlow", "wealth_mhigh", "wealth_high", "urban", "surban",
    "hf_male", "hf_cprimary", "hf_isecondary", "hf_csecondary", "hf_osecondary",
    "hf_indspeaker", "hf_higher", "hf_employed", "owns_home", "internet",
] + [f"state{i:02d}" for i in range(1, 32)]


def gen_fertility_like(n: int = 5906, seed=None) -> SimulatedData:
    """Synthetic survey-shaped data: 2 continuous and 51 dummy covariates.

    Stands in for a real fertility-plans survey when checking that the
    selection/effects workflow runs end to end at realistic size.
    """
    rng = np.random.default_rng(seed)
    age = np.round(rng.uniform(28, 75, n))
    fsize = 2.0 + rng.poisson(3.0, n)
    cov = {"hf_age": age, "family_size": fsize}
    kinds = {"hf_age": CONTINUOUS, "family_size": CONTINUOUS}
    edu = rng.choice(5, n, p=[0.05, 0.25, 0.3, 0.25, 0.15])
    wealth = rng.choice(4, n)
    area = rng.choice(3, n, p=[0.3, 0.5, 0.2])
    state = rng.integers(0, 32, n)
    for name in FERTILITY_DUMMIES:
        if name in ("cprimary", "isecondary", "csecondary", "osecondary"):
            col = edu == 1 + ["cprimary", "isecondary", "csecondary", "osecondary"].index(name)
        elif name.startswith("wealth_"):
            col = wealth == 1 + ["wealth_mlow", "wealth_mhigh", "wealth_high"].index(name)
        elif name in ("urban", "surban"):
            col = area == 1 + ["urban", "surban"].index(name)
        elif name.startswith("state"):
            col = state == int(name[5:])
        else:
            col = rng.random(n) < 0.3
        cov[name] = col.astype(float)
        kinds[name] = DUMMY
    a = (age - 50.0) / 25.0
    eta = (-3.0 - 0.25 * a + 0.15 * a ** 2 + 0.08 * (fsize - 5.0)
           - 0.9 * (edu > 0) - 0.1 * cov["wealth_mhigh"] + 0.05 * cov["urban"]
           + 0.02 * (state - 16) / 16)
    zeta = 1.0 + 0.1 * a - 0.2 * cov["wealth_high"] - 0.02 * (fsize - 5.0)
    lam, beta = np.exp(eta), np.exp(zeta)
    y = quantile_rate(rng.random(n), lam, beta)
    return SimulatedData(Dataset(y, cov, kinds), (), {}, {}, {"q": np.exp(-lam), "beta": beta})


def rmse(fitted, true) -> float:
    """Root mean squared difference between fitted and true quantiles."""
    fitted = np.asarray(fitted, dtype=float)
    true = np.asarray(true, dtype=float)
    if fitted.shape != true.shape:
        raise ValueError(f"length mismatch: {fitted.shape} vs {true.shape}")
    return float(np.sqrt(np.mean((fitted - true) ** 2)))


@dataclass
class ScenarioConfig:
    """One benchmark scenario; ``case`` is 1-4 or ``"nb_tail"``."""

    case: int | str
    variant: str | None = None
    n: int | list[int] = 1000
    replicates: int = 100
    seed: int = 0
    tau_grid: tuple[float, ...] = DEFAULT_TAUS
    models: tuple[str, ...] = ("dw", "poisson")
    n_starts: int = 3

    def __post_init__(self):
        if self.case != "nb_tail":
            self.case = int(self.case)
            if self.case not in CASES:
                raise ValueError(f"unknown case {self.case!r}")
            if self.variant not in ("a", "b"):
                raise ValueError("DW cases need variant 'a' (over) or 'b' (under)")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        self.tau_grid = tuple(float(t) for t in self.tau_grid)
        if any(not 0 < t < 1 for t in self.tau_grid):
            raise ValueError("tau grid must lie in (0, 1)")
        self.models = tuple(self.models)
        unknown = set(self.models) - {"dw", "poisson", "negbin"}
        if unknown:
            raise ValueError(f"unknown models {sorted(unknown)}")

    @property
    def sizes(self) -> list[int]:
        return [int(self.n)] if np.isscalar(self.n) else [int(v) for v in self.n]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tau_grid"] = list(self.tau_grid)
        d["models"] = list(self.models)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioConfig:
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def replicate_seed(seed: int, n: int, rep: int) -> int:
    """Independent per-replicate seed, identical for serial and parallel runs."""
    return int(np.random.SeedSequence([seed, n, rep]).generate_state(1)[0])


def generate(config: ScenarioConfig, n: int, seed) -> SimulatedData:
    if config.case == "nb_tail":
        return gen_nb_tail(n, seed, config.tau_grid)
    return gen_dw_case(config.case, config.variant, n, seed, config.tau_grid)


def model_specs(config: ScenarioConfig) -> ModelSpec:
    if config.case == "nb_tail":
        lin = (CovariateSpec("x1"), CovariateSpec("x2"))
        return ModelSpec(lin, lin)
    return case_spec(config.case)


def _fit_one(name, sim, spec, config, seed):
    data = sim.data
    info = {}
    if name == "dw":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = fit(data, spec, FitOptions(n_starts=config.n_starts, seed=seed))
        lam, beta = m.rates(data)
        preds = {t: quantile_rate(t, lam, beta) for t in sim.taus}
        info = {"labels": m.labels_estimated(), "coef": m.coefficients.tolist(),
                "converged": m.converged, "loglik": m.loglik}
        try:
            info["se"] = standard_errors(m).se.tolist()
        except CovarianceUnavailable:
            info["se"] = None
    elif name == "poisson":
        m = fit_poisson(data, list(spec.q_specs))
        preds = {t: m.quantile(data, t) for t in sim.taus}
        info = {"labels": m.labels, "coef": m.coef.tolist(), "converged": m.converged}
    elif name == "negbin":
        m = fit_negbin(data, list(spec.q_specs), list(spec.beta_specs))
        preds = {t: m.quantile(data, t) for t in sim.taus}
        info = {"labels": [f"mu:{l}" for l in m.mu_labels] + [f"sigma:{l}" for l in m.sigma_labels],
                "coef": np.concatenate([m.coef_mu, m.coef_sigma]).tolist(),
                "converged": m.converged}
        if m.covariance is not None:
            info["se"] = np.sqrt(np.diag(m.covariance)).tolist()
    else:
        raise ValueError(name)
    return preds, info


def run_replicate(config: ScenarioConfig, n: int, rep: int) -> dict:
    seed = replicate_seed(config.seed, n, rep)
    sim = generate(config, n, seed)
    spec = model_specs(config)
    record = {"n": n, "replicate": rep, "seed": seed, "rmse": {}, "time": {},
              "failed": {}, "fits": {}}
    for name in config.models:
        t0 = time.perf_counter()
        try:
            preds, info = _fit_one(name, sim, spec, config, seed)
        except Exception as exc:  # recorded, excluded from averages
            record["failed"][name] = f"{type(exc).__name__}: {exc}"
            record["time"][name] = time.perf_counter() - t0
            traceback.clear_frames(exc.__traceback__)
            continue
        record["time"][name] = time.perf_counter() - t0
        record["rmse"][name] = {str(t): rmse(preds[t], sim.true_quantiles[t]) for t in sim.taus}
        record["fits"][name] = info
    return record


@dataclass
class BenchmarkReport:
    config: ScenarioConfig
    records: list[dict]

    def _select(self, model, n):
        return [r for r in self.records if r["n"] == n and model in r["rmse"]]

    def mean_rmse(self, model: str, tau: float, n: int | None = None) -> float:
        n = n if n is not None else self.config.sizes[0]
        vals = [r["rmse"][model][str(float(tau))] for r in self._select(model, n)]
        return float(np.mean(vals)) if vals else math.nan

    def failures(self, model: str, n: int | None = None) -> int:
        n = n if n is not None else self.config.sizes[0]
        return sum(1 for r in self.records if r["n"] == n and model in r["failed"])

    def total_time(self, model: str) -> float:
        return float(sum(r["time"].get(model, 0.0) for r in self.records))

    def summary(self) -> dict:
        out = {}
        for model in self.config.models:
            for n in self.config.sizes:
                for t in self.config.tau_grid:
                    out[(model, t, n)] = self.mean_rmse(model, t, n)
        return out

    def meta(self) -> dict:
        return {"tool": "dwgam", "version": __version__, "config": self.config.to_dict(),
                "seed": self.config.seed}

    def to_tsv(self, path=None) -> str:
        c = self.config
        label = f"case{c.case}{c.variant or ''}"
        cols = [f"{m}:n={n}" for m in c.models for n in c.sizes]
        lines = [f"# {json.dumps(self.meta(), sort_keys=True)}",
                 "\t".join(["scenario", "tau"] + cols)]
        for t in c.tau_grid:
            cells = [f"{self.mean_rmse(m, t, n):.3f}" for m in c.models for n in c.sizes]
            lines.append("\t".join([label, f"{t:g}"] + cells))
        lines.append("\t".join([label, "failures"]
                               + [str(self.failures(m, n)) for m in c.models for n in c.sizes]))
        lines.append("\t".join([label, "seconds"]
                               + [f"{sum(r['time'].get(m, 0.0) for r in self.records if r['n'] == n):.2f}"
                                  for m in c.models for n in c.sizes]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None) -> str:
        text = json.dumps({**self.meta(), "records": self.records}, indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def run_benchmark(config: ScenarioConfig, jobs: int = 1) -> BenchmarkReport:
    """Run every replicate of a scenario.

    Replicate seeds depend only on ``(seed, n, replicate)``, so the report is
    the same for any ``jobs`` (apart from wall-clock times).
    """
    tasks = [(n, rep) for n in config.sizes for rep in range(config.replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_replicate, [config] * len(tasks),
                                    [t[0] for t in tasks], [t[1] for t in tasks]))
    else:
        records = [run_replicate(config, n, rep) for n, rep in tasks]
    return BenchmarkReport(config, records)
