"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 convergence failure
(the model file is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import warnings

import numpy as np

from . import __version__
from .basis import BasisError, CovariateSpec
from .data import DUMMY, DataError, Dataset, read_csv
from .prediction import partial_effects, predict_quantile, predict_rates
from .distribution import moments
from .regression import (
    FitError, FitOptions, FittedModel, LinkOverflowError, ModelSpec, coefficient_summary,
    fit, randomized_quantile_residuals, residual_normality, stepwise_select,
)

EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 2, 3, 4
TRUE_PREFIX = "true_"


class UsageError(ValueError):
    pass


_TERM = re.compile(r"^(?P<name>[^:\s]+)(?::(?:d(?P<d>\d+))?(?:k(?P<k>\d+))?)?$")


def parse_model_spec(text: str, data: Dataset | None = None) -> ModelSpec:
    """Parse ``"q=x1:d2k3+x2, beta=x1:d1"`` into a :class:`ModelSpec`.

    Terms default to degree 1 without knots; ``1`` or an empty side means an
    intercept-only link. Covariate kinds come from ``data`` when given.
    """
    sides = {"q": (), "beta": ()}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise UsageError(f"bad spec fragment {part!r}; expected q=... or beta=...")
        key, rhs = (s.strip() for s in part.split("=", 1))
        if key not in sides:
            raise UsageError(f"unknown link {key!r}; expected 'q' or 'beta'")
        specs = []
        for term in filter(None, (t.strip() for t in rhs.split("+"))):
            if term == "1":
                continue
            m = _TERM.match(term)
            if not m:
                raise UsageError(f"bad term {term!r}")
            name = m["name"]
            kind = data.kinds.get(name, "continuous") if data is not None else "continuous"
            if data is not None and name not in data.covariates:
                raise DataError(f"missing column {name!r}")
            d = int(m["d"]) if m["d"] is not None else 1
            k = int(m["k"]) if m["k"] is not None else 0
            try:
                specs.append(CovariateSpec(name, kind, d, k))
            except BasisError as exc:
                raise UsageError(str(exc)) from None
        sides[key] = tuple(specs)
    return ModelSpec(sides["q"], sides["beta"])


def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError("empty list")
    return vals


def _names(text: str | None) -> list[str] | None:
    return None if text is None else [t.strip() for t in text.split(",") if t.strip()]


def _meta(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return {"tool": "dwgam", "version": __version__, "seed": getattr(args, "seed", None),
            "config": cfg}


def _comment(args) -> str:
    return "# " + json.dumps(_meta(args), sort_keys=True)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_data(args, response_required=True) -> Dataset:
    return read_csv(args.data, response=args.response, dummies=_names(args.dummies),
                    continuous=_names(args.continuous), require_response=response_required)


def _fit_options(args) -> FitOptions:
    return FitOptions(n_starts=args.starts, seed=args.seed, scale=args.scale,
                      fixed_beta=args.fixed_beta)


def _finish_model(m: FittedModel, args) -> int:
    m.config = {**m.config, "cli": _meta(args)}
    m.save(args.out)
    print(coefficient_summary(m))
    if not m.converged:
        print(f"warning: optimizer did not converge ({m.message}); model written to {args.out}",
              file=sys.stderr)
        return EXIT_CONVERGENCE
    return 0


def cmd_fit(args) -> int:
    data = _load_data(args)
    spec = parse_model_spec(args.spec, data)
    m = fit(data, spec, _fit_options(args))
    return _finish_model(m, args)


def cmd_select(args) -> int:
    data = _load_data(args)
    names = _names(args.covariates) or [c for c in data.names if not c.startswith(TRUE_PREFIX)]
    for c in names:
        data.column(c)
    base = ModelSpec.linear(data, names)
    cont = [c for c in names if data.kinds[c] != DUMMY]
    m, trace = stepwise_select(data, base, cont, args.max_degree, args.max_knots, _fit_options(args))
    lines = [_comment(args), "step\tcovariate\tD\tk\tAIC\tLogLik\tn_param\taccepted\tspec\tnote"]
    for e in trace:
        lines.append(f"{e.step}\t{e.covariate or '-'}\t{e.degree}\t{e.knots}\t{e.aic:.3f}\t"
                     f"{e.loglik:.3f}\t{e.n_params}\t{int(e.accepted)}\t{e.spec}\t{e.note}")
    text = "\n".join(lines) + "\n"
    if args.trace:
        _write(args.trace, text)
    else:
        sys.stdout.write(text)
    return _finish_model(m, args)


def cmd_predict(args) -> int:
    m = FittedModel.load(args.model)
    data = _load_data(args, response_required=False)
    taus = _floats(args.taus)
    lam, beta = predict_rates(m, data)
    cols = {"row": np.arange(1, data.n + 1), "q": np.exp(-lam), "beta": beta}
    cols["median"] = predict_quantile(m, data, 0.5)[0]
    if not args.no_mean:
        cols["mean"] = np.array([moments(qi, bi).mean for qi, bi in zip(cols["q"], beta)])
    for t in taus:
        qi, qc = predict_quantile(m, data, t)
        cols[f"Q{t:g}"] = qi
        cols[f"Qstar{t:g}"] = qc
    lines = [_comment(args), "\t".join(cols)]
    for i in range(data.n):
        lines.append("\t".join(_cell(v[i]) for v in cols.values()))
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def _cell(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def cmd_residuals(args) -> int:
    m = FittedModel.load(args.model)
    data = _load_data(args)
    r = randomized_quantile_residuals(m, data, args.seed)
    norm = residual_normality(r)
    print(f"KS statistic = {norm.statistic:.4f}  p-value = {norm.pvalue:.4g}  n = {r.size}")
    lines = [_comment(args),
             f"# ks_statistic={norm.statistic:.6g} ks_pvalue={norm.pvalue:.6g}",
             "row\tresidual\ttheoretical\tsample"]
    for i in range(r.size):
        lines.append(f"{i + 1}\t{r[i]:.6g}\t{norm.qq[i, 0]:.6g}\t{norm.qq[i, 1]:.6g}")
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_effects(args) -> int:
    m = FittedModel.load(args.model)
    data = _load_data(args)
    table = partial_effects(m, data, _floats(args.taus), _names(args.covariates))
    text = table.to_tsv(header_comment=json.dumps(_meta(args), sort_keys=True), digits=args.digits)
    _write(args.out, text)
    return 0


def cmd_simulate(args) -> int:
    from .simulation import gen_dw_case, gen_fertility_like, gen_nb_tail

    taus = _floats(args.taus)
    if args.case == "nb_tail":
        sim = gen_nb_tail(args.n, args.seed, taus)
    elif args.case == "fertility":
        sim = gen_fertility_like(args.n, args.seed)
    else:
        if args.variant not in ("a", "b"):
            raise UsageError("cases 1-4 need --variant a or b")
        sim = gen_dw_case(int(args.case), args.variant, args.n, args.seed, taus)
    extra = {f"{TRUE_PREFIX}{k}": v for k, v in sim.true_params.items()}
    for t, v in sim.true_quantiles.items():
        extra[f"{TRUE_PREFIX}Q{t:g}"] = v
    sim.data.to_csv(args.out, extra=extra)
    # a comment line would break plain CSV readers, so provenance goes to a sidecar
    with open(args.out + ".meta.json", "w") as fh:
        json.dump(_meta(args), fh, indent=2)
    print(f"wrote {sim.data.n} rows to {args.out}")
    return 0


def cmd_benchmark(args) -> int:
    from .simulation import ScenarioConfig, run_benchmark

    with open(args.config) as fh:
        raw = json.load(fh)
    configs = raw if isinstance(raw, list) else [raw]
    texts = []
    all_records = []
    for c in configs:
        try:
            cfg = ScenarioConfig.from_dict(c)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad benchmark config: {exc}") from None
        report = run_benchmark(cfg, jobs=args.jobs)
        texts.append(report.to_tsv())
        all_records.append(json.loads(report.to_json()))
    _write(args.out, "".join(texts))
    if args.raw:
        with open(args.raw, "w") as fh:
            json.dump({**_meta(args), "scenarios": all_records}, fh, indent=1)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dwgam", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dwgam {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp, model=False):
        if model:
            sp.add_argument("model", help="model JSON written by fit/select")
        sp.add_argument("data", help="CSV file with a header row")
        sp.add_argument("--response", default="y")
        sp.add_argument("--dummies", help="comma-separated columns to treat as dummies")
        sp.add_argument("--continuous", help="comma-separated 0/1 columns to keep continuous")

    def fit_args(sp):
        sp.add_argument("--out", required=True, help="model JSON path")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--starts", type=int, default=3)
        sp.add_argument("--scale", action="store_true", help="min-max scale continuous covariates")
        sp.add_argument("--fixed-beta", type=float, default=None)

    sp = sub.add_parser("fit", help="fit a model with an explicit spec")
    data_args(sp)
    sp.add_argument("--spec", required=True, help='e.g. "q=x1:d2k3+x2, beta=x1"')
    fit_args(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("select", help="forward stepwise basis selection by AIC")
    data_args(sp)
    sp.add_argument("--covariates", help="comma-separated covariates (default: all)")
    sp.add_argument("--max-degree", type=int, default=3)
    sp.add_argument("--max-knots", type=int, default=3)
    sp.add_argument("--trace", help="TSV path for the search trace (default: stdout)")
    fit_args(sp)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("predict", help="per-row quantiles, median and mean")
    data_args(sp, model=True)
    sp.add_argument("--taus", default="0.25,0.5,0.75")
    sp.add_argument("--no-mean", action="store_true", help="skip the moment series")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("residuals", help="randomized quantile residuals + KS test + Q-Q pairs")
    data_args(sp, model=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_residuals)

    sp = sub.add_parser("effects", help="partial effects on conditional quantiles")
    data_args(sp, model=True)
    sp.add_argument("--taus", default="0.1,0.25,0.5,0.75,0.9")
    sp.add_argument("--covariates")
    sp.add_argument("--digits", type=int, default=4)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_effects)

    sp = sub.add_parser("simulate", help="write a synthetic dataset with true-parameter columns")
    sp.add_argument("--case", required=True, choices=["1", "2", "3", "4", "nb_tail", "fertility"])
    sp.add_argument("--variant", choices=["a", "b"])
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--taus", default="0.25,0.5,0.75")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("benchmark", help="Monte-Carlo RMSE benchmark from a JSON config")
    sp.add_argument("config", help="JSON object (or list) of scenario configs")
    sp.add_argument("--out", default="-", help="TSV report")
    sp.add_argument("--raw", help="JSON file with per-replicate results")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dwgam: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, BasisError, KeyError, OSError) as exc:
        print(f"dwgam: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, LinkOverflowError) as exc:
        print(f"dwgam: fit failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
