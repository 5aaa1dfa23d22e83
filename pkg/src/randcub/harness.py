"""Experiment driver: test integrands, repeated trials, budget tables, persistence.

Trial ``t`` of an experiment with master seed ``s`` uses the stream seed
``mix(s, t)`` for every (n, m, estimator) combination, so estimators are
compared on common random numbers. Trials run on a thread pool capped by the
``RANDCUB_THREADS`` environment variable; rows are sorted before writing, so
the CSV bytes do not depend on scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import special

from . import cubature as cub
from .basis import PolynomialFamily, TensorBasis, family_from_config, numeric_w_min, tensor_gauss_rule
from .index_sets import index_set_from_config
from .rng import mix

CSV_SCHEMA = "# randcub-trials v1"
COLUMNS = (
    "trial",
    "n",
    "m",
    "estimator",
    "estimate",
    "reference",
    "abs_error",
    "gram_deviation",
    "good_event",
    "all_weights_positive",
    "sandwich_ok",
    "seed",
)
REFERENCE_POINTS = 64


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# integrands


@dataclass(frozen=True)
class Integrand:
    """Vectorized test integrand with an optional closed-form integral."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    exact_fn: Callable[[PolynomialFamily, int], float | None] = lambda family, d: None
    params: dict = field(default_factory=dict)

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return self.func(y)

    def exact(self, family: PolynomialFamily, d: int) -> float | None:
        return self.exact_fn(family, d)


def _exp_exact(family, d):
    if family.kind == "legendre":
        return math.sinh(1.0) ** d
    if family.kind == "chebyshev":
        return float(special.i0(1.0)) ** d
    if family.kind == "hermite":
        return math.exp(0.5 * d)
    return None


def _cos_exact(family, d):
    if family.kind == "legendre":
        return (2 / math.pi) ** d
    if family.kind == "chebyshev":
        return float(special.j0(math.pi / 2)) ** d
    if family.kind == "hermite":
        return math.exp(-(math.pi**2) / 8 * d)
    return None


def integrand_registry(name: str, params: dict | None = None, basis: TensorBasis | None = None) -> Integrand:
    """Look up a test integrand.

    Known names: ``product_exponential`` ($e^{\\sum_q y_q}$), ``runge``
    ($1/(1 + c\\|y\\|^2)$, parameter ``c``), ``polynomial`` (expansion in
    ``basis`` with parameter ``coefficients``), ``cosine_product``
    ($\\prod_q \\cos(\\pi y_q / 2)$).

    Raises:
        ConfigError: for an unknown name or missing parameters.
    """
    params = dict(params or {})
    if name == "product_exponential":
        return Integrand(name, lambda y: np.exp(y.sum(axis=1)), _exp_exact, params)
    if name == "runge":
        c = float(params.get("c", 1.0))
        return Integrand(name, lambda y: 1.0 / (1.0 + c * np.sum(y**2, axis=1)), params=params)
    if name == "cosine_product":
        return Integrand(name, lambda y: np.prod(np.cos(0.5 * np.pi * y), axis=1), _cos_exact, params)
    if name == "polynomial":
        if basis is None or "coefficients" not in params:
            raise ConfigError("polynomial integrand needs a basis and 'coefficients'")
        coef = np.asarray(params["coefficients"], dtype=float)
        if coef.shape != (basis.n,):
            raise ConfigError(f"expected {basis.n} coefficients, got {coef.shape}")
        return Integrand(
            name,
            lambda y: basis.evaluate(y, check=False) @ coef,
            lambda family, d: float(coef[0]),
            params,
        )
    raise ConfigError(f"unknown integrand {name!r}")


def reference_integral(integrand: Integrand, basis: TensorBasis, npts: int = REFERENCE_POINTS) -> float:
    """Closed form when known, otherwise a tensorized Gauss rule (``d <= 3``)."""
    exact = integrand.exact(basis.family, basis.dim)
    if exact is not None:
        return float(exact)
    return float(quadrature(integrand, basis, npts)[0])


def quadrature(integrand: Integrand, basis: TensorBasis, npts: int = REFERENCE_POINTS):
    """Reference quantities by tensor Gauss quadrature.

    Returns:
        ``(I, norm, e2, coefficients)`` with the integral, the $L^2$ norm, the
        best-approximation error in $V_n$ and the projection coefficients.
    """
    if basis.dim > 3:
        raise ConfigError("reference quadrature is limited to d <= 3")
    x, wq = tensor_gauss_rule(basis.family, basis.dim, npts)
    f = integrand(x)
    psi = basis.evaluate(x, check=False)
    coef = psi.T @ (wq * f)
    resid = f - psi @ coef
    return float(wq @ f), math.sqrt(float(wq @ f**2)), math.sqrt(float(wq @ resid**2)), coef


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    family: PolynomialFamily
    index_sets: list[dict]
    estimators: list[str]
    m_policy: dict
    trials: int
    seed: int
    integrand: dict
    reference: str | float = "analytic"
    delta: float = cub.DEFAULT_DELTA
    r: float = cub.DEFAULT_R
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for est in self.estimators:
            if est not in cub.ESTIMATORS:
                raise ConfigError(f"unknown estimator {est!r}")

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        try:
            family = family_from_config(cfg.get("basis", {"family": "legendre"}))
            if "index_sets" in cfg:
                sets = list(cfg["index_sets"])
            elif "orders" in cfg:
                base = dict(cfg["index_set"])
                sets = [dict(base, order=k) for k in cfg["orders"]]
            else:
                sets = [dict(cfg["index_set"])]
            out = cls(
                family=family,
                index_sets=sets,
                estimators=list(cfg.get("estimators", ["conditioned"])),
                m_policy=dict(cfg.get("m", {"policy": "budget"})),
                trials=int(cfg.get("trials", 1)),
                seed=int(cfg.get("seed", 0)),
                integrand=dict(cfg.get("integrand", {"name": "product_exponential"})),
                reference=cfg.get("reference", "analytic"),
                delta=float(cfg.get("delta", cub.DEFAULT_DELTA)),
                r=float(cfg.get("r", cub.DEFAULT_R)),
                output=cfg.get("output"),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None
        for spec in out.index_sets:
            basis = TensorBasis(out.family, index_set_from_config(spec))
            integrand_registry(out.integrand.get("name", ""), out.integrand.get("params"), basis)
        return out

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def bases(self) -> list[TensorBasis]:
        return [TensorBasis(self.family, index_set_from_config(s)) for s in self.index_sets]

    def m_values(self, basis: TensorBasis) -> list[int]:
        policy = self.m_policy.get("policy", "budget")
        if policy == "explicit":
            return [int(m) for m in self.m_policy["values"]]
        if policy == "budget":
            r = float(self.m_policy.get("r", self.r))
            delta = float(self.m_policy.get("delta", self.delta))
            base = cub.min_samples(basis.n, r, delta)
            return [int(round(f * base)) for f in self.m_policy.get("multipliers", [1])]
        raise ConfigError(f"unknown m policy {policy!r}")


def thread_count(requested: int | None = None) -> int:
    cap = os.environ.get("RANDCUB_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


# ---------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class TrialRow:
    trial: int
    n: int
    m: int
    estimator: str
    estimate: float
    reference: float
    gram_deviation: float | None
    good_event: bool | None
    all_weights_positive: bool | None
    sandwich_ok: bool | None
    seed: int

    @property
    def abs_error(self) -> float:
        return abs(self.estimate - self.reference)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def rows_to_csv(rows: Sequence[TrialRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_SCHEMA + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow(
            [
                _fmt(r.trial),
                _fmt(r.n),
                _fmt(r.m),
                r.estimator,
                _fmt(r.estimate),
                _fmt(r.reference),
                _fmt(r.abs_error),
                _fmt(r.gram_deviation),
                _fmt(r.good_event),
                _fmt(r.all_weights_positive),
                _fmt(r.sandwich_ok),
                _fmt(r.seed),
            ]
        )
    return buf.getvalue()


def load_rows(path) -> list[TrialRow]:
    """Read a trial CSV; ``abs_error`` is recomputed from the estimate and reference."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_SCHEMA:
            raise ValueError(f"unexpected CSV schema line {header!r}")
        reader = csv.DictReader(fh)

        def opt_bool(s):
            return None if s == "" else s == "1"

        def opt_float(s):
            return None if s == "" else float(s)

        return [
            TrialRow(
                int(d["trial"]),
                int(d["n"]),
                int(d["m"]),
                d["estimator"],
                float(d["estimate"]),
                float(d["reference"]),
                opt_float(d["gram_deviation"]),
                opt_bool(d["good_event"]),
                opt_bool(d["all_weights_positive"]),
                opt_bool(d["sandwich_ok"]),
                int(d["seed"]),
            )
            for d in reader
        ]


def _rate(flags: list[bool]) -> tuple[float | None, float | None]:
    if not flags:
        return None, None
    p = float(np.mean(flags))
    return p, math.sqrt(p * (1 - p) / len(flags))


def summarize(rows: Sequence[TrialRow]) -> list[dict]:
    """Per (n, m, estimator): mean abs error, RMSE and event rates with binomial standard errors."""
    groups: dict[tuple, list[TrialRow]] = {}
    for r in rows:
        groups.setdefault((r.n, r.m, r.estimator), []).append(r)
    out = []
    for (n, m, est), rs in groups.items():
        err = np.array([r.abs_error for r in rs])
        good = [r.good_event for r in rs if r.good_event is not None]
        pos = [r.all_weights_positive for r in rs if r.all_weights_positive is not None]
        sand = [r.sandwich_ok for r in rs if r.sandwich_ok is not None]
        gp, gse = _rate(good)
        pp, pse = _rate(pos)
        sp, sse = _rate(sand)
        out.append(
            {
                "n": n,
                "m": m,
                "estimator": est,
                "trials": len(rs),
                "mean_abs_error": float(err.mean()),
                "mean_abs_error_stderr": float(err.std(ddof=1) / math.sqrt(len(rs))) if len(rs) > 1 else None,
                "rmse": float(math.sqrt(np.mean(err**2))),
                "good_event_rate": gp,
                "good_event_stderr": gse,
                "positivity_rate": pp,
                "positivity_stderr": pse,
                "sandwich_rate": sp,
                "sandwich_stderr": sse,
            }
        )
    return out


def _trial_rows(trial, seed, bases, m_lists, w_mins, estimators, integrands, refs, delta) -> list[TrialRow]:
    tseed = mix(seed, trial)
    rows = []
    for basis, ms, w_min, f, ref in zip(bases, m_lists, w_mins, integrands, refs):
        for m in ms:
            for est in estimators:
                rec, rule = cub.estimate(est, basis, m, tseed, f, delta)
                pos = sand = None
                gdev = None if est in ("monte_carlo", "importance_sampling") else rec.gram_deviation
                good = None if est in ("monte_carlo", "importance_sampling") else rec.good_event
                if rule is not None:
                    s_ok, p_ok = cub.weight_sandwich_check(rule, w_min if w_min > 0 else 0.0)
                    pos = p_ok
                    sand = s_ok if w_min > 0 else None
                rows.append(TrialRow(trial, basis.n, m, est, rec.value, ref, gdev, good, pos, sand, tseed))
    return rows


def _order(rows, bases, m_lists, estimators):
    key_n = {b.n: i for i, b in enumerate(bases)}
    est_idx = {e: i for i, e in enumerate(estimators)}
    return sorted(rows, key=lambda r: (key_n[r.n], r.m, est_idx[r.estimator], r.trial))


def run_convergence(config: ExperimentConfig, threads: int | None = None, write: bool = True):
    """Run all trials of an experiment.

    Returns:
        ``(rows, summary)``. With ``write`` and ``config.output`` set, the rows
        go to ``output`` as CSV and the summary to ``<output>.summary.json``.
    """
    bases = config.bases()
    m_lists = [config.m_values(b) for b in bases]
    w_mins = [numeric_w_min(b) for b in bases]
    integrands = [integrand_registry(config.integrand["name"], config.integrand.get("params"), b) for b in bases]
    refs = []
    for f, b in zip(integrands, bases):
        if isinstance(config.reference, (int, float)):
            refs.append(float(config.reference))
        elif config.reference == "quadrature":
            refs.append(quadrature(f, b)[0])
        else:
            refs.append(reference_integral(f, b))

    def job(t):
        return _trial_rows(t, config.seed, bases, m_lists, w_mins, config.estimators, integrands, refs, config.delta)

    nthreads = thread_count(threads)
    if nthreads == 1:
        chunks = [job(t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            chunks = list(pool.map(job, range(config.trials)))
    rows = _order([r for c in chunks for r in c], bases, m_lists, config.estimators)
    summary = {"schema": CSV_SCHEMA[2:], "seed": config.seed, "trials": config.trials, "groups": summarize(rows)}
    if write and config.output:
        write_text(config.output, rows_to_csv(rows))
        write_text(summary_path(config.output), dump_json(summary))
    return rows, summary


def summary_path(output) -> str:
    return str(output) + ".summary.json"


def write_text(path, text: str) -> None:
    try:
        Path(path).write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run_positivity(config: ExperimentConfig, contrast_m: Sequence[int] | None = None, write: bool = True) -> dict:
    """Fraction of trials with all weights positive and with the two-sided sandwich.

    Runs at the positive-weight budget and at each ``contrast_m`` (default
    ``m = n``); only the budgeted run carries the guarantee $1 - 2m^{-r}$.
    """
    if not config.family.bounded:
        raise cub.BudgetUnavailableError("positivity study needs a bounded domain")
    results = []
    for basis in config.bases():
        w_min = numeric_w_min(basis)
        budget = cub.min_samples_positive(basis, config.r, w_min)
        ms = [budget] + [int(m) for m in (contrast_m if contrast_m is not None else [basis.n])]
        for j, m in enumerate(ms):
            sand, pos = [], []
            for t in range(config.trials):
                rule = cub.cubature_rule(basis, m, mix(config.seed, t), config.delta)
                s_ok, p_ok = cub.weight_sandwich_check(rule, w_min)
                sand.append(s_ok)
                pos.append(p_ok)
            pp, pse = _rate(pos)
            sp, sse = _rate(sand)
            results.append(
                {
                    "n": basis.n,
                    "m": m,
                    "budgeted": j == 0,
                    "w_min": w_min,
                    "trials": config.trials,
                    "positivity_rate": pp,
                    "positivity_stderr": pse,
                    "sandwich_rate": sp,
                    "sandwich_stderr": sse,
                    "guaranteed_rate": 1 - 2 * m ** (-config.r) if j == 0 else None,
                }
            )
    summary = {"seed": config.seed, "r": config.r, "results": results}
    if write and config.output:
        write_text(config.output, dump_json(summary))
    return summary


def budget_table(
    n_list: Sequence[int],
    r_list: Sequence[float],
    delta_list: Sequence[float],
    family: PolynomialFamily | None = None,
) -> list[dict]:
    """Sample budgets for each (n, r, delta).

    The positive-weight column uses the analytic form with exponent $2B+1$ of
    ``family`` (Legendre by default), since it depends on $n$ alone; it is
    ``None`` for Hermite.
    """
    family = family or PolynomialFamily("legendre")
    params = family.jacobi_params
    table = []
    for n in n_list:
        for r in r_list:
            for delta in delta_list:
                pos = None if params is None else cub.min_samples_positive_analytic(n, r, *params)
                table.append(
                    {
                        "n": int(n),
                        "r": float(r),
                        "delta": float(delta),
                        "min_samples": cub.min_samples(int(n), r, delta),
                        "min_samples_positive": pos,
                    }
                )
    return table
