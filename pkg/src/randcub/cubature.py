r"""Randomized cubature weights, estimators and sample budgets.

Given nodes drawn from $\sigma$ and the design system of
:mod:`randcub.least_squares`, the cubature weights are

$$
\alpha = \frac{1}{m} W^{1/2} D h, \qquad G h = e_1,
$$

so that $I_m(\phi) = \sum_i \alpha_i \phi(y_i)$ equals the first least-squares
coefficient $\beta_1$ and integrates every $v \in V_n$ exactly whenever $G$ is
nonsingular. The conditioned rule keeps these weights only on the event
$\|G - I\| < \delta$ and returns zero weights otherwise.

Estimator kinds: ``ls``, ``conditioned``, ``control_variate``, ``monte_carlo``,
``importance_sampling``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .basis import TensorBasis, inverse_inequality_exponent, numeric_w_min
from .least_squares import DesignSystem, build_design, cholesky, gram_deviation, solve_fit
from .rng import mix
from .sampling import NodeSample, sample_mu, sample_sigma

DEFAULT_DELTA = 0.5
DEFAULT_R = 1.0
# 4 ln(4/3) - 1, constant of the positive-weight budget
POSITIVE_CONST = 4 * math.log(4 / 3) - 1
XI_LOWER_CONST = 3 * POSITIVE_CONST

ESTIMATORS = ("ls", "conditioned", "control_variate", "monte_carlo", "importance_sampling")

Integrand = Callable[[np.ndarray], np.ndarray]


class BudgetUnavailableError(ValueError):
    """Raised when a sample budget needs $w_{min} > 0$ and none is available."""


# ---------------------------------------------------------------------------
# analytic functions


def xi(delta: float) -> float:
    """$\\xi(\\delta) = (1+\\delta)\\ln(1+\\delta) - \\delta$ for $\\delta \\in (0, 1]$."""
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if delta < 1e-3:
        # alternating series sum_{k>=2} (-1)^k delta^k / (k (k-1)), no cancellation
        return sum((-1) ** k * delta**k / (k * (k - 1)) for k in range(2, 10))
    return (1 + delta) * math.log1p(delta) - delta


def xi_upper_bound(delta: float) -> float:
    return 0.5 * delta**2


def xi_lower_bound(delta: float) -> float:
    """$3(4\\ln(4/3) - 1)\\delta^2$, a lower bound on $\\xi$ for $\\delta \\le 1/3$."""
    return XI_LOWER_CONST * delta**2


def epsilon_m(m: int, r: float = DEFAULT_R, delta: float = DEFAULT_DELTA) -> float:
    """$\\varepsilon(m) = 4\\xi(\\delta) / ((1+r)\\ln m)$."""
    if m < 3:
        raise ValueError("epsilon_m needs m >= 3")
    return 4 * xi(delta) / ((1 + r) * math.log(m))


def _log_factor(n: int) -> float:
    return math.sqrt(4 * (1 + 2 * math.ceil(math.log(n))))


def epsilon_mn(m: int, n: int) -> float:
    """$\\varepsilon(m, n) = c(1 + c\\sqrt{n/m})$ with $c = \\sqrt{4(1 + 2\\lceil\\ln n\\rceil)}$."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    c = _log_factor(n)
    return c * (1 + c * math.sqrt(n / m))


def epsilon_mn_bound(m: int, n: int) -> float:
    """Upper bound $(4 + 8\\lceil\\ln n\\rceil)(1 + \\sqrt{n/m})$ on :func:`epsilon_mn`."""
    return (4 + 8 * math.ceil(math.log(n))) * (1 + math.sqrt(n / m))


# ---------------------------------------------------------------------------
# sample budgets


@dataclass(frozen=True)
class BudgetParams:
    n: int
    r: float = DEFAULT_R
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


def _smallest_m(threshold: float) -> int:
    # smallest integer m >= 3 with m / ln m >= threshold; m / ln m increases for m >= 3
    def ok(m):
        return m / math.log(m) >= threshold

    if ok(3):
        return 3
    lo, hi = 3, 6
    while not ok(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def exactness_threshold(n: int, r: float, delta: float) -> float:
    return (1 + r) * n / xi(delta)


def min_samples(params: BudgetParams | int, r: float = DEFAULT_R, delta: float = DEFAULT_DELTA) -> int:
    """Smallest $m \\ge 3$ with $m/\\ln m \\ge (1+r)n/\\xi(\\delta)$.

    Accepts a :class:`BudgetParams` or ``n`` with optional ``r`` and ``delta``.
    """
    p = params if isinstance(params, BudgetParams) else BudgetParams(int(params), r, delta)
    return _smallest_m(exactness_threshold(p.n, p.r, p.delta))


def positive_threshold(n: int, r: float, w_min: float) -> float:
    if not w_min > 0:
        raise BudgetUnavailableError("positive-weight budget needs w_min > 0 (bounded Jacobi-type domain)")
    return 3 * (1 + r) * n**2 / (POSITIVE_CONST * w_min)


def min_samples_positive(basis: TensorBasis, r: float = DEFAULT_R, w_min: float | None = None) -> int:
    """Smallest $m$ with $m/\\ln m \\ge 3(1+r)n^2 / ((4\\ln(4/3)-1) w_{min})$.

    ``w_min`` defaults to the numerical minimum of $w$ over the domain.

    Raises:
        BudgetUnavailableError: if $w_{min} = 0$ (unbounded domain).
    """
    if w_min is None:
        w_min = numeric_w_min(basis)
    return _smallest_m(positive_threshold(basis.n, r, w_min))


def positive_budget_exponent(theta1: float, theta2: float, weighted: bool = True) -> float:
    """Exponent of $n$ in the positive-weight budget: $2B+1$ (weighted) or $4B$ (unweighted)."""
    B = inverse_inequality_exponent(theta1, theta2)
    return 2 * B + 1 if weighted else 4 * B


def min_samples_positive_analytic(
    n: int, r: float, theta1: float, theta2: float, weighted: bool = True
) -> int:
    """Positive-weight budget from the analytic $w$ lower bound, $m/\\ln m \\ge 3(1+r)n^s/(4\\ln(4/3)-1)$."""
    s = positive_budget_exponent(theta1, theta2, weighted)
    return _smallest_m(3 * (1 + r) * float(n) ** s / POSITIVE_CONST)


# ---------------------------------------------------------------------------
# cubature rules


@dataclass(frozen=True)
class CubatureRule:
    """Nodes and weights of a randomized cubature.

    Attributes:
        weights: Conditioned weights, all zero off the event $\\|G-I\\| < \\delta$.
        raw_weights: Least-squares weights $W^{1/2} D G^{-1} e_1 / m$ whenever
            $G$ factorizes, regardless of the deviation test; ``None`` if singular.
    """

    nodes: np.ndarray
    weights: np.ndarray
    raw_weights: np.ndarray | None
    w_values: np.ndarray
    good_event: bool
    gram_deviation: float
    delta: float
    seed: int
    factorization_failed: bool = False

    @property
    def m(self) -> int:
        return self.nodes.shape[0]


def cubature_weights(system: DesignSystem, delta: float = DEFAULT_DELTA) -> CubatureRule:
    """Weights $\\alpha_i = \\sqrt{w(y_i)} (D h)_i / m$ with $G h = e_1$."""
    dev = gram_deviation(system.G)
    good = dev < delta
    factor = cholesky(system.G)
    raw = None
    if factor is not None:
        e1 = np.zeros(system.n)
        e1[0] = 1.0
        h = linalg.cho_solve(factor, e1)
        raw = system.sqrt_w * (system.D @ h) / system.m
    failed = good and raw is None
    good = good and raw is not None
    weights = raw.copy() if good else np.zeros(system.m)
    s = system.sample
    return CubatureRule(s.nodes, weights, raw, s.w_values, good, dev, float(delta), s.seed, failed)


def cubature_rule(basis: TensorBasis, m: int, seed: int, delta: float = DEFAULT_DELTA) -> CubatureRule:
    """Draw ``m`` nodes from $\\sigma$ and compute the cubature weights."""
    return cubature_weights(build_design(basis, sample_sigma(basis, m, seed)), delta)


@dataclass(frozen=True)
class EstimateRecord:
    kind: str
    value: float
    m_used: int
    good_event: bool
    seed: int
    gram_deviation: float = math.nan

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "m_used": self.m_used,
            "good_event": self.good_event,
            "seed": self.seed,
            "gram_deviation": self.gram_deviation,
        }


def _aligned(rule: CubatureRule, evaluations) -> np.ndarray:
    ev = np.asarray(evaluations, dtype=float).ravel()
    if ev.shape[0] != rule.m:
        raise ValueError(f"expected {rule.m} evaluations, got {ev.shape[0]}")
    return ev


def integrate_ls(rule: CubatureRule, evaluations) -> EstimateRecord:
    """$I_m(\\phi) = \\sum_i \\alpha_i\\phi(y_i)$ with the unconditioned weights (NaN if $G$ is singular)."""
    ev = _aligned(rule, evaluations)
    value = math.nan if rule.raw_weights is None else float(rule.raw_weights @ ev)
    return EstimateRecord("ls", value, rule.m, rule.good_event, rule.seed, rule.gram_deviation)


def integrate_conditioned(rule: CubatureRule, evaluations) -> EstimateRecord:
    """$\\tilde I_m(\\phi)$: $I_m(\\phi)$ on the good event, 0 otherwise."""
    ev = _aligned(rule, evaluations)
    value = float(rule.weights @ ev) if rule.good_event else 0.0
    return EstimateRecord("conditioned", value, rule.m, rule.good_event, rule.seed, rule.gram_deviation)


def _evaluate(integrand: Integrand, nodes: np.ndarray) -> np.ndarray:
    ev = np.asarray(integrand(nodes), dtype=float).reshape(-1)
    if ev.shape[0] != nodes.shape[0]:
        raise ValueError("integrand must return one value per node")
    return ev


def integrate_control_variate(
    basis: TensorBasis, m: int, delta: float, seed: int, integrand: Integrand
) -> EstimateRecord:
    """$\\hat I_{2m}(\\phi) = \\tilde I_m(\\phi) + \\frac1m\\sum_i (\\phi - \\tilde\\phi)(\\tilde y_i)$.

    The $\\sigma$-nodes use stream ``mix(seed, 0)`` and the independent
    $\\mu$-nodes use ``mix(seed, 1)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    sig = sample_sigma(basis, m, mix(seed, 0))
    system = build_design(basis, sig, _evaluate(integrand, sig.nodes))
    fit = solve_fit(system, delta)
    mu = sample_mu(basis, m, mix(seed, 1))
    correction = _evaluate(integrand, mu.nodes) - basis.evaluate(mu.nodes, check=False) @ fit.beta
    value = float(fit.beta[0] + correction.mean())
    return EstimateRecord("control_variate", value, 2 * m, fit.good_event, int(seed), fit.gram_deviation)


def monte_carlo(basis: TensorBasis, m: int, seed: int, integrand: Integrand) -> EstimateRecord:
    """Plain Monte Carlo mean over ``m`` nodes from $\\mu$."""
    s = sample_mu(basis, m, seed)
    return EstimateRecord("monte_carlo", float(_evaluate(integrand, s.nodes).mean()), m, True, int(seed))


def importance_sampling(basis: TensorBasis, m: int, seed: int, integrand: Integrand) -> EstimateRecord:
    """$\\frac1m \\sum_i w(y_i)\\phi(y_i)$ with nodes from $\\sigma$."""
    s = sample_sigma(basis, m, seed)
    value = float(np.mean(s.w_values * _evaluate(integrand, s.nodes)))
    return EstimateRecord("importance_sampling", value, m, True, int(seed))


def estimate(
    kind: str,
    basis: TensorBasis,
    m: int,
    seed: int,
    integrand: Integrand,
    delta: float = DEFAULT_DELTA,
) -> tuple[EstimateRecord, CubatureRule | None]:
    """Run one estimator; the cubature rule is returned for ``ls``/``conditioned``."""
    if kind in ("ls", "conditioned"):
        rule = cubature_rule(basis, m, seed, delta)
        ev = _evaluate(integrand, rule.nodes)
        rec = integrate_ls(rule, ev) if kind == "ls" else integrate_conditioned(rule, ev)
        return rec, rule
    if kind == "control_variate":
        return integrate_control_variate(basis, m, delta, seed, integrand), None
    if kind == "monte_carlo":
        return monte_carlo(basis, m, seed, integrand), None
    if kind == "importance_sampling":
        return importance_sampling(basis, m, seed, integrand), None
    raise ValueError(f"unknown estimator {kind!r}")


# ---------------------------------------------------------------------------
# diagnostics


def weight_sandwich_check(rule: CubatureRule, w_min: float) -> tuple[bool, bool]:
    """Return ``(sandwich_ok, all_positive)`` for the least-squares weights.

    ``sandwich_ok`` is true iff every weight lies in
    $[(2w(y_i) - w_{min})/(2m), (2w(y_i) + w_{min})/(2m)]$.
    """
    if rule.raw_weights is None:
        return False, False
    a, w, m = rule.raw_weights, rule.w_values, rule.m
    all_positive = bool(np.all(a > 0))
    sandwich = bool(np.all((a >= (2 * w - w_min) / (2 * m)) & (a <= (2 * w + w_min) / (2 * m))))
    return sandwich, all_positive


def weight_convergence_stat(
    basis: TensorBasis,
    m_list: Sequence[int],
    trials: int,
    seed: int,
    delta: float = DEFAULT_DELTA,
    r: float = DEFAULT_R,
) -> list[tuple[int, float]]:
    """Median over trials of $\\max_i |m\\alpha_i - w(y_i)|$ for each ``m``.

    Trial ``t`` at position ``j`` of ``m_list`` uses stream ``mix(seed, j, t)``.
    """
    floor = min_samples(basis.n, r, delta)
    out = []
    for j, m in enumerate(m_list):
        if m < floor:
            raise ValueError(f"m = {m} is below the budget {floor}")
        stats = []
        for t in range(trials):
            rule = cubature_rule(basis, m, mix(seed, j, t), delta)
            if rule.raw_weights is None:
                stats.append(math.inf)
            else:
                stats.append(float(np.max(np.abs(m * rule.raw_weights - rule.w_values))))
        out.append((int(m), float(np.median(stats))))
    return out


def error_decomposition(system: DesignSystem, residual) -> tuple[float, float]:
    """Split $I_m(\\phi) - I(\\phi) = S + B$ given $g_i = (\\phi - \\Pi_n\\phi)(y_i)$.

    $S = \\frac1m\\sum_i w(y_i) g_i$ and
    $B = \\frac1m\\sum_i (e_1^\\top G^{-1}(I - G) D^\\top W^{1/2})_i g_i$.
    """
    g = np.asarray(residual, dtype=float).ravel()
    factor = cholesky(system.G)
    if factor is None:
        raise np.linalg.LinAlgError("Gramian is not positive definite")
    e1 = np.zeros(system.n)
    e1[0] = 1.0
    h = linalg.cho_solve(factor, e1)
    # e1^T G^{-1} (I - G) = (h - e1)^T by symmetry of G
    S = float(np.mean(system.sqrt_w**2 * g))
    B = float(np.mean(system.sqrt_w * (system.D @ (h - e1)) * g))
    return S, B
