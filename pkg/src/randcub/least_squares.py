r"""Weighted discrete least squares on random nodes.

With nodes $y_1, \ldots, y_m$ the design matrix is
$D_{ij} = \sqrt{w(y_i)}\,\psi_j(y_i)$, the Gramian is $G = D^\top D / m$ and the
coefficients of the projection solve $G\beta = D^\top b / m$ with
$b_i = \sqrt{w(y_i)}\,\phi(y_i)$.

The conditioned estimator keeps $\beta$ only on the event
$\|G - I\| < \delta$ and returns zero otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .basis import TensorBasis
from .sampling import NodeSample

PIVOT_FLOOR = 1e-14


@dataclass(frozen=True)
class DesignSystem:
    """Design matrix, Gramian and right-hand side for one node set."""

    D: np.ndarray
    G: np.ndarray
    b: np.ndarray | None
    sqrt_w: np.ndarray
    sample: NodeSample

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def n(self) -> int:
        return self.D.shape[1]


@dataclass(frozen=True)
class LeastSquaresFit:
    """Coefficients of the (conditioned) weighted least-squares fit.

    ``factorization_failed`` marks a Cholesky breakdown on a matrix that passed
    the deviation test; such fits are reported as bad events.
    """

    beta: np.ndarray
    gram_deviation: float
    good_event: bool
    delta: float
    factorization_failed: bool = False


def build_design(basis: TensorBasis, sample: NodeSample, evaluations=None) -> DesignSystem:
    """Assemble $D$, $G$ and (if ``evaluations`` is given) $b$.

    Raises:
        ValueError: on non-finite evaluations or a length mismatch.
    """
    psi = basis.evaluate(sample.nodes, check=False)
    sqrt_w = np.sqrt(sample.w_values)
    D = sqrt_w[:, None] * psi
    G = D.T @ D / sample.m
    G = 0.5 * (G + G.T)
    b = None
    if evaluations is not None:
        ev = np.asarray(evaluations, dtype=float).ravel()
        if ev.shape[0] != sample.m:
            raise ValueError(f"expected {sample.m} evaluations, got {ev.shape[0]}")
        if not np.all(np.isfinite(ev)):
            raise ValueError("integrand evaluations must be finite")
        b = sqrt_w * ev
    return DesignSystem(D, G, b, sqrt_w, sample)


def gram_deviation(G) -> float:
    """Spectral norm $\\|G - I\\|$ of a symmetric matrix."""
    G = np.asarray(G, dtype=float)
    eig = np.linalg.eigvalsh(G)
    return float(np.max(np.abs(eig - 1.0)))


def cholesky(G: np.ndarray):
    """Lower Cholesky factor of ``G``, or ``None`` on breakdown or a pivot below 1e-14."""
    try:
        c, low = linalg.cho_factor(G, lower=True)
    except linalg.LinAlgError:
        return None
    if np.min(np.diag(c)) ** 2 <= PIVOT_FLOOR:
        return None
    return c, low


def solve_fit(system: DesignSystem, delta: float, conditioned: bool = True) -> LeastSquaresFit:
    """Solve the normal equations.

    With ``conditioned=True`` the coefficients are zero unless
    $\\|G - I\\| < \\delta$. With ``conditioned=False`` they are returned whenever
    $G$ admits a Cholesky factorization (zero otherwise), and ``good_event``
    still reports the deviation test.
    """
    if system.b is None:
        raise ValueError("design system has no right-hand side")
    dev = gram_deviation(system.G)
    good = dev < delta
    beta = np.zeros(system.n)
    failed = False
    if good or not conditioned:
        factor = cholesky(system.G)
        if factor is None:
            failed = good
            good = False
        else:
            beta = linalg.cho_solve(factor, system.D.T @ system.b / system.m)
    return LeastSquaresFit(beta, dev, good, float(delta), failed)


def norm_equivalence_check(system: DesignSystem, delta: float, coefficients) -> bool:
    """Check $(1-\\delta)\\|v\\|^2 \\le \\|v\\|_m^2 \\le (1+\\delta)\\|v\\|^2$ for $v = \\sum_j c_j\\psi_j$."""
    c = np.asarray(coefficients, dtype=float)
    exact = float(c @ c)
    discrete = float(c @ system.G @ c)
    slack = 64 * np.finfo(float).eps * exact
    return (1 - delta) * exact - slack <= discrete <= (1 + delta) * exact + slack
