r"""Orthonormal polynomial families and their tensorizations.

Each univariate family is orthonormal with respect to a probability measure
$\mu_1$ and is evaluated through the orthonormal three-term recurrence

$$
\sqrt{b_{k+1}}\,\varphi_{k+1}(t) = (t - a_k)\,\varphi_k(t) - \sqrt{b_k}\,\varphi_{k-1}(t),
\qquad \varphi_{-1} = 0,\ \varphi_0 = 1.
$$

Supported measures:

* ``legendre``: uniform on $[-1, 1]$, density $1/2$.
* ``chebyshev``: arcsine, density $1/(\pi\sqrt{1-t^2})$.
* ``hermite``: standard Gaussian on $\mathbb{R}$.
* ``jacobi``: $C (1-t)^{\theta_1} (1+t)^{\theta_2}$ on $[-1, 1]$ with integer $\theta_1, \theta_2 \ge 0$.

A :class:`TensorBasis` pairs a family with a :class:`~randcub.index_sets.MultiIndexSet`
and evaluates $\psi_\nu$, $\kappa = (\sum_j \psi_j^2)^{-1}$ and $w = n\kappa$.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .index_sets import MultiIndexSet, index_set_from_config, is_downward_closed

MAX_DEGREE = 200

KINDS = ("legendre", "chebyshev", "hermite", "jacobi")


@lru_cache(maxsize=None)
def _recurrence(kind: str, theta1: float, theta2: float, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    # a[k], k = 0..kmax; sb[k] = sqrt(b_k), k = 0..kmax+1 (sb[0] unused)
    k = np.arange(kmax + 2, dtype=float)
    a = np.zeros(kmax + 1)
    b = np.zeros(kmax + 2)
    if kind == "hermite":
        b[1:] = k[1:]
    elif kind == "chebyshev":
        b[1] = 0.5
        b[2:] = 0.25
    else:
        al, be = float(theta1), float(theta2)
        s = 2 * k[: kmax + 1] + al + be
        a[0] = (be - al) / (al + be + 2)
        if kmax >= 1:
            a[1:] = (be**2 - al**2) / (s[1:] * (s[1:] + 2))
        kk = k[1:]
        s = 2 * kk + al + be
        b[1:] = 4 * kk * (kk + al) * (kk + be) * (kk + al + be) / (s**2 * (s + 1) * (s - 1))
    for arr in (a, b):
        arr.setflags(write=False)
    sb = np.sqrt(b)
    sb.setflags(write=False)
    return a, sb


@dataclass(frozen=True)
class PolynomialFamily:
    """Univariate orthonormal polynomial family.

    Attributes:
        kind: One of ``legendre``, ``chebyshev``, ``hermite``, ``jacobi``.
        theta1: Exponent of $(1-t)$ for ``jacobi``.
        theta2: Exponent of $(1+t)$ for ``jacobi``.
    """

    kind: str
    theta1: float = 0
    theta2: float = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown polynomial family {self.kind!r}")
        if self.kind == "legendre":
            object.__setattr__(self, "theta1", 0)
            object.__setattr__(self, "theta2", 0)
        elif self.kind == "chebyshev":
            object.__setattr__(self, "theta1", -0.5)
            object.__setattr__(self, "theta2", -0.5)
        elif self.kind == "hermite":
            object.__setattr__(self, "theta1", 0)
            object.__setattr__(self, "theta2", 0)
        else:
            for th in (self.theta1, self.theta2):
                if th < 0 or th != int(th):
                    raise ValueError("jacobi parameters must be nonnegative integers")
            object.__setattr__(self, "theta1", int(self.theta1))
            object.__setattr__(self, "theta2", int(self.theta2))

    @property
    def bounded(self) -> bool:
        return self.kind != "hermite"

    @property
    def domain(self) -> tuple[float, float]:
        return (-1.0, 1.0) if self.bounded else (-math.inf, math.inf)

    @property
    def jacobi_params(self) -> tuple[float, float] | None:
        """$(\\theta_1, \\theta_2)$ for Jacobi-type families, ``None`` for Hermite."""
        return None if self.kind == "hermite" else (self.theta1, self.theta2)

    def recurrence(self, kmax: int) -> tuple[np.ndarray, np.ndarray]:
        """Recurrence coefficients ``(a, sqrt_b)`` up to degree ``kmax``."""
        if kmax > MAX_DEGREE:
            raise ValueError(f"degree {kmax} exceeds the supported maximum {MAX_DEGREE}")
        return _recurrence(self.kind, self.theta1, self.theta2, int(kmax))

    def check_domain(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t)):
            raise ValueError("evaluation points must be finite")
        if self.bounded and np.any(np.abs(t) > 1.0):
            raise ValueError(f"points outside [-1, 1] for the {self.kind} family")
        return t

    def eval_all(self, t, kmax: int, check: bool = True) -> np.ndarray:
        """Values of $\\varphi_0, \\ldots, \\varphi_{k_{max}}$, shape ``t.shape + (kmax + 1,)``."""
        t = self.check_domain(t) if check else np.asarray(t, dtype=float)
        a, sb = self.recurrence(max(kmax, 0))
        out = np.empty(t.shape + (kmax + 1,))
        out[..., 0] = 1.0
        if kmax >= 1:
            out[..., 1] = (t - a[0]) / sb[1]
        for k in range(1, kmax):
            out[..., k + 1] = ((t - a[k]) * out[..., k] - sb[k] * out[..., k - 1]) / sb[k + 1]
        return out

    def density(self, t) -> np.ndarray:
        """Probability density of $\\mu_1$ with respect to Lebesgue measure."""
        t = np.asarray(t, dtype=float)
        if self.kind == "hermite":
            return np.exp(-0.5 * t**2) / math.sqrt(2 * math.pi)
        inside = np.abs(t) <= 1
        tc = np.clip(t, -1, 1)
        if self.kind == "legendre":
            val = np.full(t.shape, 0.5)
        elif self.kind == "chebyshev":
            with np.errstate(divide="ignore"):
                val = 1.0 / (math.pi * np.sqrt(1.0 - tc**2))
        else:
            al, be = self.theta1, self.theta2
            logc = (al + be + 1) * math.log(2) + special.betaln(al + 1, be + 1)
            val = (1 - tc) ** al * (1 + tc) ** be * math.exp(-logc)
        return np.where(inside, val, 0.0)

    def gauss_rule(self, npts: int) -> tuple[np.ndarray, np.ndarray]:
        """Gauss rule for $\\mu_1$ with weights summing to one (reference quadrature)."""
        if self.kind == "legendre":
            x, w = special.roots_legendre(npts)
        elif self.kind == "chebyshev":
            x, w = special.roots_chebyt(npts)
        elif self.kind == "hermite":
            x, w = special.roots_hermitenorm(npts)
        else:
            x, w = special.roots_jacobi(npts, self.theta1, self.theta2)
        return x, w / w.sum()

    def to_config(self) -> dict:
        cfg = {"family": self.kind}
        if self.kind == "jacobi":
            cfg.update(theta1=self.theta1, theta2=self.theta2)
        return cfg


def family_from_config(spec: dict) -> PolynomialFamily:
    """Build a family from ``{"family": ..., "theta1": int, "theta2": int}``."""
    return PolynomialFamily(spec["family"], spec.get("theta1", 0), spec.get("theta2", 0))


def eval_univariate(family: PolynomialFamily, k: int, t):
    """Value of the degree-``k`` orthonormal polynomial at ``t``."""
    if k < 0:
        raise ValueError("degree must be nonnegative")
    val = family.eval_all(t, k)[..., k]
    return float(val) if np.ndim(val) == 0 else val


def tensor_gauss_rule(family: PolynomialFamily, d: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensorized Gauss rule on $\\Gamma_1^d$, nodes ``(npts**d, d)``."""
    x, w = family.gauss_rule(npts)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return nodes, weights


@dataclass(frozen=True)
class TensorBasis:
    """Tensorized orthonormal basis $\\psi_\\nu(y) = \\prod_q \\varphi_{\\nu_q}(y_q)$, $\\nu \\in \\Lambda$."""

    family: PolynomialFamily
    index_set: MultiIndexSet

    @property
    def n(self) -> int:
        return self.index_set.n

    @property
    def dim(self) -> int:
        return self.index_set.dim

    def _points(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.ndim == 0:
            y = y.reshape(1, 1)
        elif y.ndim == 1:
            y = y.reshape(-1, 1) if self.dim == 1 else y.reshape(1, -1)
        if y.ndim != 2 or y.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates, got shape {y.shape}")
        return y

    def evaluate(self, y, check: bool = True) -> np.ndarray:
        """Basis matrix ``(m, n)`` with entries $\\psi_j(y_i)$."""
        y = self._points(y)
        idx = self.index_set.array
        kmax = self.index_set.max_degree
        out = np.ones((y.shape[0], self.n))
        for q in range(self.dim):
            table = self.family.eval_all(y[:, q], kmax, check=check)
            out *= table[:, idx[:, q]]
        return out

    def christoffel_sum(self, y, check: bool = True) -> np.ndarray:
        """$\\sum_j \\psi_j(y)^2$ at each point."""
        psi = self.evaluate(y, check=check)
        return np.einsum("ij,ij->i", psi, psi)

    def weight(self, y, check: bool = True) -> np.ndarray:
        """$w(y) = n / \\sum_j \\psi_j(y)^2$ at each point."""
        return self.n / self.christoffel_sum(y, check=check)

    def to_config(self) -> dict:
        return {
            "basis": self.family.to_config(),
            "index_set": {"type": "explicit", "dim": self.dim, "indices": [list(nu) for nu in self.index_set]},
        }


def basis_from_config(config: dict) -> TensorBasis:
    return TensorBasis(family_from_config(config["basis"]), index_set_from_config(config["index_set"]))


def eval_basis_vector(basis: TensorBasis, y) -> np.ndarray:
    """$(\\psi_1(y), \\ldots, \\psi_n(y))$ for a single point ``y``."""
    y = np.asarray(y, dtype=float).reshape(1, basis.dim)
    return basis.evaluate(y)[0]


def weight_w(basis: TensorBasis, y):
    """$w(y) = n\\kappa(y)$; scalar for a single point, array for ``(m, d)`` input."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 0 or (y.ndim == 1 and y.size == basis.dim):
        return float(basis.weight(y.reshape(1, basis.dim))[0])
    return basis.weight(y)


def inverse_inequality_exponent(theta1: float, theta2: float) -> float:
    """Exponent $B(\\theta_1, \\theta_2)$ of the $L^\\infty$-$L^2$ inverse inequality.

    Raises:
        ValueError: for parameter pairs other than nonnegative integers or $(-1/2, -1/2)$.
    """
    if theta1 == -0.5 and theta2 == -0.5:
        return math.log(3) / (2 * math.log(2))
    for th in (theta1, theta2):
        if th < 0 or th != int(th):
            raise ValueError(f"unsupported Jacobi parameters ({theta1}, {theta2})")
    return max(theta1, theta2) + 1.0


def _require_jacobi(basis: TensorBasis) -> float:
    params = basis.family.jacobi_params
    if params is None:
        raise ValueError("analytic bounds need a Jacobi-type family on [-1, 1]")
    if not is_downward_closed(basis.index_set):
        raise ValueError("analytic bounds need a downward closed index set")
    return inverse_inequality_exponent(*params)


def w_min_lower_bound(basis: TensorBasis) -> float:
    """Analytic lower bound $n^{1 - 2B}$ on $w$ (Jacobi family, downward closed set)."""
    return float(basis.n) ** (1 - 2 * _require_jacobi(basis))


def christoffel_sum_upper_bound(basis: TensorBasis) -> float:
    """Analytic bound $n^{2B}$ on $\\max_y \\sum_j \\psi_j(y)^2$."""
    return float(basis.n) ** (2 * _require_jacobi(basis))


GRID_POINTS_1D = 2048
GRID_TOTAL_CAP = 2**22


def max_christoffel_sum(basis: TensorBasis) -> float:
    """Numerical $\\max_{y \\in [-1,1]^d} \\sum_j \\psi_j(y)^2$ for bounded families.

    A Chebyshev-Lobatto tensor grid (2048 points per coordinate, capped at about
    4M points in total) is scanned, then the best grid point is refined with a
    bounded quasi-Newton search.
    """
    if not basis.family.bounded:
        return math.inf
    if basis.n == 1:
        return 1.0
    d = basis.dim
    npts = max(3, min(GRID_POINTS_1D, int(math.floor(GRID_TOTAL_CAP ** (1.0 / d) + 1e-9))))
    grid = -np.cos(np.pi * np.arange(npts) / (npts - 1))
    table = basis.family.eval_all(grid, basis.index_set.max_degree) ** 2
    total = np.zeros((npts,) * d)
    for nu in basis.index_set:
        term = table[:, nu[0]]
        for q in range(1, d):
            term = np.multiply.outer(term, table[:, nu[q]])
        total += term
    flat = int(np.argmax(total))
    best = float(total.flat[flat])
    y0 = grid[list(np.unravel_index(flat, total.shape))]

    def neg(y):
        return -float(basis.christoffel_sum(np.clip(y, -1, 1).reshape(1, -1), check=False)[0])

    res = optimize.minimize(neg, y0, method="L-BFGS-B", bounds=[(-1.0, 1.0)] * d)
    return max(best, -float(res.fun))


def numeric_w_min(basis: TensorBasis) -> float:
    """$w_{min} = \\min_y w(y)$ by grid search; 0 for unbounded domains."""
    if not basis.family.bounded:
        return 0.0
    return basis.n / max_christoffel_sum(basis)
