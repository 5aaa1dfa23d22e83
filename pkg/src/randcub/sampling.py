r"""Node sampling from the base measure $\mu$ and the induced measure $\sigma$.

The induced measure is

$$
d\sigma = w^{-1} d\mu = \frac{1}{n} \sum_{j=1}^n \psi_j^2 \, d\mu,
$$

an equal-weight mixture of the product densities $\psi_\nu^2 d\mu$. A draw
picks a component $\nu \in \Lambda$ uniformly, then draws each coordinate from
the univariate density $\varphi_{\nu_q}^2 d\mu_1$ by inverse transform on a
tabulated CDF.

The Chebyshev case is tabulated in the angle $\theta$ with $t = -\cos\theta$,
where the density $\varphi_k(-\cos\theta)^2/\pi$ is smooth; the other families
are tabulated directly in $t$ (Hermite on a truncated interval).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import special

from .basis import PolynomialFamily, TensorBasis
from .rng import make_rng

N_PANELS = 4096
GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
NEWTON_TOL = 1e-12
MAX_NEWTON = 60
CHUNK = 1 << 15


@dataclass(frozen=True)
class NodeSample:
    """Nodes with their $w$ values.

    Attributes:
        nodes: ``(m, d)`` array of points.
        w_values: $w(y_i)$ for the basis the sample was drawn for.
        source: ``"sigma"`` or ``"mu"``.
        seed: Seed of the generator that produced the sample.
    """

    nodes: np.ndarray
    w_values: np.ndarray
    source: str
    seed: int

    @property
    def m(self) -> int:
        return self.nodes.shape[0]


class UnivariateInducedSampler:
    """Inverse-CDF sampler for the density $\\varphi_k(t)^2 \\rho_1(t)$.

    The CDF is tabulated at the edges of 4096 equal panels (16-point
    Gauss-Legendre per panel) in a reference variable $s$; inside a panel it is
    completed by a Gauss-Legendre integral from the left edge, and inversion is
    a safeguarded Newton iteration to $|F(t) - u| \\le 10^{-12}$.
    """

    def __init__(self, family: PolynomialFamily, k: int, n_panels: int = N_PANELS):
        if k < 0:
            raise ValueError("degree must be nonnegative")
        self.family = family
        self.k = int(k)
        if family.kind == "chebyshev":
            lo, hi = 0.0, math.pi
        elif family.kind == "hermite":
            T = math.sqrt(2 * k + 1) + 12.0
            lo, hi = -T, T
        else:
            lo, hi = -1.0, 1.0
        self.bounds = (lo, hi)
        self.edges = np.linspace(lo, hi, n_panels + 1)
        h = self.edges[1] - self.edges[0]
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        pts = mids[:, None] + 0.5 * h * GL_NODES[None, :]
        panel = 0.5 * h * (self._density_s(pts) @ GL_WEIGHTS)
        cdf = np.concatenate([[0.0], np.cumsum(panel)])
        self.mass = float(cdf[-1])
        self.cdf_edges = cdf / self.mass
        # positive panel masses; the edge table itself saturates at 1.0 in far Hermite tails
        if not np.all(panel > 0):
            raise RuntimeError(f"tabulated CDF not strictly increasing ({family.kind}, k={k})")
        self.cdf_edges[-1] = 1.0

    # reference variable s -> t
    def _to_t(self, s):
        return -np.cos(s) if self.family.kind == "chebyshev" else s

    def _to_s(self, t):
        t = np.asarray(t, dtype=float)
        if self.family.kind == "chebyshev":
            return np.arccos(-np.clip(t, -1, 1))
        lo, hi = self.bounds
        return np.clip(t, lo, hi)

    def _density_s(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = self._to_t(s)
        phi = self.family.eval_all(t, self.k, check=False)[..., self.k]
        if self.family.kind == "chebyshev":
            return phi**2 / math.pi
        return phi**2 * self.family.density(t)

    def _cdf_s(self, s, panel) -> np.ndarray:
        left = self.edges[panel]
        half = 0.5 * (s - left)
        pts = left[:, None] + half[:, None] * (GL_NODES[None, :] + 1.0)
        part = half * (self._density_s(pts) @ GL_WEIGHTS)
        return self.cdf_edges[panel] + part / self.mass

    def _panel_of(self, s) -> np.ndarray:
        p = np.searchsorted(self.edges, s, side="right") - 1
        return np.clip(p, 0, len(self.edges) - 2)

    def pdf(self, t) -> np.ndarray:
        """Normalized density in $t$."""
        t = np.asarray(t, dtype=float)
        phi = self.family.eval_all(t, self.k, check=False)[..., self.k]
        lo, hi = self.bounds
        inside = (t >= lo) & (t <= hi) if self.family.kind == "hermite" else np.abs(t) <= 1
        return np.where(inside, phi**2 * self.family.density(t) / self.mass, 0.0)

    def cdf(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = np.atleast_1d(self._to_s(t)).ravel()
        out = np.empty_like(s)
        for start in range(0, s.size, CHUNK):
            sl = slice(start, start + CHUNK)
            out[sl] = self._cdf_s(s[sl], self._panel_of(s[sl]))
        out = np.clip(out, 0.0, 1.0).reshape(np.shape(t))
        return float(out) if out.ndim == 0 else out

    def inverse_cdf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        flat = np.atleast_1d(u).ravel()
        if np.any((flat < 0) | (flat > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        out = np.empty_like(flat)
        for start in range(0, flat.size, CHUNK):
            sl = slice(start, start + CHUNK)
            out[sl] = self._invert(flat[sl])
        t = self._to_t(out).reshape(u.shape)
        return float(t) if t.ndim == 0 else t

    def _invert(self, u: np.ndarray) -> np.ndarray:
        ce = self.cdf_edges
        p = np.clip(np.searchsorted(ce, u, side="right") - 1, 0, len(ce) - 2)
        lo = self.edges[p].copy()
        hi = self.edges[p + 1].copy()
        flo, fhi = ce[p], ce[p + 1]
        gap = fhi - flo
        frac = np.where(gap > 0, (u - flo) / np.where(gap > 0, gap, 1.0), 0.5)
        s = lo + (hi - lo) * frac
        active = np.arange(u.size)
        for _ in range(MAX_NEWTON):
            sa, pa, ua = s[active], p[active], u[active]
            err = self._cdf_s(sa, pa) - ua
            done = np.abs(err) <= NEWTON_TOL
            # shrink the bracket, then take Newton if it lands strictly inside
            pos = err > 0
            hi[active[pos]] = sa[pos]
            lo[active[~pos]] = sa[~pos]
            dens = self._density_s(sa) / self.mass
            with np.errstate(divide="ignore", invalid="ignore"):
                step = sa - err / dens
            la, ha = lo[active], hi[active]
            bad = ~np.isfinite(step) | (step <= la) | (step >= ha)
            step = np.where(bad, 0.5 * (la + ha), step)
            s[active[~done]] = step[~done]
            active = active[~done & (ha - la > 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(ha)))]
            if active.size == 0:
                break
        return s

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.inverse_cdf(rng.random(size))


class BaseMeasureSampler:
    """Closed-form inverse CDF of $\\mu_1$ (degree-0 induced density)."""

    def __init__(self, family: PolynomialFamily):
        if family.kind not in ("legendre", "chebyshev", "hermite"):
            raise ValueError("closed-form base sampler only for legendre, chebyshev, hermite")
        self.family = family
        self.k = 0

    def pdf(self, t):
        return self.family.density(t)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        kind = self.family.kind
        if kind == "legendre":
            out = np.clip(0.5 * (t + 1), 0, 1)
        elif kind == "chebyshev":
            out = np.arccos(-np.clip(t, -1, 1)) / math.pi
        else:
            out = special.ndtr(t)
        return float(out) if np.ndim(out) == 0 else out

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        kind = self.family.kind
        if kind == "legendre":
            out = 2 * u - 1
        elif kind == "chebyshev":
            out = -np.cos(math.pi * u)
        else:
            # keep u = 0 off the infinite endpoint
            out = special.ndtri(np.where(u > 0, u, 2.0**-54))
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.inverse_cdf(rng.random(size))


_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def build_induced_sampler(family: PolynomialFamily, k: int):
    """Sampler for $\\varphi_k^2 d\\mu_1$; for ``k = 0`` the base measure sampler.

    Samplers are cached per ``(family, k)`` and are immutable once built.
    """
    key = (family, int(k))
    with _CACHE_LOCK:
        sampler = _CACHE.get(key)
        if sampler is None:
            if k == 0 and family.kind != "jacobi":
                sampler = BaseMeasureSampler(family)
            else:
                sampler = UnivariateInducedSampler(family, k)
            _CACHE[key] = sampler
    return sampler


def _draw_coordinates(family: PolynomialFamily, degrees: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    for k in np.unique(degrees):
        mask = degrees == k
        out[mask] = build_induced_sampler(family, int(k)).inverse_cdf(u[mask])
    return out


def sample_sigma(basis: TensorBasis, m: int, seed: int) -> NodeSample:
    """``m`` i.i.d. nodes from $\\sigma$ via the mixture decomposition.

    The generator first fills an ``(m, d)`` block of uniforms, then (for
    $n > 1$) draws the mixture components, so a one-element basis consumes the
    stream exactly as :func:`sample_mu`.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = make_rng(seed)
    u = rng.random((m, basis.dim))
    if basis.n == 1:
        comp = np.zeros(m, dtype=np.int64)
    else:
        comp = rng.integers(0, basis.n, size=m)
    degrees = basis.index_set.array[comp]
    nodes = _draw_coordinates(basis.family, degrees, u)
    return NodeSample(nodes, basis.weight(nodes, check=False), "sigma", int(seed))


def sample_mu(basis: TensorBasis, m: int, seed: int) -> NodeSample:
    """``m`` i.i.d. nodes from the product base measure $\\mu$."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = make_rng(seed)
    u = rng.random((m, basis.dim))
    nodes = _draw_coordinates(basis.family, np.zeros(u.shape, dtype=np.int64), u)
    return NodeSample(nodes, basis.weight(nodes, check=False), "mu", int(seed))
