"""Independent reference implementations used by the tests.

None of these share code with the package: polynomials come from
``numpy.polynomial`` / ``scipy.special`` closed forms, linear algebra from a
hand-written Gaussian elimination, budgets from a linear integer scan.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import special


def enumerate_total_degree(d, k):
    return {nu for nu in itertools.product(range(k + 1), repeat=d) if sum(nu) <= k}


def enumerate_hyperbolic_cross(d, k):
    return {nu for nu in itertools.product(range(k), repeat=d) if math.prod(v + 1 for v in nu) <= k}


def orthonormal_1d(kind, k, t):
    """Orthonormal polynomial of degree ``k`` from library closed forms."""
    t = np.asarray(t, dtype=float)
    if kind == "legendre":
        return math.sqrt(2 * k + 1) * special.eval_legendre(k, t)
    if kind == "chebyshev":
        c = 1.0 if k == 0 else math.sqrt(2.0)
        return c * special.eval_chebyt(k, t)
    if kind == "hermite":
        return special.eval_hermitenorm(k, t) / math.sqrt(math.factorial(k))
    raise ValueError(kind)


def jacobi_orthonormal(k, a, b, t):
    """Orthonormal Jacobi polynomial for the density propto (1-t)^a (1+t)^b."""
    t = np.asarray(t, dtype=float)
    # squared norm of P_k^{(a,b)} under the normalized weight
    log_h = (
        (a + b + 1) * math.log(2)
        - math.log(2 * k + a + b + 1)
        + special.gammaln(k + a + 1)
        + special.gammaln(k + b + 1)
        - special.gammaln(k + a + b + 1)
        - special.gammaln(k + 1)
    )
    log_z = (a + b + 1) * math.log(2) + special.betaln(a + 1, b + 1)
    return special.eval_jacobi(k, a, b, t) / math.exp(0.5 * (log_h - log_z))


def gauss_solve(A, rhs):
    """Gaussian elimination with partial pivoting, written out by hand."""
    A = [list(map(float, row)) for row in np.asarray(A)]
    x = list(map(float, np.asarray(rhs)))
    n = len(A)
    for col in range(n):
        piv = max(range(col, n), key=lambda i: abs(A[i][col]))
        A[col], A[piv] = A[piv], A[col]
        x[col], x[piv] = x[piv], x[col]
        for i in range(col + 1, n):
            f = A[i][col] / A[col][col]
            for j in range(col, n):
                A[i][j] -= f * A[col][j]
            x[i] -= f * x[col]
    out = [0.0] * n
    for i in reversed(range(n)):
        s = x[i] - sum(A[i][j] * out[j] for j in range(i + 1, n))
        out[i] = s / A[i][i]
    return np.array(out)


def naive_weights(psi, w):
    """Cubature weights and Gramian from plain loops: alpha = W^{1/2} D G^{-1} e1 / m."""
    m, n = psi.shape
    D = [[math.sqrt(w[i]) * psi[i, j] for j in range(n)] for i in range(m)]
    G = [[sum(D[i][a] * D[i][b] for i in range(m)) / m for b in range(n)] for a in range(n)]
    e1 = [1.0] + [0.0] * (n - 1)
    h = gauss_solve(G, e1)
    alpha = np.array([math.sqrt(w[i]) * sum(D[i][j] * h[j] for j in range(n)) / m for i in range(m)])
    return alpha, np.array(G)


def naive_beta(psi, w, f):
    m, n = psi.shape
    D = np.sqrt(w)[:, None] * psi
    G = [[sum(D[i, a] * D[i, b] for i in range(m)) / m for b in range(n)] for a in range(n)]
    rhs = [sum(D[i, a] * math.sqrt(w[i]) * f[i] for i in range(m)) / m for a in range(n)]
    return gauss_solve(G, rhs)


def scan_min_m(threshold, start=3):
    """Smallest integer m >= start with m / ln m >= threshold, by linear scan."""
    m = start
    while m / math.log(m) < threshold:
        m += 1
    return m


def chebyshev_induced_cdf(k, t):
    """CDF of phi_k^2 d(arcsine) in closed form via theta = arccos(-t)."""
    th = np.arccos(-np.asarray(t, dtype=float))
    if k == 0:
        return th / np.pi
    # phi_k(-cos th)^2 = 2 cos^2(k th); integral of 2cos^2(k s)/pi from 0 to th
    return th / np.pi + np.sin(2 * k * th) / (2 * k * np.pi)
