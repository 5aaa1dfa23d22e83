import math

import numpy as np
import pytest
from scipy import integrate, stats

from randcub.basis import PolynomialFamily, TensorBasis
from randcub.index_sets import total_degree_set
from randcub.rng import make_rng, mix
from randcub.sampling import BaseMeasureSampler, build_induced_sampler, sample_mu, sample_sigma

from oracles import chebyshev_induced_cdf, jacobi_orthonormal, orthonormal_1d

FAMILIES = [
    PolynomialFamily("legendre"),
    PolynomialFamily("chebyshev"),
    PolynomialFamily("hermite"),
    PolynomialFamily("jacobi", 1, 2),
]
M = 100_000


def _density_oracle(family, k):
    if family.kind == "jacobi":
        return lambda t: jacobi_orthonormal(k, family.theta1, family.theta2, t) ** 2 * family.density(t)
    return lambda t: orthonormal_1d(family.kind, k, t) ** 2 * family.density(t)


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.kind)
@pytest.mark.parametrize("k", [0, 1, 2, 5, 8])
def test_induced_draws_pass_ks(family, k):
    sampler = build_induced_sampler(family, k)
    draws = sampler.sample(make_rng(mix(11, k)), M)
    res = stats.kstest(draws, sampler.cdf)
    assert res.statistic <= 0.01
    assert res.pvalue > 1e-3


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.kind)
@pytest.mark.parametrize("k", [1, 3, 8])
def test_tabulated_cdf_matches_quadrature(family, k):
    sampler = build_induced_sampler(family, k)
    dens = _density_oracle(family, k)
    lo = -1.0 if family.bounded else -math.inf
    ts = np.linspace(-0.95, 0.95, 9) * (1 if family.bounded else 4)
    for t in ts:
        ref, _ = integrate.quad(lambda s: float(dens(s)), lo, t, limit=200, epsabs=1e-13)
        assert sampler.cdf(t) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("k", [0, 2, 5])
def test_chebyshev_matches_angle_closed_form(k):
    sampler = build_induced_sampler(PolynomialFamily("chebyshev"), k)
    draws = sampler.sample(make_rng(5), M)
    res = stats.kstest(draws, lambda t: chebyshev_induced_cdf(k, t))
    assert res.statistic <= 0.01


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.kind)
def test_inverse_cdf_round_trip(family):
    sampler = build_induced_sampler(family, 4)
    u = np.linspace(1e-6, 1 - 1e-6, 2001)
    np.testing.assert_allclose(sampler.cdf(sampler.inverse_cdf(u)), u, atol=1e-9)


def test_legendre_second_moment():
    draws = build_induced_sampler(PolynomialFamily("legendre"), 1).sample(make_rng(3), M)
    assert abs(np.mean(draws**2) - 3 / 5) <= 0.01
    # closed-form CDF (t^3 + 1)/2 for density 3t^2/2
    assert stats.kstest(draws, lambda t: (t**3 + 1) / 2).statistic <= 0.01


def test_degree_zero_is_base_measure():
    s = build_induced_sampler(PolynomialFamily("legendre"), 0)
    assert isinstance(s, BaseMeasureSampler)
    np.testing.assert_allclose(s.inverse_cdf(np.array([0.0, 0.5, 1.0])), [-1.0, 0.0, 1.0])
    assert build_induced_sampler(PolynomialFamily("legendre"), 3) is build_induced_sampler(PolynomialFamily("legendre"), 3)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        build_induced_sampler(PolynomialFamily("legendre"), -1)
    with pytest.raises(ValueError):
        build_induced_sampler(PolynomialFamily("legendre"), 2).inverse_cdf(np.array([1.2]))
    b = TensorBasis(PolynomialFamily("legendre"), total_degree_set(1, 1))
    with pytest.raises(ValueError):
        sample_sigma(b, 0, 1)
    with pytest.raises(ValueError):
        sample_mu(b, 0, 1)


def test_constant_basis_reduces_to_mu():
    b = TensorBasis(PolynomialFamily("legendre"), total_degree_set(2, 0))
    s, u = sample_sigma(b, 500, 9), sample_mu(b, 500, 9)
    np.testing.assert_array_equal(s.nodes, u.nodes)
    np.testing.assert_array_equal(s.w_values, np.ones(500))


def test_sigma_expectations_legendre():
    b = TensorBasis(PolynomialFamily("legendre"), total_degree_set(1, 1))
    s = sample_sigma(b, M, 21)
    assert abs(s.w_values.mean() - 1) <= 0.02
    psi2 = orthonormal_1d("legendre", 2, s.nodes[:, 0])
    assert abs(np.mean(s.w_values * psi2**2) - 1) <= 0.05


@pytest.mark.parametrize("family", FAMILIES[:3], ids=lambda f: f.kind)
def test_normalization_and_gramian_unbiased(family):
    b = TensorBasis(family, total_degree_set(2, 2))
    s = sample_sigma(b, M, 4)
    assert abs(s.w_values.mean() - 1) <= 5 / math.sqrt(M)
    psi = b.evaluate(s.nodes)
    emp = (s.w_values[:, None] * psi).T @ psi / M
    # per-entry scale from the sample itself: |w psi_j psi_k| <= n, variance well below n^2
    scale = np.sqrt((s.w_values[:, None] * psi**2).max(axis=0))
    tol = 5 / math.sqrt(M) * np.outer(scale, scale)
    assert np.all(np.abs(emp - np.eye(b.n)) <= tol)


def test_mu_moments():
    leg = TensorBasis(PolynomialFamily("legendre"), total_degree_set(2, 1))
    y = sample_mu(leg, M, 8).nodes
    assert np.all(np.abs(y.mean(axis=0)) <= 0.01)
    herm = TensorBasis(PolynomialFamily("hermite"), total_degree_set(1, 1))
    assert abs(sample_mu(herm, M, 8).nodes.var() - 1) <= 0.03
    single = sample_mu(leg, 1, 0)
    assert single.nodes.shape == (1, 2) and np.all(np.abs(single.nodes) <= 1)


def test_determinism_and_seed_dependence():
    b = TensorBasis(PolynomialFamily("chebyshev"), total_degree_set(2, 3))
    a1, a2 = sample_sigma(b, 1000, 42), sample_sigma(b, 1000, 42)
    assert a1.nodes.tobytes() == a2.nodes.tobytes()
    assert a1.w_values.tobytes() == a2.w_values.tobytes()
    assert not np.array_equal(a1.nodes, sample_sigma(b, 1000, 43).nodes)


def test_mixture_components_are_uniform():
    # sigma-marginal of the first coordinate: average of phi_{nu_1}^2 over the set
    fam = PolynomialFamily("legendre")
    b = TensorBasis(fam, total_degree_set(2, 2))
    y = sample_sigma(b, M, 17).nodes[:, 0]
    deg = b.index_set.array[:, 0]

    def cdf(t):
        return np.mean([build_induced_sampler(fam, int(k)).cdf(t) for k in deg], axis=0)

    assert stats.kstest(y, cdf).statistic <= 0.01


def test_mix_is_deterministic_and_distinct():
    assert mix(1, 2) == mix(1, 2)
    assert len({mix(1, t) for t in range(1000)}) == 1000
    assert mix(1, 0, 1) != mix(1, 1, 0)
