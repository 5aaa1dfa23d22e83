import json
import math

import numpy as np
import pytest

from randcub import harness
from randcub.basis import PolynomialFamily, TensorBasis
from randcub.cubature import BudgetUnavailableError
from randcub.index_sets import total_degree_set

LEG = PolynomialFamily("legendre")


def config(**over):
    cfg = {
        "basis": {"family": "legendre"},
        "index_set": {"type": "total_degree", "dim": 2, "order": 3},
        "estimators": ["conditioned", "monte_carlo"],
        "m": {"policy": "explicit", "values": [200]},
        "trials": 6,
        "seed": 5,
        "integrand": {"name": "product_exponential"},
    }
    cfg.update(over)
    return harness.ExperimentConfig.from_dict(cfg)


def test_registry_examples():
    b2 = TensorBasis(LEG, total_degree_set(2, 3))
    f = harness.integrand_registry("product_exponential")
    assert harness.reference_integral(f, b2) == pytest.approx(1.38109786, abs=5e-8)
    assert harness.reference_integral(f, b2) == pytest.approx(math.sinh(1) ** 2, rel=1e-15)
    poly = harness.integrand_registry("polynomial", {"coefficients": np.eye(10)[0].tolist()}, b2)
    assert harness.reference_integral(poly, b2) == 1.0
    b1 = TensorBasis(LEG, total_degree_set(1, 1))
    cos = harness.integrand_registry("cosine_product")
    assert harness.reference_integral(cos, b1) == pytest.approx(2 / math.pi)
    with pytest.raises(harness.ConfigError):
        harness.integrand_registry("nope")
    with pytest.raises(harness.ConfigError):
        harness.integrand_registry("polynomial", {"coefficients": [1.0]}, b2)


@pytest.mark.parametrize("family", ["legendre", "chebyshev", "hermite"])
@pytest.mark.parametrize("name", ["product_exponential", "cosine_product"])
def test_closed_forms_match_quadrature(family, name):
    b = TensorBasis(PolynomialFamily(family), total_degree_set(2, 1))
    f = harness.integrand_registry(name)
    assert f.exact(b.family, 2) == pytest.approx(harness.quadrature(f, b)[0], rel=1e-12)


def test_quadrature_quantities():
    b = TensorBasis(LEG, total_degree_set(1, 2))
    # polynomial in V_n: best-approximation error is zero
    poly = harness.integrand_registry("polynomial", {"coefficients": [0.5, 1.0, -2.0]}, b)
    I, norm, e2, coef = harness.quadrature(poly, b)
    assert I == pytest.approx(0.5) and e2 == pytest.approx(0, abs=1e-12)
    assert norm == pytest.approx(math.sqrt(0.25 + 1 + 4))
    np.testing.assert_allclose(coef, [0.5, 1.0, -2.0], atol=1e-13)
    runge = harness.integrand_registry("runge", {"c": 4.0})
    # closed form for d = 1: arctan(2)/2
    assert harness.reference_integral(runge, b) == pytest.approx(math.atan(2) / 2, rel=1e-12)
    with pytest.raises(harness.ConfigError):
        harness.quadrature(runge, TensorBasis(LEG, total_degree_set(4, 1)))


def test_config_validation():
    with pytest.raises(harness.ConfigError):
        config(trials=0)
    with pytest.raises(harness.ConfigError):
        config(integrand={"name": "missing"})
    with pytest.raises(harness.ConfigError):
        config(estimators=["bogus"])
    cfg = config(orders=[1, 2, 3], index_set={"type": "total_degree", "dim": 2})
    assert [b.n for b in cfg.bases()] == [3, 6, 10]
    budget = config(m={"policy": "budget", "r": 1, "delta": 0.5, "multipliers": [1, 2]})
    assert budget.m_values(budget.bases()[0]) == [1330, 2660]


def test_monte_carlo_constant_has_zero_error():
    b = TensorBasis(LEG, total_degree_set(2, 3))
    cfg = config(
        estimators=["monte_carlo"],
        integrand={"name": "polynomial", "params": {"coefficients": np.eye(10)[0].tolist()}},
    )
    rows, _ = harness.run_convergence(cfg, write=False)
    assert all(r.abs_error == 0 for r in rows)


def test_conditioned_exact_on_polynomials():
    rng = np.random.default_rng(0)
    c = rng.standard_normal(10).tolist()
    cfg = config(
        estimators=["conditioned"],
        m={"policy": "budget"},
        trials=10,
        integrand={"name": "polynomial", "params": {"coefficients": c}},
    )
    rows, summary = harness.run_convergence(cfg, write=False)
    bad = [r for r in rows if not r.good_event]
    bad_contrib = sum(abs(c[0]) for _ in bad) / len(rows)
    assert summary["groups"][0]["mean_abs_error"] <= 1e-8 + bad_contrib


def test_csv_round_trip_and_summary_recomputation(tmp_path):
    out = tmp_path / "trials.csv"
    cfg = config(output=str(out), estimators=["conditioned", "ls", "control_variate", "monte_carlo", "importance_sampling"])
    rows, summary = harness.run_convergence(cfg)
    text = out.read_text()
    assert text.startswith(harness.CSV_SCHEMA + "\n")
    loaded = harness.load_rows(out)
    assert loaded == rows
    assert harness.summarize(loaded) == summary["groups"]
    on_disk = json.loads((tmp_path / "trials.csv.summary.json").read_text())
    assert on_disk["groups"] == json.loads(json.dumps(summary["groups"]))
    # rows sorted by trial inside each (n, m, estimator) block
    trials = [r.trial for r in rows if r.estimator == "conditioned"]
    assert trials == sorted(trials)


def test_floats_written_with_17_digits(tmp_path):
    rows, _ = harness.run_convergence(config(trials=2), write=False)
    text = harness.rows_to_csv(rows)
    line = text.splitlines()[2].split(",")
    assert float(line[4]) == rows[0].estimate
    assert float(line[5]) == rows[0].reference


def test_summary_statistics_by_hand():
    mk = lambda t, est, good: harness.TrialRow(t, 3, 10, "conditioned", est, 1.0, 0.1, good, True, None, t)
    rows = [mk(0, 1.5, True), mk(1, 0.0, False), mk(2, 1.0, True), mk(3, 1.25, True)]
    (g,) = harness.summarize(rows)
    err = np.array([0.5, 1.0, 0.0, 0.25])
    assert g["mean_abs_error"] == pytest.approx(err.mean())
    assert g["rmse"] == pytest.approx(math.sqrt(np.mean(err**2)))
    assert g["good_event_rate"] == 0.75
    assert g["good_event_stderr"] == pytest.approx(math.sqrt(0.75 * 0.25 / 4))
    assert g["positivity_rate"] == 1.0 and g["sandwich_rate"] is None


def test_reproducible_bytes_across_thread_counts(monkeypatch):
    cfg = config(trials=8)
    one = harness.rows_to_csv(harness.run_convergence(cfg, threads=1, write=False)[0])
    many = harness.rows_to_csv(harness.run_convergence(cfg, threads=8, write=False)[0])
    assert one == many
    monkeypatch.setenv("RANDCUB_THREADS", "2")
    assert harness.thread_count(16) == 2
    assert harness.rows_to_csv(harness.run_convergence(cfg, write=False)[0]) == one


def test_write_failure_is_io_error(tmp_path):
    cfg = config(trials=1, output=str(tmp_path / "missing_dir" / "x.csv"))
    with pytest.raises(OSError):
        harness.run_convergence(cfg)


def test_load_rejects_unknown_schema(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# other v9\n")
    with pytest.raises(ValueError):
        harness.load_rows(p)


def test_positivity_runs():
    cfg = config(basis={"family": "chebyshev"}, index_set={"type": "total_degree", "dim": 1, "order": 0}, trials=5)
    res = harness.run_positivity(cfg, write=False)["results"]
    assert res[0]["positivity_rate"] == 1.0 and res[0]["budgeted"]
    cfg3 = config(basis={"family": "chebyshev"}, index_set={"type": "total_degree", "dim": 1, "order": 2}, trials=20)
    res3 = harness.run_positivity(cfg3, write=False)["results"]
    budget, contrast = res3
    assert contrast["m"] == 3 and contrast["guaranteed_rate"] is None
    p = budget["guaranteed_rate"]
    assert budget["positivity_rate"] >= p - 3 * math.sqrt(p * (1 - p) / 20)
    with pytest.raises(BudgetUnavailableError):
        harness.run_positivity(config(basis={"family": "hermite"}), write=False)


def test_budget_table():
    table = harness.budget_table([5, 10, 20], [1.0], [0.5])
    assert [r["min_samples"] for r in table] == sorted(r["min_samples"] for r in table)
    row10 = next(r for r in table if r["n"] == 10)
    assert row10["min_samples"] == 1330
    assert all(r["min_samples_positive"] > 10 * r["min_samples"] for r in table)
    assert [r["min_samples_positive"] for r in table] == sorted(r["min_samples_positive"] for r in table)
    herm = harness.budget_table([4], [1.0], [0.5], PolynomialFamily("hermite"))
    assert herm[0]["min_samples_positive"] is None


def test_good_event_rate_at_budget():
    cfg = config(estimators=["conditioned"], m={"policy": "budget"}, trials=40)
    _, summary = harness.run_convergence(cfg, write=False)
    g = summary["groups"][0]
    p = 1 - 2 / g["m"]
    assert g["good_event_rate"] >= p - 3 * math.sqrt(p * (1 - p) / 40)
