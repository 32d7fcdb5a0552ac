import dataclasses
import math

import numpy as np
import pytest

from cpapprox.bounds import (
    BoundReport,
    LowerBoundProbe,
    epsilon_set,
    v_functional_bounds,
    rate_lower,
    rate_upper,
    v_functional,
    v_functional_quadrature,
)
from cpapprox.errors import HypothesisViolated, InvalidOrder, ZeroMarginal
from cpapprox.lattice import point_mass
from cpapprox.model import MarginalTable, marginals, random_model, two_runs_model

from support import random_probe, random_signed_measure

EPS_FIELDS = [f"eps{i}" for i in range(1, 7)]


def test_single_coordinate_values():
    eps = epsilon_set(MarginalTable.independent([0.04]), 100)
    assert eps.gamma[0] == pytest.approx(2.0)
    assert eps.eps1 == pytest.approx(8e-4, rel=1e-14)
    assert eps.eps3 == pytest.approx(0.04, rel=1e-14)


def test_independent_closed_forms():
    p = np.array([0.01, 0.004, 0.02])
    eps = epsilon_set(MarginalTable.independent(p), 500)
    s = np.sqrt(p).sum() ** 2
    assert eps.eps3 == pytest.approx(s, rel=1e-13)
    assert eps.eps4 == pytest.approx(2 * s, rel=1e-13)


def test_epsilons_nonnegative_on_random_tables():
    rng = np.random.default_rng(0)
    for _ in range(20):
        eps = epsilon_set(marginals(random_model(rng, int(rng.integers(1, 4)))), 1000)
        assert np.all(eps.gamma >= 1)
        assert all(getattr(eps, f) >= 0 for f in EPS_FIELDS)


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    for _ in range(10):
        table = marginals(random_model(rng, 3))
        perm = rng.permutation(3)
        a = epsilon_set(table, 2000)
        b = epsilon_set(table.permuted(perm), 2000)
        for f in EPS_FIELDS:
            assert getattr(b, f) == pytest.approx(getattr(a, f), rel=1e-12)
        np.testing.assert_allclose(b.gamma, a.gamma[perm])


def test_zero_marginal():
    table = MarginalTable.independent([0.01, 0.0])
    with pytest.raises(ZeroMarginal):
        epsilon_set(table, 100)
    eps = epsilon_set(table, 100, allow_zero=True)
    assert eps.eps1 > 0 and math.isnan(eps.eps3)


def test_upper_rate_examples():
    eps = epsilon_set(MarginalTable.independent([0.04]), 100)
    assert rate_upper("poisson", eps, math.inf) == pytest.approx(0.04, rel=1e-13)
    assert rate_upper("poisson", eps, 2) == pytest.approx(100 * 8e-4 * 2**-0.5, rel=1e-13)
    assert rate_upper("poisson", eps, 2) == pytest.approx(0.05657, abs=1e-5)


def test_upper_rate_order_range():
    eps = epsilon_set(MarginalTable.independent([0.04]), 100)
    with pytest.raises(InvalidOrder):
        rate_upper("g", eps, 1.5)


def test_signed_rate_below_poisson_rate_for_small_p():
    for q in (0.01, 0.05, 0.1):
        eps = epsilon_set(marginals(two_runs_model(q, q, 0.5)), 3000)
        assert eps.eps2 <= eps.eps1
        assert rate_upper("g", eps) <= rate_upper("poisson", eps)


def test_corrected_rate_form():
    eps = epsilon_set(marginals(two_runs_model(0.05, 0.05, 0.5)), 1600)
    expected = (eps.n * eps.eps2 + eps.n**2 * eps.eps1**2) / np.prod(eps.gamma)
    assert rate_upper("a1", eps) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_upper_rate_scaling_in_n(k):
    p = np.linspace(0.01, 0.02, k)
    table = MarginalTable.independent(p)
    a, b = epsilon_set(table, 400), epsilon_set(table, 800)
    assert np.all(a.np_ >= 1)
    # displayed powers: n and prod(gamma)^-1 with the functionals held fixed
    frozen = dataclasses.replace(b, **{f: getattr(a, f) for f in EPS_FIELDS})
    assert rate_upper("g", frozen) / rate_upper("g", a) == pytest.approx(2 * 2 ** (-k / 2), rel=1e-12)
    # eps2 itself carries gamma^-3, adding a further 2^-3/2
    assert rate_upper("g", b) / rate_upper("g", a) == pytest.approx(2 * 2 ** (-(k + 3) / 2), rel=1e-12)


def test_lower_bracket_independent_example():
    p = np.array([0.01, 0.02])
    n, b = 1000, 4.0
    eps = epsilon_set(MarginalTable.independent(p), n)
    br = rate_lower("poisson", eps, math.inf, b=b)
    prefactor = np.prod(n * p) ** -0.5
    assert b**2 * br.value == pytest.approx(0.5 * np.sqrt(p).sum() ** 2 * prefactor, rel=1e-12)
    assert br.main >= 0 and br.correction >= 0


def test_lower_bracket_orders():
    eps = epsilon_set(marginals(two_runs_model(0.05, 0.05, 0.5)), 6400)
    tv = rate_lower("poisson", eps, 1)
    inf = rate_lower("poisson", eps, math.inf)
    assert tv.main == pytest.approx(eps.eps3, rel=1e-14)  # order 1 removes every prefactor
    assert inf.main == pytest.approx(eps.eps3 / math.sqrt(np.prod(eps.np_)), rel=1e-14)
    g = rate_lower("g", eps, 2, b=2)
    scale = 5.0 ** (-2 * 0.5) * np.prod(eps.np_) ** -0.25 / (8 * math.sqrt(eps.n))
    assert g.main == pytest.approx(scale * eps.eps5, rel=1e-13)
    assert g.correction == pytest.approx(scale * eps.eps6 / 2, rel=1e-13)


def test_lower_bracket_hypothesis():
    eps = epsilon_set(MarginalTable.independent([0.005]), 100)  # n p = 0.5
    with pytest.raises(HypothesisViolated):
        rate_lower("poisson", eps)
    eps = epsilon_set(MarginalTable.independent([0.05]), 100)
    with pytest.raises(ValueError):
        rate_lower("a1", eps)
    with pytest.raises(ValueError):
        rate_lower("poisson", eps, b=0.5)


def test_v_point_mass():
    for k in (1, 2, 3):
        probe = LowerBoundProbe(np.zeros(k), np.ones(k), "gauss")
        assert v_functional(point_mass((0,) * k), probe) == pytest.approx((2 * math.pi) ** (k / 2))
    odd = LowerBoundProbe(np.zeros(2), np.ones(2), ("gauss", "t_gauss"))
    assert abs(v_functional(point_mass((0, 0)), odd)) < 1e-15


def test_probe_validation():
    with pytest.raises(ValueError):
        LowerBoundProbe([0.0], [0.5], "gauss")
    with pytest.raises(ValueError):
        LowerBoundProbe([0.0], [1.0], "cauchy")


def test_v_matches_quadrature():
    rng = np.random.default_rng(2)
    for _ in range(30):
        M = random_signed_measure(rng)
        probe = random_probe(rng, M)
        assert abs(v_functional(M, probe) - v_functional_quadrature(M, probe)) < 1e-8


def test_v_functional_bound_chain():
    rng = np.random.default_rng(3)
    for _ in range(30):
        M = random_signed_measure(rng)
        probe = random_probe(rng, M)
        v = abs(v_functional(M, probe))
        for alpha in (1.5, 2, 4):
            bounds = v_functional_bounds(M, probe, alpha)
            assert v <= bounds["alpha"] + 1e-9
        assert v <= bounds["tv"] + 1e-9
        assert v <= bounds["inf"] + 1e-9


def test_report_serialization():
    report = BoundReport(model={"two_runs": {"q": 0.05}}, n=10, norms={"inf": {"g": np.float64(0.5)}},
                         epsilons={"eps3": float("nan")}, gammas=np.array([1.0, 2.0]))
    d = report.to_dict()
    assert d["epsilons"]["eps3"] is None
    assert d["gammas"] == [1.0, 2.0]
    assert report.to_json() == report.to_json()
    assert report.to_json().endswith("}\n")
