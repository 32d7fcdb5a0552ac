import math

import numpy as np
import pytest

from cpapprox.approx import charfn_approx, poisson_product
from cpapprox.errors import NonVanishingImaginary
from cpapprox.exact import exact_distribution
from cpapprox.lattice import LatticeMeasure, mass, norm, point_mass, subtract
from cpapprox.model import MarginalTable, marginals, two_runs_model
from cpapprox.spectral import (
    CharFnGrid,
    charfn_of_measure,
    invert_charfn,
    next_pow2,
    parseval_l2sq,
    sample_charfn,
    torus_points,
)


def random_box_measure(rng):
    k = int(rng.integers(1, 3))
    ext = tuple(int(e) for e in rng.integers(1, 10, size=k))
    return LatticeMeasure(rng.normal(size=ext))


def direct_grid(M, sizes=None):
    sizes = M.extents if sizes is None else sizes
    return sample_charfn(lambda t: charfn_of_measure(M, t), sizes)


def test_point_masses():
    t = np.array([0.3, -1.1])
    assert charfn_of_measure(point_mass((0, 0)), t) == pytest.approx(1.0)
    assert charfn_of_measure(point_mass((1, 0)), t) == pytest.approx(np.exp(0.3j))


def test_single_step_charfn():
    m = two_runs_model(0.3, 0.2, 0.6)
    p = marginals(m).p
    F1 = exact_distribution(m, 1)
    rng = np.random.default_rng(0)
    for _ in range(10):
        t = rng.uniform(-np.pi, np.pi, size=2)
        expected = 1 + np.sum(p * (np.exp(1j * t) - 1))
        assert abs(charfn_of_measure(F1, t) - expected) < 1e-12


def test_sample_constant_and_roots():
    g = sample_charfn(lambda t: np.ones(t.shape[1:]), (4,))
    assert np.allclose(g.values, 1.0)
    g = sample_charfn(lambda t: np.exp(1j * t[0]), (4,))
    np.testing.assert_allclose(g.values, [1, 1j, -1, -1j], atol=1e-15)


def test_poisson_charfn_at_zero():
    table = MarginalTable.independent([0.01])
    g = sample_charfn(lambda t: charfn_approx("poisson", table, 50, t), (8,))
    assert g.values[0] == pytest.approx(1.0)


def test_ones_invert_to_point_mass():
    M = invert_charfn(CharFnGrid(np.ones(4, dtype=complex)))
    np.testing.assert_allclose(M.values, [1, 0, 0, 0], atol=1e-15)


def test_roundtrip_poisson_product():
    P = poisson_product([1.5, 0.7], (24, 20))
    back = invert_charfn(direct_grid(P))
    assert np.abs(back.values - P.values).max() < 1e-12


def test_roundtrip_with_larger_grid():
    rng = np.random.default_rng(1)
    M = random_box_measure(rng)
    sizes = tuple(next_pow2(e + 3) for e in M.extents)
    back = invert_charfn(direct_grid(M, sizes))
    assert np.abs(back.embed(M.extents).values - M.values).max() < 1e-12
    assert np.abs(back.values).sum() - np.abs(M.values).sum() < 1e-11


def test_grid_origin_is_mass_and_conjugate_symmetric():
    rng = np.random.default_rng(2)
    for _ in range(10):
        M = random_box_measure(rng)
        g = direct_grid(M)
        assert abs(g.values.flat[0] - mass(M)) < 1e-12
        mirrored = g.values[np.ix_(*[(-np.arange(N)) % N for N in g.sizes])]
        assert np.abs(mirrored - np.conj(g.values)).max() < 1e-12


def test_parseval_point_mass():
    assert parseval_l2sq(direct_grid(point_mass((0,)), (8,))) == pytest.approx(1.0)


def test_parseval_poisson_series():
    expected = math.exp(-2) * math.fsum(1 / math.factorial(s) ** 2 for s in range(60))
    assert expected == pytest.approx(0.3085083, abs=1e-7)
    P = poisson_product([1.0], (64,))
    assert parseval_l2sq(direct_grid(P)) == pytest.approx(expected, abs=1e-12)


def test_parseval_matches_l2_norm():
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = random_box_measure(rng)
        assert parseval_l2sq(direct_grid(M)) == pytest.approx(norm(M, 2) ** 2, abs=1e-10)


def test_linearity():
    rng = np.random.default_rng(4)
    Ma = LatticeMeasure(rng.normal(size=(3, 5)))
    Mb = LatticeMeasure(rng.normal(size=(4, 2)))
    t = torus_points((6, 6))
    lhs = charfn_of_measure(subtract(Ma, Mb), t)
    rhs = charfn_of_measure(Ma, t) - charfn_of_measure(Mb, t)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_aliasing_self_check_for_g():
    table = MarginalTable.independent([0.01])
    f = lambda t: charfn_approx("g", table, 100, t)
    coarse = invert_charfn(sample_charfn(f, (64,))).values
    fine = invert_charfn(sample_charfn(f, (128,))).values[:64]
    assert np.abs(coarse - fine).max() < 1e-9


def test_imaginary_residue_detected():
    g = sample_charfn(lambda t: np.exp(1j * t[0]) * 1j, (8,))
    with pytest.raises(NonVanishingImaginary):
        invert_charfn(g)


def test_next_pow2():
    assert [next_pow2(n) for n in (1, 2, 3, 33, 64)] == [1, 2, 4, 64, 64]
