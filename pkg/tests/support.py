"""Shared generators for the test suite."""

import numpy as np

from cpapprox.bounds import LowerBoundProbe
from cpapprox.lattice import LatticeMeasure

# Gauss-Hermite with 64 nodes resolves exp(i y x) only for |y| up to about 8
MAX_PROBE_REACH = 8.0


def random_signed_measure(rng, max_k=2, max_extent=32):
    k = int(rng.integers(1, max_k + 1))
    ext = tuple(int(e) for e in rng.integers(1, max_extent + 1, size=k))
    return LatticeMeasure(rng.normal(size=ext) * rng.uniform(1e-3, 1.0))


def random_probe(rng, M):
    a, beta, psi = [], [], []
    for N in M.extents:
        floor = max(1.0, (N - 1) / MAX_PROBE_REACH)
        a.append(rng.uniform(0, N - 1))
        beta.append(floor * rng.uniform(1.0, 3.0))
        psi.append("gauss" if rng.random() < 0.5 else "t_gauss")
    return LowerBoundProbe(np.array(a), np.array(beta), tuple(psi))
