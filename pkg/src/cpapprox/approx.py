"""Poisson, Poisson plus first-order correction, and signed compound Poisson approximants.

All three are driven by ``lambda = (n p_1, ..., n p_k)`` and the matrix

    d[j, r] = (n - 1) (p_jr - p_j p_r) - (n / 2) p_j p_r,

which collects the second-order terms of the expansion in ``z_j = e^{i t_j} - 1``.
The corrected measure adds ``Pois^ * sum d[j, r] z_j z_r`` to the Poisson
characteristic function; the signed compound Poisson measure ``G`` puts the same
quadratic form into the exponent instead.
"""

from __future__ import annotations

import enum
import warnings
from typing import Sequence

import numpy as np

from .errors import AliasingNotConverged, DimensionMismatch, InvalidHorizon, NegativeRate
from .lattice import LatticeMeasure, add
from .model import MarginalTable, check_conditions
from .spectral import next_pow2, sample_charfn, invert_charfn

ALIAS_TOL = 1e-9
MAX_GRID = 2**14
UNDERFLOW = 1e-300


class ApproxKind(enum.Enum):
    POISSON = "poisson"
    POISSON_PLUS_A1 = "a1"
    SIGNED_CP = "g"

    @classmethod
    def parse(cls, label) -> "ApproxKind":
        if isinstance(label, cls):
            return label
        key = str(label).strip().lower()
        aliases = {"pois": "poisson", "poisson+a1": "a1", "poissonplusa1": "a1",
                   "signedcp": "g", "cp": "g"}
        return cls(aliases.get(key, key))


def _check_n(n: int) -> None:
    if n < 1:
        raise InvalidHorizon(f"n must be >= 1, got {n}")


def poisson_pmf(lam: float, size: int) -> np.ndarray:
    """``P(lam, s)`` for ``s = 0 .. size-1`` by upward recursion on the log scale."""
    if lam < 0:
        raise NegativeRate(f"Poisson rate must be nonnegative, got {lam}")
    out = np.zeros(size)
    if size == 0:
        return out
    if lam == 0:
        out[0] = 1.0
        return out
    s = np.arange(1, size)
    logp = np.concatenate([[-lam], -lam + np.cumsum(np.log(lam) - np.log(s))])
    out = np.exp(logp)
    out[out < UNDERFLOW] = 0.0
    return out


def _outer(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def _rates(table: MarginalTable, n: int) -> np.ndarray:
    return n * table.p


def d_matrix(table: MarginalTable, n: int) -> np.ndarray:
    pp = np.outer(table.p, table.p)
    return (n - 1) * (table.p2 - pp) - 0.5 * n * pp


def poisson_product(lam, extents: Sequence[int]) -> LatticeMeasure:
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    if len(extents) != lam.size:
        raise DimensionMismatch(f"{lam.size} rates but {len(extents)} extents")
    if np.any(lam < 0):
        raise NegativeRate(f"Poisson rates must be nonnegative, got {lam}")
    return LatticeMeasure(_outer([poisson_pmf(l, N) for l, N in zip(lam, extents)]))


def a1_measure(table: MarginalTable, n: int, extents: Sequence[int]) -> LatticeMeasure:
    """Pointwise finite-difference form of the first-order correction ``A_1``."""
    _check_n(n)
    k = table.k
    d = d_matrix(table, n)
    P, dP, d2P = [], [], []
    for lam, N in zip(_rates(table, n), extents):
        base = poisson_pmf(lam, N)
        shifted = np.concatenate([[0.0], base[:-1]])
        shifted2 = np.concatenate([[0.0, 0.0], base[:-2]])[:N]
        P.append(base)
        dP.append(base - shifted)
        d2P.append(base - 2 * shifted + shifted2)
    out = np.zeros(tuple(extents))
    for j in range(k):
        out += d[j, j] * _outer([d2P[l] if l == j else P[l] for l in range(k)])
        for r in range(k):
            if r != j:
                out += d[j, r] * _outer([dP[l] if l in (j, r) else P[l] for l in range(k)])
    return LatticeMeasure(out)


def _z(t) -> np.ndarray:
    return np.exp(1j * np.asarray(t, dtype=np.float64)) - 1.0


def poisson_charfn(table: MarginalTable, n: int, t) -> np.ndarray:
    z = _z(t)
    return np.exp(np.tensordot(_rates(table, n), z, axes=1))


def correction_exponent(table: MarginalTable, n: int, t) -> np.ndarray:
    """Quadratic form ``sum_{j,m} d[j, m] z_j z_m``."""
    z = _z(t)
    return np.einsum("jm,j...,m...->...", d_matrix(table, n), z, z)


def a1_charfn(table: MarginalTable, n: int, t) -> np.ndarray:
    return poisson_charfn(table, n, t) * correction_exponent(table, n, t)


def charfn_approx(kind, table: MarginalTable, n: int, t):
    _check_n(n)
    kind = ApproxKind.parse(kind)
    base = poisson_charfn(table, n, t)
    if kind is ApproxKind.POISSON:
        out = base
    elif kind is ApproxKind.POISSON_PLUS_A1:
        out = base * (1.0 + correction_exponent(table, n, t))
    else:
        out = base * np.exp(correction_exponent(table, n, t))
    return complex(out) if np.ndim(out) == 0 else out


def g_measure(table: MarginalTable, n: int, extents: Sequence[int],
              sizes: Sequence[int] | None = None, tol: float = ALIAS_TOL,
              max_size: int = MAX_GRID) -> LatticeMeasure:
    """Signed compound Poisson measure on the box ``extents`` by DFT inversion.

    The grid is doubled until two successive inversions agree to ``tol`` on the
    box; the finer one is returned.
    """
    _check_n(n)
    if not check_conditions(table).passed:
        warnings.warn("marginal table violates the smallness conditions", RuntimeWarning, stacklevel=2)
    extents = tuple(int(e) for e in extents)
    if sizes is None:
        sizes = tuple(next_pow2(e) for e in extents)
    else:
        sizes = tuple(max(next_pow2(s), next_pow2(e)) for s, e in zip(sizes, extents))
    box = tuple(slice(0, e) for e in extents)

    def invert(sz):
        grid = sample_charfn(lambda t: charfn_approx(ApproxKind.SIGNED_CP, table, n, t), sz)
        return invert_charfn(grid).values[box]

    coarse = invert(sizes)
    while True:
        finer_sizes = tuple(2 * s for s in sizes)
        if max(finer_sizes) > max_size:
            raise AliasingNotConverged(f"grid {finer_sizes} exceeds the cap {max_size}")
        fine = invert(finer_sizes)
        if np.abs(fine - coarse).max() < tol:
            return LatticeMeasure(fine)
        coarse, sizes = fine, finer_sizes


def approximant(kind, table: MarginalTable, n: int, extents: Sequence[int], **kwargs) -> LatticeMeasure:
    kind = ApproxKind.parse(kind)
    pois = poisson_product(_rates(table, n), extents)
    if kind is ApproxKind.POISSON:
        return pois
    if kind is ApproxKind.POISSON_PLUS_A1:
        return add(pois, a1_measure(table, n, extents))
    return g_measure(table, n, extents, **kwargs)
