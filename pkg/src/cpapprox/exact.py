"""Exact law of S_n for block-factor models by transfer-matrix recursion."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AliasingNotConverged, BoxOverflow, DimensionMismatch, InvalidHorizon
from .lattice import MASS_TOL, LatticeMeasure, default_extents, mass
from .model import BlockFactorModel, marginals
from .spectral import invert_charfn, next_pow2, sample_charfn

log = logging.getLogger(__name__)

MAX_GROWTH_ROUNDS = 32
SPECTRAL_ALIAS_TOL = 1e-12
MAX_GRID = 2**14


@dataclass(frozen=True)
class TransferResult:
    measure: LatticeMeasure
    escaped: np.ndarray  # mass pushed past the upper face of each axis
    rounds: int


def _run(model: BlockFactorModel, n: int, extents: tuple[int, ...], warmup: int) -> tuple[np.ndarray, np.ndarray]:
    k = model.k
    pi = model.latent_dist
    # W[u, u', r]: weight of emitting label r on the transition u -> u'
    W = np.moveaxis(model.step_kernel(), 0, -1)
    state = np.zeros((model.A,) + extents)
    state[(slice(None),) + (0,) * k] = pi
    escaped = np.zeros(k)

    for _ in range(warmup):
        state = np.einsum("u...,uv->v...", state, W.sum(axis=-1)) * pi.reshape((-1,) + (1,) * k)

    scale = pi.reshape((-1,) + (1,) * k)
    edge_scale = pi.reshape((-1,) + (1,) * (k - 1))
    for _ in range(n):
        # T[u', r, m] = sum_u W[u, u', r] * state[u, m]
        T = np.tensordot(W, state, axes=([0], [0]))
        new = T[:, 0].copy()
        for r in range(1, k + 1):
            ax = r  # axis r of `new` is count axis r-1 (axis 0 is the latent symbol)
            src = T[:, r]
            head = [slice(None)] * (k + 1)
            tail = [slice(None)] * (k + 1)
            head[ax] = slice(1, None)
            tail[ax] = slice(0, -1)
            new[tuple(head)] += src[tuple(tail)]
            edge = [slice(None)] * (k + 1)
            edge[ax] = -1
            escaped[r - 1] += (src[tuple(edge)] * edge_scale).sum()
        state = new * scale
    return state.sum(axis=0), escaped


def transfer(model: BlockFactorModel, n: int, extents: Sequence[int] | None = None,
             grow: bool = True, warmup: int = 0, tol: float = MASS_TOL) -> TransferResult:
    """Run the recursion, doubling leaking axes until the escaped mass is below ``tol``."""
    if n < 1:
        raise InvalidHorizon(f"n must be >= 1, got {n}")
    if extents is None:
        extents = default_extents(marginals(model).p, n)
    extents = tuple(int(e) for e in extents)
    if len(extents) != model.k:
        raise DimensionMismatch(f"{len(extents)} extents for a {model.k}-dim model")
    cap = n + 1
    for rounds in range(MAX_GROWTH_ROUNDS):
        values, escaped = _run(model, n, extents, warmup)
        if not grow or escaped.sum() < tol:
            return TransferResult(LatticeMeasure(values), escaped, rounds)
        grown = tuple(
            min(cap, 2 * e) if esc > 0 else e for e, esc in zip(extents, escaped)
        )
        if grown == extents:
            break
        log.debug("escaped mass %s, growing box %s -> %s", escaped, extents, grown)
        extents = grown
    raise BoxOverflow(f"box growth stopped at {extents} with escaped mass {escaped.sum():.3e}")


def exact_distribution(model: BlockFactorModel, n: int, extents: Sequence[int] | None = None,
                       grow: bool = True, warmup: int = 0) -> LatticeMeasure:
    """Law of ``S_n = X_1 + ... + X_n``.

    ``warmup`` steps advance the latent chain without counting, which gives the
    law of ``X_{w+1} + ... + X_{w+n}``.  Cost is ``O(n A^2 (k+1) prod(extents))``.
    """
    return transfer(model, n, extents, grow=grow, warmup=warmup).measure


def exact_charfn(model: BlockFactorModel, n: int, t) -> np.ndarray:
    """Characteristic function of ``S_n`` as ``pi^T (K(t) diag(pi))^n 1``.

    ``K(t)[u, u'] = sum_r K_r[u, u'] exp(i t_r)`` with ``t_0 = 0``; ``t`` has shape
    ``(k, ...)``.
    """
    if n < 1:
        raise InvalidHorizon(f"n must be >= 1, got {n}")
    t = np.asarray(t, dtype=np.float64)
    pi = model.latent_dist
    kern = model.step_kernel()
    phases = np.concatenate([np.ones((1,) + t.shape[1:]), np.exp(1j * t)])
    step = np.einsum("r...,ruv->...uv", phases, kern) * pi
    power = np.linalg.matrix_power(step, n)
    return np.einsum("u,...uv->...", pi.astype(np.complex128), power)


def exact_distribution_spectral(model: BlockFactorModel, n: int,
                                extents: Sequence[int] | None = None,
                                tol: float = SPECTRAL_ALIAS_TOL) -> LatticeMeasure:
    """Law of ``S_n`` by inverting the transfer-matrix characteristic function.

    Same target as :func:`exact_distribution` at a cost of
    ``O(prod(N) (A^3 log n + sum log N))``, which makes long horizons cheap.
    Grids are doubled until two inversions agree to ``tol`` on the box, and the
    box is doubled until the mass deficit is below the lattice tolerance.
    """
    if n < 1:
        raise InvalidHorizon(f"n must be >= 1, got {n}")
    if extents is None:
        extents = default_extents(marginals(model).p, n)
    extents = tuple(int(e) for e in extents)
    if len(extents) != model.k:
        raise DimensionMismatch(f"{len(extents)} extents for a {model.k}-dim model")

    def invert(sizes, box):
        grid = sample_charfn(lambda t: exact_charfn(model, n, t), sizes)
        return invert_charfn(grid).values[box]

    for _ in range(MAX_GROWTH_ROUNDS):
        box = tuple(slice(0, e) for e in extents)
        sizes = tuple(next_pow2(e) for e in extents)
        coarse = invert(sizes, box)
        while True:
            if all(s >= n + 1 for s in sizes):
                values = coarse  # support fits in the grid, nothing wraps
                break
            finer = tuple(2 * s for s in sizes)
            if max(finer) > MAX_GRID:
                raise AliasingNotConverged(f"grid {finer} exceeds the cap {MAX_GRID}")
            fine = invert(finer, box)
            if np.abs(fine - coarse).max() < tol:
                values = fine
                break
            coarse, sizes = fine, finer
        measure = LatticeMeasure(values)
        if abs(1.0 - mass(measure)) < MASS_TOL:
            return measure
        grown = tuple(min(n + 1, 2 * e) for e in extents)
        if grown == extents:
            break
        extents = grown
    raise BoxOverflow(f"mass deficit {1.0 - mass(measure):.3e} persists at box {extents}")
