"""Block-factor models of 1-dependent sequences of lattice vectors.

A model generates ``X_j = e_{f(U_j, U_{j+1}, V_j)}`` where ``U_1, U_2, ...`` are
i.i.d. latent symbols drawn from ``latent_dist``, ``V_1, V_2, ...`` are i.i.d.
noise symbols drawn from ``noise_dist``, and ``e_0`` is the zero vector.
Summands whose index blocks are separated by a gap share no latent variable,
so the sequence is 1-dependent by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (
    BudgetExceeded,
    InvalidHorizon,
    NonStochasticVector,
    OutOfRangeOutput,
    ParameterOutOfRange,
)
from .lattice import LatticeMeasure

STOCHASTIC_TOL = 1e-12
ENUMERATION_BUDGET = 10**7


def _check_stochastic(name: str, vec: np.ndarray) -> None:
    if vec.ndim != 1 or vec.size == 0:
        raise NonStochasticVector(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(vec)) or np.any(vec < 0):
        raise NonStochasticVector(f"{name} has negative or non-finite entries")
    if abs(vec.sum() - 1.0) > STOCHASTIC_TOL:
        raise NonStochasticVector(f"{name} sums to {vec.sum()!r}, not 1")


@dataclass(frozen=True, eq=False)
class BlockFactorModel:
    k: int
    latent_dist: np.ndarray
    noise_dist: np.ndarray
    output_map: np.ndarray
    # construction parameters for named families (e.g. two-runs); not part of equality
    origin: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.k) < 1:
            raise ParameterOutOfRange(f"dimension k must be positive, got {self.k}")
        pi = np.array(self.latent_dist, dtype=np.float64)
        rho = np.array(self.noise_dist, dtype=np.float64)
        _check_stochastic("latent_dist", pi)
        _check_stochastic("noise_dist", rho)
        fmap = np.array(self.output_map)
        A, B = pi.size, rho.size
        if fmap.size != A * A * B:
            raise OutOfRangeOutput(f"output_map needs {A}x{A}x{B} entries, got {fmap.size}")
        if not np.all(fmap == np.round(fmap)):
            raise OutOfRangeOutput("output_map entries must be integers")
        fmap = fmap.astype(np.int64).reshape(A, A, B)
        if fmap.min() < 0 or fmap.max() > self.k:
            raise OutOfRangeOutput(f"output_map entries must lie in 0..{self.k}")
        for arr in (pi, rho, fmap):
            arr.setflags(write=False)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "latent_dist", pi)
        object.__setattr__(self, "noise_dist", rho)
        object.__setattr__(self, "output_map", fmap)

    def __eq__(self, other):
        if not isinstance(other, BlockFactorModel):
            return NotImplemented
        return (
            self.k == other.k
            and np.array_equal(self.latent_dist, other.latent_dist)
            and np.array_equal(self.noise_dist, other.noise_dist)
            and np.array_equal(self.output_map, other.output_map)
        )

    __hash__ = None

    @property
    def A(self) -> int:
        return self.latent_dist.size

    @property
    def B(self) -> int:
        return self.noise_dist.size

    def step_kernel(self) -> np.ndarray:
        """``K[r, u, u'] = sum_v rho(v) [f(u, u', v) = r]`` for r = 0..k."""
        onehot = self.output_map[None, ...] == np.arange(self.k + 1)[:, None, None, None]
        return np.einsum("ruvb,b->ruv", onehot.astype(np.float64), self.noise_dist)

    def to_dict(self) -> dict[str, Any]:
        if self.origin is not None:
            return dict(self.origin)
        return {
            "k": self.k,
            "latent_dist": self.latent_dist.tolist(),
            "noise_dist": self.noise_dist.tolist(),
            "output_map": self.output_map.ravel().tolist(),
        }


@dataclass(frozen=True)
class MarginalTable:
    k: int
    p: np.ndarray
    p2: np.ndarray
    p3: np.ndarray

    def __post_init__(self):
        k = int(self.k)
        p = np.array(self.p, dtype=np.float64).reshape(k)
        p2 = np.array(self.p2, dtype=np.float64).reshape(k, k)
        p3 = np.array(self.p3, dtype=np.float64).reshape(k, k, k)
        for arr in (p, p2, p3):
            arr.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "p2", p2)
        object.__setattr__(self, "p3", p3)

    @classmethod
    def independent(cls, p) -> "MarginalTable":
        """Table of an i.i.d. sequence: ``p_rj = p_r p_j`` and so on."""
        p = np.atleast_1d(np.asarray(p, dtype=np.float64))
        return cls(p.size, p, np.multiply.outer(p, p), np.multiply.outer(np.multiply.outer(p, p), p))

    def permuted(self, perm) -> "MarginalTable":
        perm = np.asarray(perm)
        return MarginalTable(
            self.k, self.p[perm], self.p2[np.ix_(perm, perm)], self.p3[np.ix_(perm, perm, perm)]
        )

    def violations(self, tol: float = 1e-15) -> list[str]:
        """Human-readable list of broken table invariants (empty when consistent)."""
        out = []
        for name, arr in (("p", self.p), ("p2", self.p2), ("p3", self.p3)):
            if np.any(arr < -tol) or np.any(arr > 1 + tol):
                out.append(f"{name} has entries outside [0, 1]")
        if self.p.sum() > 1 + tol:
            out.append("sum of p exceeds 1")
        if np.any(self.p2.sum(axis=1) > self.p + tol):
            out.append("row sums of p2 exceed p")
        if np.any(self.p2.sum(axis=0) > self.p + tol):
            out.append("column sums of p2 exceed p")
        if np.any(self.p3.sum(axis=2) > self.p2 + tol):
            out.append("p3 summed over its last index exceeds p2")
        return out


@dataclass(frozen=True)
class ConditionReport:
    max_p: float
    max_p_bound: float
    dependence_sums: np.ndarray
    dependence_bounds: np.ndarray
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_p": self.max_p,
            "max_p_bound": self.max_p_bound,
            "dependence_sums": self.dependence_sums.tolist(),
            "dependence_bounds": self.dependence_bounds.tolist(),
            "pass": self.passed,
        }


def build_block_factor(k, latent_dist, noise_dist, output_map, origin=None) -> BlockFactorModel:
    return BlockFactorModel(k, latent_dist, noise_dist, output_map, origin=origin)


def zero_model(k: int = 1) -> BlockFactorModel:
    return BlockFactorModel(k, [1.0], [1.0], [0])


def iid_model(p) -> BlockFactorModel:
    """Independent summands with ``P(X = e_r) = p[r-1]``; the latent chain is unused."""
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    rho = np.concatenate([[1.0 - p.sum()], p])
    return BlockFactorModel(p.size, [1.0], rho, np.arange(p.size + 1))


def two_runs_model(q: float, qbar: float, delta: float) -> BlockFactorModel:
    """Two parallel 2-runs sequences with a Bernoulli(delta) switch per step.

    The latent symbol ``u = 2*xi + xibar`` packs the two Bernoulli trials at one
    time point; the noise symbol is the switch ``eta``.
    """
    for name, v in (("q", q), ("qbar", qbar), ("delta", delta)):
        if not 0.0 < v < 1.0:
            raise ParameterOutOfRange(f"{name} must lie in (0, 1), got {v}")
    xi = np.array([0, 0, 1, 1])
    xibar = np.array([0, 1, 0, 1])
    pi = np.where(xi == 1, q, 1 - q) * np.where(xibar == 1, qbar, 1 - qbar)
    rho = np.array([1 - delta, delta])
    fmap = np.zeros((4, 4, 2), dtype=np.int64)
    both = xi[:, None] * xi[None, :]
    both_bar = xibar[:, None] * xibar[None, :]
    fmap[:, :, 1] = np.where(both == 1, 1, 0)
    fmap[:, :, 0] = np.where(both_bar == 1, 2, 0)
    origin = {"two_runs": {"q": float(q), "qbar": float(qbar), "delta": float(delta)}}
    return BlockFactorModel(2, pi, rho, fmap, origin=origin)


def model_from_dict(spec: dict[str, Any]) -> BlockFactorModel:
    if "two_runs" in spec:
        tr = spec["two_runs"]
        return two_runs_model(float(tr["q"]), float(tr["qbar"]), float(tr["delta"]))
    pi = np.asarray(spec["latent_dist"], dtype=np.float64)
    rho = np.asarray(spec["noise_dist"], dtype=np.float64)
    return build_block_factor(int(spec["k"]), pi, rho, spec["output_map"])


def load_model(path: str | Path) -> BlockFactorModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def marginals(model: BlockFactorModel) -> MarginalTable:
    """Exact one-, two- and three-step joint probabilities of the coordinate events.

    With ``M_r[u, u'] = K_r[u, u'] * pi(u')`` the chain of matrix products
    ``pi^T M_r M_j M_m 1`` is exactly the sum over latent tuples.
    """
    k, pi = model.k, model.latent_dist
    kern = model.step_kernel()[1:]
    M = kern * pi[None, None, :]
    left = np.einsum("u,ruv->rv", pi, M)
    p = left.sum(axis=1)
    left2 = np.einsum("rv,jvw->rjw", left, M)
    p2 = left2.sum(axis=2)
    p3 = np.einsum("rjw,mwx->rjm", left2, M)
    return MarginalTable(k, p, p2, p3)


def check_conditions(table: MarginalTable, k: int | None = None) -> ConditionReport:
    k = table.k if k is None else int(k)
    max_p = float(table.p.max()) if table.p.size else 0.0
    bound = 1.0 / (144.0 * k)
    sums = table.p2.sum(axis=0) + table.p2.sum(axis=1)
    caps = table.p / 5.0
    passed = bool(max_p <= bound and np.all(sums <= caps))
    return ConditionReport(max_p, bound, sums, caps, passed)


def sample_labels(model: BlockFactorModel, n: int, size: int, seed=None) -> np.ndarray:
    """Draw ``size`` paths of labels ``f(U_j, U_{j+1}, V_j)``, j = 1..n; shape ``(size, n)``."""
    if n < 1:
        raise InvalidHorizon(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    U = rng.choice(model.A, size=(size, n + 1), p=model.latent_dist)
    V = rng.choice(model.B, size=(size, n), p=model.noise_dist)
    return model.output_map[U[:, :-1], U[:, 1:], V]


def sample_sums(model: BlockFactorModel, n: int, size: int, seed=None) -> np.ndarray:
    """``size`` independent draws of ``S_n``; returns an integer array ``(size, k)``."""
    if n < 1:
        raise InvalidHorizon(f"n must be >= 1, got {n}")
    seeds = np.random.SeedSequence(seed)
    out = np.zeros((size, model.k), dtype=np.int64)
    chunk = max(1, min(size, 2_000_000 // (n + 1)))
    starts = range(0, size, chunk)
    for start, child in zip(starts, seeds.spawn(len(starts))):
        m = min(chunk, size - start)
        labels = sample_labels(model, n, m, child)
        for r in range(1, model.k + 1):
            out[start:start + m, r - 1] = np.count_nonzero(labels == r, axis=1)
    return out


def sample_sum(model: BlockFactorModel, n: int, seed=None) -> np.ndarray:
    return sample_sums(model, n, 1, seed)[0]


def enumerate_exact(model: BlockFactorModel, n: int, budget: int = ENUMERATION_BUDGET) -> LatticeMeasure:
    """Law of ``S_n`` by listing every latent and noise sequence.

    Brute force over ``A^(n+1) * B^n`` configurations; meant as an oracle for
    small horizons only.
    """
    if n < 1:
        raise InvalidHorizon(f"n must be >= 1, got {n}")
    A, B, k = model.A, model.B, model.k
    total = A ** (n + 1) * B ** n
    if total > budget:
        raise BudgetExceeded(f"{total} configurations exceed the budget of {budget}")
    digits = np.unravel_index(np.arange(total), (A,) * (n + 1) + (B,) * n)
    U, V = digits[: n + 1], digits[n + 1:]
    prob = np.ones(total)
    for u in U:
        prob *= model.latent_dist[u]
    for v in V:
        prob *= model.noise_dist[v]
    counts = np.zeros((k, total), dtype=np.int64)
    for j in range(n):
        label = model.output_map[U[j], U[j + 1], V[j]]
        for r in range(1, k + 1):
            counts[r - 1] += label == r
    shape = (n + 1,) * k
    flat = np.ravel_multi_index(tuple(counts), shape)
    # exact per-cell summation: sequential accumulation of ~1e6 weights drifts past 1e-12
    order = np.argsort(flat, kind="stable")
    cells, starts = np.unique(flat[order], return_index=True)
    values = np.zeros(int(np.prod(shape)))
    for cell, chunk in zip(cells, np.split(prob[order], starts[1:])):
        values[cell] = math.fsum(chunk.tolist())
    return LatticeMeasure(values.reshape(shape))


def random_model(rng: np.random.Generator, k: int, A: int = 4, B: int = 2,
                 max_tries: int = 10_000) -> BlockFactorModel:
    """Random block-factor model satisfying the smallness conditions.

    Latent symbol 0 is a background state carrying most of the mass; only
    transitions touching a rare symbol may emit a coordinate vector.  Draws are
    repeated until the conditions hold and every ``p_r`` is positive.
    """
    if A < 2:
        raise ParameterOutOfRange("random models need at least two latent symbols")
    for _ in range(max_tries):
        rare = rng.uniform(2e-4, 2.5e-3)
        pi = np.concatenate([[1.0 - rare], rare * rng.dirichlet(np.ones(A - 1))])
        rho = rng.dirichlet(np.ones(B))
        fmap = rng.integers(0, k + 1, size=(A, A, B))
        fmap[0, 0, :] = 0
        model = BlockFactorModel(k, pi, rho, fmap)
        table = marginals(model)
        if np.all(table.p > 0) and check_conditions(table).passed:
            return model
    raise RuntimeError("could not draw a model satisfying the conditions")
