"""Finite signed measures on boxes of the nonnegative integer lattice.

A measure on Z^k is stored densely as a k-dimensional float array; the cell
with index ``(m_1, ..., m_k)`` holds ``M{m}``.  Supports always start at the
origin, so the box is ``[0, N_1) x ... x [0, N_k)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidOrder

MASS_TOL = 1e-10
DUMP_THRESHOLD = 1e-16


@dataclass(frozen=True)
class LatticeMeasure:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 0:
            raise DimensionMismatch("a lattice measure needs at least one axis")
        if not np.all(np.isfinite(values)):
            raise ValueError("measure values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return self.values.ndim

    @property
    def extents(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def signed(self) -> bool:
        return bool(np.any(self.values < 0))

    def __getitem__(self, m) -> float:
        m = tuple(m) if not isinstance(m, (int, np.integer)) else (int(m),)
        if len(m) != self.k:
            raise DimensionMismatch(f"index of length {len(m)} for a {self.k}-dim measure")
        if any(mi < 0 or mi >= n for mi, n in zip(m, self.extents)):
            return 0.0
        return float(self.values[m])

    def embed(self, extents: Sequence[int]) -> "LatticeMeasure":
        """Pad with zeros or crop to the box ``extents``."""
        extents = tuple(int(e) for e in extents)
        if len(extents) != self.k:
            raise DimensionMismatch(f"{len(extents)} extents for a {self.k}-dim measure")
        out = np.zeros(extents)
        common = tuple(slice(0, min(a, b)) for a, b in zip(extents, self.extents))
        out[common] = self.values[common]
        return LatticeMeasure(out)

    def is_probability(self, tol: float = MASS_TOL) -> bool:
        return bool(self.values.min() >= -1e-15 and abs(mass(self) - 1.0) < tol)


def point_mass(m: Sequence[int], extents: Sequence[int] | None = None) -> LatticeMeasure:
    m = tuple(int(x) for x in m)
    if extents is None:
        extents = tuple(x + 1 for x in m)
    values = np.zeros(tuple(extents))
    values[m] = 1.0
    return LatticeMeasure(values)


def zero_measure(extents: Sequence[int]) -> LatticeMeasure:
    return LatticeMeasure(np.zeros(tuple(extents)))


def mass(M: LatticeMeasure) -> float:
    # numpy's pairwise summation keeps this stable from run to run
    return float(np.sum(M.values))


def subtract(Ma: LatticeMeasure, Mb: LatticeMeasure) -> LatticeMeasure:
    """``Ma - Mb`` on the union of both boxes."""
    if Ma.k != Mb.k:
        raise DimensionMismatch(f"cannot subtract a {Mb.k}-dim measure from a {Ma.k}-dim one")
    extents = tuple(max(a, b) for a, b in zip(Ma.extents, Mb.extents))
    return LatticeMeasure(Ma.embed(extents).values - Mb.embed(extents).values)


def add(Ma: LatticeMeasure, Mb: LatticeMeasure) -> LatticeMeasure:
    if Ma.k != Mb.k:
        raise DimensionMismatch(f"cannot add a {Mb.k}-dim measure to a {Ma.k}-dim one")
    extents = tuple(max(a, b) for a, b in zip(Ma.extents, Mb.extents))
    return LatticeMeasure(Ma.embed(extents).values + Mb.embed(extents).values)


def parse_order(order) -> float:
    """Accept ``inf``/``"inf"``/``"tv"``/``"l2"`` style labels or a number >= 1."""
    if isinstance(order, str):
        label = order.strip().lower()
        if label in ("inf", "infinity", "local", "linf"):
            return math.inf
        if label == "tv":
            return 1.0
        if label.startswith("l"):
            label = label[1:]
        try:
            order = float(label)
        except ValueError:
            raise InvalidOrder(f"unrecognised norm order {order!r}") from None
    order = float(order)
    if math.isnan(order) or order < 1:
        raise InvalidOrder(f"norm order must be >= 1 or inf, got {order}")
    return order


def order_label(order) -> str:
    order = parse_order(order)
    if math.isinf(order):
        return "inf"
    if order == 1:
        return "tv"
    if order == int(order):
        return f"l{int(order)}"
    return f"l{order:g}"


def norm(M: LatticeMeasure, order=math.inf) -> float:
    """Local norm (``order=inf``) or the l_alpha norm ``(sum |M{m}|^alpha)^(1/alpha)``."""
    alpha = parse_order(order)
    a = np.abs(M.values)
    top = float(a.max()) if a.size else 0.0
    if math.isinf(alpha):
        return top
    if top == 0.0:
        return 0.0
    if alpha == 1.0:
        return float(np.sum(a))
    # scale by the maximum so large alpha cannot underflow every term
    return top * float(np.sum((a / top) ** alpha)) ** (1.0 / alpha)


def default_extents(p: Sequence[float], n: int) -> tuple[int, ...]:
    """Initial box for the law of S_n; axes are doubled later if mass leaks."""
    out = []
    for pj in p:
        lam = n * float(pj)
        guess = math.ceil(lam + 12.0 * max(1.0, math.sqrt(lam)) + 20.0)
        out.append(int(min(n + 1, guess)))
    return tuple(out)


def dump_csv(M: LatticeMeasure, path: str | Path) -> None:
    header = [f"m{j + 1}" for j in range(M.k)] + ["value"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for idx in zip(*np.nonzero(np.abs(M.values) > DUMP_THRESHOLD)):
            writer.writerow([int(i) for i in idx] + [f"{M.values[idx]:.17g}"])


def load_csv(path: str | Path, extents: Sequence[int] | None = None) -> LatticeMeasure:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        k = len(header) - 1
        rows = [(tuple(int(x) for x in row[:k]), float(row[k])) for row in reader if row]
    if extents is None:
        extents = tuple(max((r[0][j] for r in rows), default=0) + 1 for j in range(k))
    values = np.zeros(tuple(extents))
    for idx, v in rows:
        values[idx] = v
    return LatticeMeasure(values)
