"""Error functionals, theoretical rates and the Gaussian-weight lower-bound functional.

Every rate is reported with its unspecified constant set to one, so only
ratios and slopes against measured distances are meaningful.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .approx import ApproxKind
from .errors import HypothesisViolated, InvalidHorizon, InvalidOrder, ZeroMarginal
from .lattice import LatticeMeasure, norm, parse_order
from .model import MarginalTable
from .spectral import charfn_of_measure

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class EpsilonSet:
    n: int
    np_: np.ndarray
    gamma: np.ndarray
    eps1: float
    eps2: float
    eps3: float
    eps4: float
    eps5: float
    eps6: float

    def to_dict(self) -> dict[str, Any]:
        return {f"eps{i}": getattr(self, f"eps{i}") for i in range(1, 7)}


def epsilon_set(table: MarginalTable, n: int, allow_zero: bool = False) -> EpsilonSet:
    """gamma_j = max(1, sqrt(n p_j)) and the six functionals eps1..eps6.

    eps3..eps6 divide by square roots of the marginals.  With a zero marginal
    they are undefined: ``ZeroMarginal`` is raised unless ``allow_zero`` is set,
    in which case they come back as NaN.
    """
    if n < 1:
        raise InvalidHorizon(f"n must be >= 1, got {n}")
    p, p2, p3 = table.p, table.p2, table.p3
    lam = n * p
    gamma = np.maximum(1.0, np.sqrt(lam))
    g2 = np.outer(gamma, gamma)
    g3 = np.multiply.outer(g2, gamma)
    pp = np.outer(p, p)
    ppp = np.multiply.outer(pp, p)
    p2_p = np.multiply.outer(p2, p)  # p_rj p_m
    p_p2 = np.multiply.outer(p, p2)  # p_r p_jm
    eps1 = float(np.sum((p2 + pp) / g2))
    eps2 = float(np.sum((p3 + p2_p + ppp) / g3))

    if np.any(p <= 0):
        if not allow_zero:
            raise ZeroMarginal(f"eps3..eps6 need every p_r > 0, got p = {p}")
        nan = float("nan")
        return EpsilonSet(n, lam, gamma, eps1, eps2, nan, nan, nan, nan)

    s2 = np.sqrt(pp)
    s3 = np.sqrt(ppp)
    eps3 = abs(float(np.sum((2 * p2 - 3 * pp) / s2)))
    eps4 = float(np.sum((p2 + pp) / s2))
    diag3 = np.array([p3[r, r, r] for r in range(table.k)])
    diag2 = np.diag(p2)
    eps5 = abs(
        float(np.sum((3 * p3 - 12 * p2_p + 10 * ppp) / s3))
        + 2 * float(np.sum((3 * diag3 - 12 * diag2 * p + 10 * p**3) / (p * np.sqrt(p))))
    )
    eps6 = float(np.sum((p3 + p_p2 + ppp) / s3))
    return EpsilonSet(n, lam, gamma, eps1, eps2, eps3, eps4, eps5, eps6)


def _upper_weight(order) -> float:
    alpha = parse_order(order)
    if math.isinf(alpha):
        return 1.0
    if alpha < 2:
        raise InvalidOrder(f"upper rates hold for order >= 2 or inf, got {alpha}")
    return (alpha - 1.0) / alpha


def rate_upper(kind, eps: EpsilonSet, order=math.inf) -> float:
    """``n eps1``, ``n eps2 + n^2 eps1^2`` or ``n eps2``, times ``prod gamma_j^-w``."""
    kind = ApproxKind.parse(kind)
    w = _upper_weight(order)
    scale = float(np.prod(eps.gamma ** (-w)))
    n = eps.n
    if kind is ApproxKind.POISSON:
        lead = n * eps.eps1
    elif kind is ApproxKind.POISSON_PLUS_A1:
        lead = n * eps.eps2 + n**2 * eps.eps1**2
    else:
        lead = n * eps.eps2
    return lead * scale


@dataclass(frozen=True)
class RateBracket:
    main: float
    correction: float
    b: float

    @property
    def value(self) -> float:
        """``main - correction``; may be negative when the bracket is trivial."""
        return self.main - self.correction

    def to_dict(self) -> dict[str, float]:
        return {"main": self.main, "correction": self.correction, "b": self.b}


def rate_lower(kind, eps: EpsilonSet, order=math.inf, b: float = 1.0) -> RateBracket:
    """Lower-bound bracket for the Poisson or signed compound Poisson distance."""
    kind = ApproxKind.parse(kind)
    if kind is ApproxKind.POISSON_PLUS_A1:
        raise ValueError("no lower bound is available for the corrected Poisson measure")
    if b < 1:
        raise ValueError(f"b must be >= 1, got {b}")
    if np.any(eps.np_ < 1):
        raise HypothesisViolated(f"lower bounds need every n p_j >= 1, got {eps.np_}")
    alpha = parse_order(order)
    k = eps.np_.size
    if math.isinf(alpha):
        w, const = 0.5, 1.0
    else:
        w = (alpha - 1.0) / (2.0 * alpha)
        const = 5.0 ** (-k * (alpha - 1.0) / alpha)
    scale = const * float(np.prod(eps.np_ ** (-w)))
    cut = min(b, eps.n)
    if kind is ApproxKind.POISSON:
        pre = scale / b**2
        return RateBracket(pre * eps.eps3, pre * eps.eps4 / cut, b)
    pre = scale / (b**3 * math.sqrt(eps.n))
    # eps5 leads in both the local and the l_alpha line
    return RateBracket(pre * eps.eps5, pre * eps.eps6 / cut, b)


@dataclass(frozen=True)
class LowerBoundProbe:
    a: np.ndarray
    beta: np.ndarray
    psi: tuple[str, ...]

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=np.float64))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        psi = tuple(self.psi) if not isinstance(self.psi, str) else (self.psi,) * a.size
        if not (a.size == beta.size == len(psi)):
            raise ValueError("a, beta and psi must have one entry per axis")
        if np.any(beta < 1):
            raise ValueError(f"every beta_j must be >= 1, got {beta}")
        bad = set(psi) - {"gauss", "t_gauss"}
        if bad:
            raise ValueError(f"unknown weight(s) {sorted(bad)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "psi", psi)


def _psi_hat(kind: str, y: np.ndarray) -> np.ndarray:
    g = np.exp(-0.5 * y**2)
    return g.astype(np.complex128) if kind == "gauss" else 1j * y * g


def v_functional(M: LatticeMeasure, probe: LowerBoundProbe) -> complex:
    """Closed-form lattice sum ``(2 pi)^(k/2) sum_m prod_j psi^_j((m_j - a_j)/beta_j) M{m}``."""
    if len(probe.psi) != M.k:
        raise ValueError(f"probe has {len(probe.psi)} axes, measure has k={M.k}")
    weights = [
        _psi_hat(kind, (np.arange(N) - a) / beta)
        for kind, N, a, beta in zip(probe.psi, M.extents, probe.a, probe.beta)
    ]
    total = M.values.astype(np.complex128)
    for w in reversed(weights):
        total = total @ w
    return complex(SQRT_2PI**M.k * total)


def v_functional_quadrature(M: LatticeMeasure, probe: LowerBoundProbe, nodes: int = 64) -> complex:
    """The defining integral of V evaluated by tensor Gauss-Hermite quadrature.

    Independent of :func:`v_functional`; used as a test oracle.
    """
    x, w = np.polynomial.hermite_e.hermegauss(nodes)  # weight exp(-x^2 / 2)
    k = M.k
    axes = []
    for kind in probe.psi:
        axes.append((x, w if kind == "gauss" else w * x))
    grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
    wt = axes[0][1]
    for ax in axes[1:]:
        wt = np.multiply.outer(wt, ax[1])
    t = np.stack([g / beta for g, beta in zip(grids, probe.beta)])
    phase = np.exp(-1j * np.tensordot(probe.a, t, axes=1))
    integrand = phase * charfn_of_measure(M, t)
    return complex(np.sum(wt * integrand))


def v_functional_bounds(M: LatticeMeasure, probe: LowerBoundProbe, alpha: float) -> dict[str, float]:
    """Upper bounds on ``|V|`` from the l_1, l_alpha and local norms of M."""
    k = M.k
    c = SQRT_2PI**k
    prod_beta = float(np.prod(probe.beta))
    return {
        "tv": c * norm(M, 1),
        "alpha": c * 5.0 ** (k * (alpha - 1) / alpha) * prod_beta ** ((alpha - 1) / alpha) * norm(M, alpha),
        "inf": (4 * SQRT_2PI) ** k * prod_beta * norm(M, math.inf),
    }


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class BoundReport:
    model: dict
    n: int
    norms: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    epsilons: dict = field(default_factory=dict)
    gammas: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "model": self.model,
            "n": self.n,
            "norms": self.norms,
            "rates": self.rates,
            "ratios": self.ratios,
            "epsilons": self.epsilons,
            "gammas": self.gammas,
        }
        out.update(self.extra)
        return _clean(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
