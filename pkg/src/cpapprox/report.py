"""Orchestration: model -> exact law -> approximants -> distances -> rates."""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .approx import ApproxKind, approximant
from .bounds import BoundReport, epsilon_set, rate_lower, rate_upper
from .errors import HypothesisViolated, InvalidHorizon
from .exact import transfer
from .lattice import LatticeMeasure, norm, order_label, parse_order, subtract
from .model import BlockFactorModel, check_conditions, marginals, model_from_dict, sample_sums

DEFAULT_APPROX = ("poisson", "a1", "g")
DEFAULT_NORMS = ("inf", "2", "1")


@dataclass
class RunConfig:
    model: dict
    n: list[int]
    approx: list[str] = field(default_factory=lambda: list(DEFAULT_APPROX))
    norms: list[str] = field(default_factory=lambda: list(DEFAULT_NORMS))
    b: float = 1.0
    grid: list[int] | None = None  # lattice box extents, one per axis
    mc_samples: int = 0
    seed: int = 0
    out: str | None = None
    format: str = "json"
    require_conditions: bool = False

    def __post_init__(self):
        if not self.n:
            raise InvalidHorizon("at least one n is required")
        for n in self.n:
            if n < 1:
                raise InvalidHorizon(f"n must be >= 1, got {n}")
        self.approx = [ApproxKind.parse(a).value for a in self.approx]
        self.norms = [order_label(o) for o in self.norms]
        if self.b < 1:
            raise ValueError(f"b must be >= 1, got {self.b}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.format!r}")

    def resolved(self) -> dict:
        out = asdict(self)
        out.pop("out")
        return out


def _order(label: str):
    return parse_order(label)


def prop1_ratio(model: BlockFactorModel, n: int, dist_inf: float) -> float | None:
    """``n q qbar sqrt(delta(1-delta)) ||F_n - Pois||_inf / (q delta + qbar (1-delta))``."""
    origin = model.origin or {}
    if "two_runs" not in origin:
        return None
    q, qbar, d = (origin["two_runs"][key] for key in ("q", "qbar", "delta"))
    return n * q * qbar * math.sqrt(d * (1 - d)) * dist_inf / (q * d + qbar * (1 - d))


def _mc_deviation(model: BlockFactorModel, n: int, F: LatticeMeasure, samples: int, seed: int) -> float:
    sums = sample_sums(model, n, samples, seed)
    ext = tuple(max(e, int(s) + 1) for e, s in zip(F.extents, sums.max(axis=0)))
    counts = np.zeros(ext)
    np.add.at(counts, tuple(sums.T), 1.0)
    return float(np.abs(counts / samples - F.embed(ext).values).max())


def build_report(model: BlockFactorModel, n: int, config: RunConfig) -> BoundReport:
    table = marginals(model)
    conditions = check_conditions(table)
    res = transfer(model, n, config.grid)
    F = res.measure
    kinds = [ApproxKind.parse(a) for a in config.approx]

    norms: dict = {label: {} for label in config.norms}
    for kind in kinds:
        D = subtract(F, approximant(kind, table, n, F.extents))
        for label in config.norms:
            norms[label][kind.value] = norm(D, _order(label))

    eps = epsilon_set(table, n, allow_zero=True)
    upper: dict = {label: {} for label in config.norms}
    ratios: dict = {label: {} for label in config.norms}
    for label in config.norms:
        alpha = _order(label)
        for kind in kinds:
            if not (math.isinf(alpha) or alpha >= 2):
                upper[label][kind.value] = None
                ratios[label][kind.value] = None
                continue
            r = rate_upper(kind, eps, alpha)
            upper[label][kind.value] = r
            ratios[label][kind.value] = norms[label][kind.value] / r if r > 0 else float("nan")

    lower: dict = {label: {} for label in config.norms}
    for label in config.norms:
        for kind in kinds:
            if kind is ApproxKind.POISSON_PLUS_A1:
                continue
            try:
                lower[label][kind.value] = rate_lower(kind, eps, _order(label), config.b).to_dict()
            except HypothesisViolated:
                lower[label][kind.value] = None

    extra = {
        "version": __version__,
        "config": config.resolved(),
        "conditions": conditions.to_dict(),
        "extents": list(F.extents),
        "escaped_mass": res.escaped.tolist(),
        "np": eps.np_.tolist(),
    }
    if "inf" in norms and "poisson" in norms["inf"]:
        extra["R_prop1"] = prop1_ratio(model, n, norms["inf"]["poisson"])
    if config.mc_samples > 0:
        extra["mc_max_deviation"] = _mc_deviation(model, n, F, config.mc_samples, config.seed)

    return BoundReport(
        model=model.to_dict(),
        n=n,
        norms=norms,
        rates={"upper": upper, "lower": lower},
        ratios=ratios,
        epsilons=eps.to_dict(),
        gammas=eps.gamma,
        extra=extra,
    )


def _workers() -> int:
    cap = os.environ.get("CPAPPROX_THREADS")
    if cap:
        return max(1, int(cap))
    return os.cpu_count() or 1


def run_reports(config: RunConfig) -> list[BoundReport]:
    """One report per n, computed in parallel and returned in input order."""
    model = model_from_dict(config.model)
    with ThreadPoolExecutor(max_workers=min(_workers(), len(config.n))) as pool:
        return list(pool.map(lambda n: build_report(model, n, config), config.n))


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if math.isnan(x) else f"{x:.17g}"


def sweep_columns(config: RunConfig, k: int) -> list[str]:
    cols = ["n"] + [f"np{j + 1}" for j in range(k)]
    cols += [f"norm_{label}_{a}" for label in config.norms for a in config.approx]
    cols += [f"rate_{label}_{a}" for label in config.norms for a in config.approx]
    cols += [f"ratio_{label}_{a}" for label in config.norms for a in config.approx]
    cols.append("R_prop1")
    if config.mc_samples > 0:
        cols.append("mc_max_deviation")
    return cols


def _row(report: dict, config: RunConfig) -> dict:
    row = {"n": report["n"], "R_prop1": report.get("R_prop1")}
    for j, v in enumerate(report["np"]):
        row[f"np{j + 1}"] = v
    for label in config.norms:
        for a in config.approx:
            row[f"norm_{label}_{a}"] = report["norms"][label][a]
            row[f"rate_{label}_{a}"] = report["rates"]["upper"][label][a]
            row[f"ratio_{label}_{a}"] = report["ratios"][label][a]
    if config.mc_samples > 0:
        row["mc_max_deviation"] = report["mc_max_deviation"]
    return row


def fit_loglog(n: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """OLS slope of log y on log n and the RMS residual; NaN when any y <= 0."""
    n = np.asarray(n, dtype=np.float64)
    y = np.asarray([np.nan if v is None else v for v in y], dtype=np.float64)
    if len(n) < 2 or not np.all(np.isfinite(y)) or np.any(y <= 0):
        return float("nan"), float("nan")
    x, ly = np.log(n), np.log(y)
    slope, icpt = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + icpt)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def sweep_table(reports: list[BoundReport], config: RunConfig) -> tuple[list[str], list[dict], dict]:
    dicts = [r.to_dict() for r in reports]
    k = len(dicts[0]["np"])
    cols = sweep_columns(config, k)
    rows = [_row(d, config) for d in dicts]
    ns = [row["n"] for row in rows]
    fits = {}
    for col in cols:
        if col.startswith("norm_"):
            fits[col] = fit_loglog(ns, [row[col] for row in rows])
    return cols, rows, fits


def sweep_csv(reports: list[BoundReport], config: RunConfig) -> str:
    cols, rows, fits = sweep_table(reports, config)
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for row in rows:
        buf.write(",".join(str(row[c]) if c == "n" else _fmt(row.get(c)) for c in cols) + "\n")
    for name, idx in (("slope", 0), ("residual", 1)):
        cells = [name] + [_fmt(fits[c][idx]) if c in fits else "" for c in cols[1:]]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def reports_csv(reports: list[BoundReport], config: RunConfig) -> str:
    cols, rows, _ = sweep_table(reports, config)
    lines = [",".join(cols)]
    lines += [",".join(str(row[c]) if c == "n" else _fmt(row.get(c)) for c in cols) for row in rows]
    return "\n".join(lines) + "\n"


def read_sweep_csv(text: str) -> tuple[list[dict], dict, dict]:
    """Parse a sweep CSV into data rows plus the slope and residual footers."""
    lines = text.splitlines()
    cols = lines[0].split(",")
    parsed = []
    for line in lines[1:]:
        cells = line.split(",")
        parsed.append({c: (cells[i] if i < len(cells) else "") for i, c in enumerate(cols)})

    def num(v):
        return float(v) if v != "" else float("nan")

    rows, footers = [], {}
    for p in parsed:
        if p["n"] in ("slope", "residual"):
            footers[p["n"]] = {c: num(v) for c, v in p.items() if c != "n"}
        else:
            rows.append({c: (int(v) if c == "n" else num(v)) for c, v in p.items()})
    return rows, footers.get("slope", {}), footers.get("residual", {})

