"""Multiplicity series and the descriptive cojump statistics."""
from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .jumps import JumpMatrix, VolatilityConfig, detect
from .marketdata import Grid, ReturnPanel


class Ratio(NamedTuple):
    """A fraction that stays defined on an empty denominator (value 0, ``empty`` set)."""

    value: float
    numerator: int
    denominator: int

    @property
    def empty(self) -> bool:
        return self.denominator == 0

    @classmethod
    def of(cls, num: int, den: int) -> "Ratio":
        return cls(num / den if den else 0.0, int(num), int(den))


@dataclass
class MultiplicitySeries:
    m: np.ndarray
    n_assets: int
    theta: float | None = None
    timescale: int = 1
    grid: Grid | None = None

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.int64)
        if self.m.size and (self.m.min() < 0 or self.m.max() > self.n_assets):
            raise DataError(f"multiplicities must lie in [0, {self.n_assets}]")

    def __len__(self):
        return len(self.m)


@dataclass(frozen=True)
class CojumpEvent:
    timestamp: datetime
    multiplicity: int
    asset_ids: frozenset | None = None

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValueError("cojump multiplicity must be >= 1")
        if self.asset_ids is not None and len(self.asset_ids) != self.multiplicity:
            raise ValueError("multiplicity does not match the asset set")


@dataclass
class MultiplicityCCDF:
    support: np.ndarray
    ccdf: np.ndarray
    n_cojumps: int
    tail_exponent: float
    tail_stderr: float
    tail_k: int

    def as_dict(self) -> dict[int, float]:
        return {int(m): float(p) for m, p in zip(self.support, self.ccdf)}


def multiplicity_series(jm: JumpMatrix) -> MultiplicitySeries:
    return MultiplicitySeries(jm.flags.sum(axis=0), jm.n_assets, jm.theta, jm.timescale, jm.grid)


def cojump_events(jm: JumpMatrix) -> list[CojumpEvent]:
    """One event per bin with at least one flag, carrying the jumping assets."""
    events = []
    for t in np.flatnonzero(jm.flags.any(axis=0)):
        ids = frozenset(jm.asset_ids[i] for i in np.flatnonzero(jm.flags[:, t]))
        events.append(CojumpEvent(jm.grid.timestamp(t), len(ids), ids))
    return events


def jump_frequency(jm: JumpMatrix) -> float:
    """Fraction of bins with at least one jump."""
    if jm.flags.shape[1] == 0:
        return 0.0
    return float(jm.flags.any(axis=0).mean())


def systemic_fraction(ms: MultiplicitySeries, m_min: int) -> Ratio:
    """Share of cojump bins (m >= 1) whose multiplicity is at least ``m_min``."""
    if m_min < 1:
        raise ValueError("m_min must be >= 1")
    m = ms.m
    return Ratio.of(np.count_nonzero(m >= m_min), np.count_nonzero(m >= 1))


def hill_estimator(values, tail_fraction: float = 0.1) -> tuple[float, float, int]:
    """Hill tail index on the top ``tail_fraction`` order statistics.

    Returns ``(alpha, alpha / sqrt(k), k)``; the threshold is the (k+1)-th largest value.
    """
    x = np.sort(np.asarray(values, dtype=float))[::-1]
    k = int(tail_fraction * len(x))
    if k < 1 or len(x) < 2:
        return float("nan"), float("nan"), 0
    k = min(k, len(x) - 1)
    logs = np.log(x[:k]) - np.log(x[k])
    mean = logs.mean()
    if mean <= 0:
        return float("inf"), float("inf"), k
    alpha = 1.0 / mean
    return float(alpha), float(alpha / np.sqrt(k)), k


def multiplicity_ccdf(ms: MultiplicitySeries, tail_fraction: float = 0.1) -> MultiplicityCCDF:
    """Empirical P(M >= m) among cojump bins, m = 1..N, plus a Hill tail exponent."""
    cj = ms.m[ms.m >= 1]
    if cj.size == 0:
        raise DataError("no cojumps in series")
    counts = np.bincount(cj, minlength=ms.n_assets + 1)[1:]
    tail_counts = np.cumsum(counts[::-1])[::-1]
    alpha, se, k = hill_estimator(cj, tail_fraction)
    return MultiplicityCCDF(
        support=np.arange(1, ms.n_assets + 1),
        ccdf=tail_counts / cj.size,
        n_cojumps=int(cj.size),
        tail_exponent=alpha,
        tail_stderr=se,
        tail_k=k,
    )


def timescale_robustness(rp: ReturnPanel, cfg: VolatilityConfig, m_min: int, scales: Sequence[int] = (1, 2, 3, 4, 5)):
    """Systemic fraction re-measured after aggregating returns to each timescale.

    Returns a list of ``(k, Ratio)`` rows.
    """
    rows = []
    for k in scales:
        jm = detect(rp, replace(cfg, timescale=k))
        rows.append((k, systemic_fraction(multiplicity_series(jm), m_min)))
    return rows


def cojump_calendar(events: Sequence[CojumpEvent]) -> list[tuple[str, str, int]]:
    """``(day, time-of-day, multiplicity)`` rows for plotting."""
    return [(e.timestamp.date().isoformat(), e.timestamp.strftime("%H:%M"), e.multiplicity) for e in events]
