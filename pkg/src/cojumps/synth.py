"""Seeded synthetic inputs: minute price panels with planted cojumps, news calendars,
and power-law multiplicity frequencies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .csvio import write_csv
from .marketdata import Grid
from .news import Importance, NewsRecord


def power_law_lambda_bar(n: int, alpha: float = 1.5, total_rate: float = 0.1) -> np.ndarray:
    """Per-multiplicity rates whose CCDF over 1..n follows m^-alpha (renormalized on the finite support)."""
    m = np.arange(1, n + 1, dtype=float)
    pmf = m**-alpha - (m + 1) ** -alpha
    return total_rate * pmf / pmf.sum()


def discrete_pareto(size: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Integers ``ceil(Y)`` with Y Pareto(1, alpha): support 2, 3, ..., P(M >= m) = (m - 1)^-alpha."""
    y = (1.0 - rng.random(size)) ** (-1.0 / alpha)
    return np.ceil(y).astype(np.int64)


def u_shape(slots: int, amplitude: float) -> np.ndarray:
    """Quadratic intraday volatility profile with mean one; ``amplitude=0`` is flat."""
    x = np.linspace(-1.0, 1.0, slots)
    prof = 1.0 + amplitude * x**2
    return prof / prof.mean()


@dataclass
class PlantedCojump:
    t: int  # flat minute index
    multiplicity: int
    assets: tuple[int, ...] = ()


@dataclass
class SyntheticPanel:
    grid: Grid
    asset_ids: list[str]
    log_returns: np.ndarray  # (N, T); day-open entries hold the overnight move
    sd: np.ndarray  # (N, T) true per-minute standard deviation
    prices: np.ndarray
    planted: list[PlantedCojump] = field(default_factory=list)

    def write_prices(self, path, comment=None):
        ts = [self.grid.timestamp(t).isoformat(timespec="minutes") for t in range(self.grid.size)]
        rows = ((a, ts[t], repr(float(self.prices[i, t]))) for t in range(self.grid.size) for i, a in enumerate(self.asset_ids))
        write_csv(path, ("asset_id", "timestamp", "close"), rows, comment)


def synthetic_panel(
    n_assets: int,
    n_days: int,
    seed,
    sigma: float = 1e-3,
    amplitude: float = 0.0,
    plants: list[tuple[int, int]] = (),
    plant_size: float = 8.0,
) -> SyntheticPanel:
    """Gaussian minute returns with an intraday U-shape and planted cojumps.

    ``plants`` holds ``(minute index, multiplicity)`` pairs; each picks that
    many assets at random and adds a return of ``plant_size`` local standard
    deviations with a random sign.
    """
    rng = np.random.default_rng(seed)
    grid = Grid.synthetic(n_days)
    prof = np.tile(u_shape(grid.slots_per_day, amplitude), n_days)
    sd = np.broadcast_to(sigma * prof, (n_assets, grid.size)).copy()
    r = rng.standard_normal((n_assets, grid.size)) * sd
    planted = []
    for t, mult in plants:
        if not 0 <= t < grid.size or not 1 <= mult <= n_assets:
            raise ValueError(f"planted cojump ({t}, {mult}) outside the panel")
        assets = tuple(sorted(int(a) for a in rng.choice(n_assets, size=mult, replace=False)))
        signs = rng.choice([-1.0, 1.0], size=mult)
        r[list(assets), t] += signs * plant_size * sd[list(assets), t]
        planted.append(PlantedCojump(t, mult, assets))
    prices = 100.0 * np.exp(np.cumsum(r, axis=1))
    ids = [f"S{i:03d}" for i in range(n_assets)]
    return SyntheticPanel(grid, ids, r, sd, prices, planted)


def synthetic_news(grid: Grid, minutes, category: str = "Synthetic", importance=Importance.MMI) -> list[NewsRecord]:
    return [NewsRecord(grid.timestamp(t), category, importance) for t in minutes]


def random_news(grid: Grid, per_day: float, seed) -> list[NewsRecord]:
    rng = np.random.default_rng(seed)
    count = rng.poisson(per_day * grid.n_days)
    minutes = np.sort(rng.choice(grid.size, size=min(count, grid.size), replace=False))
    imps = rng.choice([Importance.MMI, Importance.MEA], size=len(minutes))
    return [NewsRecord(grid.timestamp(t), "Synthetic", Importance(i)) for t, i in zip(minutes, imps)]


def write_news(path, news, comment=None):
    rows = ((n.timestamp.isoformat(timespec="minutes"), n.category, n.importance.value) for n in news)
    write_csv(path, ("timestamp", "category", "importance"), rows, comment)


def minute_offset(grid: Grid, day: int, slot: int) -> int:
    return day * grid.slots_per_day + slot

