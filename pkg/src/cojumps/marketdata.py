"""Minute-bar ingestion, log returns and intraday-pattern filtering.

Panels live on a dense grid of trading days x intraday slots. Slot ``s`` of a
day is the bar labelled ``session_start + s * minutes_per_slot``. The return
at the first slot of every day is zero by convention, so no overnight move
ever enters the series.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta

import numpy as np

from .csvio import read_rows
from .errors import DataError, GridError, InsufficientDataError, ParseError

log = logging.getLogger(__name__)

SLOTS_PER_DAY = 390
PATTERN_FLOOR = 0.05


@dataclass(frozen=True)
class Grid:
    days: tuple[date, ...]
    slots_per_day: int = SLOTS_PER_DAY
    minutes_per_slot: int = 1
    session_start: time = time(9, 30)

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def size(self) -> int:
        return self.n_days * self.slots_per_day

    def day_index(self, t: int) -> tuple[int, int]:
        """Map a flat position onto ``(day, slot)``."""
        return divmod(int(t), self.slots_per_day)

    def timestamp(self, t: int) -> datetime:
        d, s = self.day_index(t)
        start = datetime.combine(self.days[d], self.session_start)
        return start + timedelta(minutes=s * self.minutes_per_slot)

    def day_open_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        mask[:: self.slots_per_day] = True
        return mask

    @classmethod
    def synthetic(cls, n_days: int, start: date = date(2013, 1, 2), **kwargs) -> "Grid":
        """Weekday calendar of ``n_days`` sessions starting at ``start``."""
        days = []
        d = start
        while len(days) < n_days:
            if d.weekday() < 5:
                days.append(d)
            d += timedelta(days=1)
        return cls(days=tuple(days), **kwargs)


@dataclass(frozen=True)
class PanelFormat:
    """Column names, session bounds and the missing-data policy for CSV input."""

    asset_col: str = "asset_id"
    time_col: str = "timestamp"
    price_col: str = "close"
    session_start: time = time(9, 30)
    session_end: time = time(16, 0)
    max_missing_frac: float = 0.10
    exclude_days: frozenset = field(default_factory=frozenset)

    @property
    def slots_per_day(self) -> int:
        minutes = (
            datetime.combine(date.min, self.session_end) - datetime.combine(date.min, self.session_start)
        ).seconds // 60
        return minutes


@dataclass
class PricePanel:
    asset_ids: list[str]
    grid: Grid
    prices: np.ndarray  # (N, T)

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        if self.prices.shape != (len(self.asset_ids), self.grid.size):
            raise DataError(f"price array shape {self.prices.shape} does not match grid")
        if np.any(~(self.prices > 0)):
            raise DataError("non-positive price")

    @property
    def n_assets(self) -> int:
        return len(self.asset_ids)


@dataclass
class ReturnPanel:
    asset_ids: list[str]
    grid: Grid
    returns: np.ndarray  # (N, T)
    normalized: bool = False
    pattern: np.ndarray | None = None

    def __post_init__(self):
        self.returns = np.atleast_2d(np.asarray(self.returns, dtype=float))
        if self.normalized and (self.pattern is None or np.any(self.pattern <= 0)):
            raise DataError("normalized panel needs a strictly positive pattern")

    @property
    def n_assets(self) -> int:
        return self.returns.shape[0]

    @classmethod
    def from_array(cls, returns, slots_per_day: int | None = None, normalized: bool = True) -> "ReturnPanel":
        """Wrap a bare array. With no ``slots_per_day`` it is one long day."""
        returns = np.atleast_2d(np.asarray(returns, dtype=float))
        n, T = returns.shape
        spd = T if slots_per_day is None else slots_per_day
        if T % spd:
            raise GridError("series length is not a whole number of days")
        grid = Grid.synthetic(T // spd, slots_per_day=spd)
        pattern = np.ones(spd) if normalized else None
        return cls([f"A{i}" for i in range(n)], grid, returns, normalized, pattern)


def _parse_timestamp(text: str, lineno: int) -> datetime:
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ParseError(f"bad timestamp {text!r}", lineno) from exc
    if ts.second or ts.microsecond:
        raise GridError(f"line {lineno}: timestamp {text!r} is not on the minute grid")
    return ts.replace(tzinfo=None)


def load_price_panel(path, fmt: PanelFormat | None = None) -> PricePanel:
    """Read ``asset_id,timestamp,close`` rows into a dense minute panel.

    Gaps are forward-filled within the day (leading gaps take the day's first
    close). Assets missing more than ``max_missing_frac`` of the grid, or an
    entire day, are dropped with a warning.
    """
    fmt = fmt or PanelFormat()
    spd = fmt.slots_per_day
    if spd <= 0:
        raise GridError("session_end must be after session_start")
    rows = read_rows(path, [fmt.asset_col, fmt.time_col, fmt.price_col])

    records = []
    assets: dict[str, int] = {}
    days: set[date] = set()
    for lineno, row in rows:
        asset = row[fmt.asset_col]
        if not asset:
            raise ParseError("empty asset id", lineno)
        try:
            price = float(row[fmt.price_col])
        except ValueError as exc:
            raise ParseError(f"bad price {row[fmt.price_col]!r}", lineno) from exc
        if not price > 0:
            raise ParseError("non-positive price", lineno)
        ts = _parse_timestamp(row[fmt.time_col], lineno)
        day = ts.date()
        if day in fmt.exclude_days:
            continue
        offset = (ts - datetime.combine(day, fmt.session_start)).total_seconds() // 60
        if not 0 <= offset < spd:
            log.debug("line %d: %s outside session, skipped", lineno, ts)
            continue
        assets.setdefault(asset, len(assets))
        days.add(day)
        records.append((assets[asset], day, int(offset), price))

    if not records:
        raise DataError("empty panel")

    grid = Grid(days=tuple(sorted(days)), slots_per_day=spd, session_start=fmt.session_start)
    day_pos = {d: i for i, d in enumerate(grid.days)}
    cube = np.full((len(assets), grid.n_days, spd), np.nan)
    for a, day, slot, price in records:
        cube[a, day_pos[day], slot] = price

    missing = np.isnan(cube)
    frac = missing.reshape(len(assets), -1).mean(axis=1)
    whole_day_gap = missing.all(axis=2).any(axis=1)
    keep = (frac <= fmt.max_missing_frac) & ~whole_day_gap
    ids = list(assets)
    for i in np.flatnonzero(~keep):
        log.warning("asset %s rejected: %.1f%% of minutes missing", ids[i], 100 * frac[i])
    if not keep.any():
        raise DataError("empty panel: every asset rejected by the missing-data policy")

    cube = _fill_within_day(cube[keep])
    prices = cube.reshape(int(keep.sum()), -1)
    return PricePanel([a for a, k in zip(ids, keep) if k], grid, prices)


def _fill_within_day(cube: np.ndarray) -> np.ndarray:
    """Forward fill along the slot axis, then back fill leading gaps."""
    n, d, s = cube.shape
    idx = np.where(np.isnan(cube), 0, np.arange(s))
    np.maximum.accumulate(idx, axis=2, out=idx)
    filled = np.take_along_axis(cube, idx, axis=2)
    first = np.argmax(~np.isnan(cube), axis=2)
    lead = np.take_along_axis(cube, first[..., None], axis=2)
    return np.where(np.isnan(filled), lead, filled)


def compute_log_returns(panel: PricePanel) -> ReturnPanel:
    logp = np.log(panel.prices)
    r = np.zeros_like(logp)
    r[:, 1:] = np.diff(logp, axis=1)
    r[:, panel.grid.day_open_mask()] = 0.0
    return ReturnPanel(list(panel.asset_ids), panel.grid, r)


def _structural_slots(grid: Grid) -> np.ndarray:
    """Slots whose return is zero by construction (the 1-minute day open)."""
    mask = np.zeros(grid.slots_per_day, dtype=bool)
    if grid.minutes_per_slot == 1:
        mask[0] = True
    return mask


def estimate_intraday_pattern(rp: ReturnPanel, pooled: bool = True, floor: float = PATTERN_FLOOR) -> np.ndarray:
    """Average absolute return per slot, each day rescaled by its own volatility.

    The day scale is the mean absolute return over that day's informative
    slots. Days with zero scale are ignored. Factors are floored and then
    rescaled to mean one; the structural open slot gets factor one.

    Returns shape ``(slots,)`` when pooled, else ``(N, slots)``.
    """
    if rp.normalized:
        raise DataError("returns are already normalized")
    grid = rp.grid
    if grid.n_days < 2:
        raise InsufficientDataError("intraday pattern needs at least 2 days")
    skip = _structural_slots(grid)
    a = np.abs(rp.returns).reshape(rp.n_assets, grid.n_days, grid.slots_per_day)
    scale = a[:, :, ~skip].mean(axis=2, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(scale > 0, a / scale, np.nan)
    axes = (0, 1) if pooled else 1
    with np.errstate(invalid="ignore"):
        counts = np.sum(~np.isnan(ratio), axis=axes)
        factors = np.nansum(ratio, axis=axes) / np.maximum(counts, 1)
    factors = np.maximum(factors, floor)
    informative = factors[..., ~skip]
    factors = factors / informative.mean(axis=-1, keepdims=True)
    factors[..., skip] = 1.0
    return factors


def normalize_returns(rp: ReturnPanel, pattern) -> ReturnPanel:
    if rp.normalized:
        raise DataError("returns are already normalized")
    pattern = np.asarray(pattern, dtype=float)
    if np.any(~(pattern > 0)):
        raise DataError("intraday pattern factors must be strictly positive")
    spd = rp.grid.slots_per_day
    if pattern.shape[-1] != spd:
        raise DataError(f"pattern has {pattern.shape[-1]} slots, grid has {spd}")
    tiled = np.tile(pattern, rp.grid.n_days) if pattern.ndim == 1 else np.tile(pattern, (1, rp.grid.n_days))
    return replace(rp, returns=rp.returns / tiled, normalized=True, pattern=pattern)
