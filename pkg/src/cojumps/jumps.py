"""Spot volatility from an EWMA bipower variation, and threshold jump flags."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import ConfigError, InsufficientDataError
from .marketdata import Grid, ReturnPanel

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class VolatilityConfig:
    theta: float = 4.0
    ewma_halflife: float = 60.0  # minutes
    sigma_floor: float = 1e-8
    warmup_minutes: int = 120
    timescale: int = 1
    open_exclusion_minutes: int = 10

    def __post_init__(self):
        if not self.theta > 0:
            raise ConfigError("theta must be positive")
        if not self.ewma_halflife > 0:
            raise ConfigError("ewma_halflife must be positive")
        if not self.sigma_floor > 0:
            raise ConfigError("sigma_floor must be positive")
        if self.warmup_minutes < 0 or self.open_exclusion_minutes < 0:
            raise ConfigError("warmup and open exclusion must be non-negative")
        if not 1 <= self.timescale <= 5:
            raise ConfigError("timescale must be between 1 and 5 minutes")

    def warmup_bins(self, minutes_per_slot: int) -> int:
        return math.ceil(self.warmup_minutes / minutes_per_slot)

    def ewma_weight(self, minutes_per_slot: int) -> float:
        halflife = self.ewma_halflife / minutes_per_slot
        return 1.0 - 2.0 ** (-1.0 / halflife)


@dataclass
class VolatilitySeries:
    sigma: np.ndarray  # (N, T)
    warmup: int


@dataclass
class JumpMatrix:
    flags: np.ndarray  # (N, T) bool
    theta: float
    timescale: int
    asset_ids: list[str] | None = None
    grid: Grid | None = None
    returns: np.ndarray | None = None
    sigma: np.ndarray | None = None

    @property
    def n_assets(self) -> int:
        return self.flags.shape[0]

    def flagged_rows(self):
        """``(asset_id, timestamp, return, sigma, score)`` for every flagged cell, time-ordered."""
        assets, times = np.nonzero(self.flags.T)[::-1]
        for i, t in zip(assets, times):
            r = float(self.returns[i, t])
            s = float(self.sigma[i, t])
            ts = self.grid.timestamp(t).isoformat(timespec="minutes")
            yield self.asset_ids[i], ts, repr(r), repr(s), repr(abs(r) / s)


@numba.njit(cache=True)
def _ewma_bipower(abs_r, valid, w, warmup):
    n, T = abs_r.shape
    var = np.zeros((n, T))
    for i in range(n):
        acc = 0.0
        count = 0
        v = 0.0
        for t in range(2, T):
            b = HALF_PI * abs_r[i, t - 1] * abs_r[i, t - 2]
            ok = valid[t - 1] and valid[t - 2]
            if t <= warmup:
                if ok:
                    acc += b
                    count += 1
                if count > 0:
                    v = acc / count
            elif ok:
                v = (1.0 - w) * v + w * b
            var[i, t] = v
    return var


def _bipower_valid(grid: Grid) -> np.ndarray:
    # 1-minute day opens hold a zero by convention; keep them out of the products
    valid = np.ones(grid.size, dtype=np.bool_)
    if grid.minutes_per_slot == 1:
        valid[:: grid.slots_per_day] = False
    return valid


def ewma_bipower_volatility(rp: ReturnPanel, cfg: VolatilityConfig) -> VolatilitySeries:
    """Per-asset spot volatility with no look-ahead.

    sigma_t^2 = (1 - w) sigma_{t-1}^2 + w (pi/2) |r_{t-1}| |r_{t-2}|, w = 1 - 2^(-1/halflife),
    seeded by the expanding mean of the bipower products over the warmup window.
    """
    k = rp.grid.minutes_per_slot
    warmup = cfg.warmup_bins(k)
    T = rp.returns.shape[1]
    if T <= warmup:
        raise InsufficientDataError(f"series of {T} bins does not exceed the {warmup}-bin warmup")
    var = _ewma_bipower(np.abs(rp.returns), _bipower_valid(rp.grid), cfg.ewma_weight(k), warmup)
    return VolatilitySeries(np.maximum(np.sqrt(var), cfg.sigma_floor), warmup)


def detect_jumps(rp: ReturnPanel, vs: VolatilitySeries, cfg: VolatilityConfig) -> JumpMatrix:
    """Flag ``|r| / sigma > theta`` outside the warmup and the day-open exclusion."""
    if vs.sigma.shape != rp.returns.shape:
        raise ValueError("return and volatility shapes differ")
    grid = rp.grid
    flags = np.abs(rp.returns) > cfg.theta * vs.sigma
    flags[:, : vs.warmup] = False
    n_open = math.ceil(cfg.open_exclusion_minutes / grid.minutes_per_slot)
    if n_open:
        slot = np.arange(grid.size) % grid.slots_per_day
        flags[:, slot < n_open] = False
    return JumpMatrix(flags, cfg.theta, grid.minutes_per_slot, list(rp.asset_ids), grid, rp.returns, vs.sigma)


def aggregate_timescale(rp: ReturnPanel, k: int) -> ReturnPanel:
    """Sum returns over non-overlapping k-slot bins within each day; trailing partial bins are dropped."""
    if k < 1:
        raise ValueError("aggregation factor must be >= 1")
    if k == 1:
        return rp
    grid = rp.grid
    nbins = grid.slots_per_day // k
    cube = rp.returns.reshape(rp.n_assets, grid.n_days, grid.slots_per_day)
    summed = cube[:, :, : nbins * k].reshape(rp.n_assets, grid.n_days, nbins, k).sum(axis=3)
    new_grid = replace(grid, slots_per_day=nbins, minutes_per_slot=grid.minutes_per_slot * k)
    pattern = rp.pattern
    if pattern is not None:
        pattern = pattern[..., : nbins * k].reshape(*pattern.shape[:-1], nbins, k).mean(axis=-1)
    return replace(rp, grid=new_grid, returns=summed.reshape(rp.n_assets, -1), pattern=pattern)


def detect(rp: ReturnPanel, cfg: VolatilityConfig) -> JumpMatrix:
    """Aggregate to ``cfg.timescale``, estimate volatility and flag jumps."""
    agg = aggregate_timescale(rp, cfg.timescale)
    return detect_jumps(agg, ewma_bipower_volatility(agg, cfg), cfg)
