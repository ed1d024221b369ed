"""Conditional-moment targets, weighted chi-square loss and grid search over (eta, beta, gamma).

Two statistics of a multiplicity series drive the fit, both conditioned on
minutes ``t`` with ``m[t] >= M`` whose forward window ``(t, t + tau]`` lies
inside the series:

* ``f1(M; J)``: probability that the window holds some ``m >= J``;
* ``f2(M)``: mean multiplicity over the nonzero minutes inside the windows,
  pooled across windows (a minute covered by two windows counts twice).
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ModelError
from .hawkes import HawkesParams, bin_to_multiplicity, build_kernel, simulate
from .stats import MultiplicitySeries

log = logging.getLogger(__name__)

DEFAULT_TAU = 5
DEFAULT_J = 10
DEFAULT_S = tuple(range(5, 71, 5))
F2_WEIGHT = 0.5


class Moment(NamedTuple):
    mean: float
    stderr: float
    n: int

    @property
    def empty(self) -> bool:
        return self.n == 0


EMPTY = Moment(0.0, 0.0, 0)


def _values(ms) -> np.ndarray:
    return np.asarray(ms.m if isinstance(ms, MultiplicitySeries) else ms, dtype=np.int64)


class _Sparse(NamedTuple):
    """Nonzero minutes of a multiplicity series: positions, values and series length."""

    pos: np.ndarray
    vals: np.ndarray
    length: int

    @classmethod
    def of(cls, ms) -> "_Sparse":
        m = _values(ms)
        pos = np.flatnonzero(m)
        return cls(pos, m[pos], len(m))

    def conditioning(self, M: int, tau: int) -> np.ndarray:
        if M < 1 or tau < 1:
            raise ValueError("M and tau must be >= 1")
        idx = self.pos[self.vals >= M]
        return idx[idx + tau <= self.length - 1]


def _f1(sp: _Sparse, M: int, J: int, tau: int) -> Moment:
    if J < 1:
        raise ValueError("J must be >= 1")
    cond = sp.conditioning(M, tau)
    if cond.size == 0:
        return EMPTY
    targets = sp.pos[sp.vals >= J]
    nxt = np.searchsorted(targets, cond, side="right")
    hit = nxt < targets.size
    hit[hit] = targets[nxt[hit]] <= cond[hit] + tau
    p = float(hit.mean())
    return Moment(p, math.sqrt(p * (1 - p) / cond.size), int(cond.size))


def _f2(sp: _Sparse, M: int, tau: int, c1=None, c2=None) -> Moment:
    cond = sp.conditioning(M, tau)
    lo = np.searchsorted(sp.pos, cond, side="right")
    hi = np.searchsorted(sp.pos, cond + tau, side="right")
    n = int(np.sum(hi - lo))
    if n == 0:
        return EMPTY
    if c1 is None:
        c1, c2 = _prefix_sums(sp.vals)
    s1 = int(np.sum(c1[hi] - c1[lo]))
    s2 = int(np.sum(c2[hi] - c2[lo]))
    mean = s1 / n
    if n == 1:
        return Moment(mean, 0.0, 1)
    var = max((s2 - s1 * s1 / n) / (n - 1), 0.0)
    return Moment(mean, math.sqrt(var / n), n)


def _prefix_sums(vals):
    c1 = np.concatenate(([0], np.cumsum(vals)))
    c2 = np.concatenate(([0], np.cumsum(vals * vals)))
    return c1, c2


def f1(ms, M: int, J: int, tau: int) -> Moment:
    """P(some m >= J in (t, t + tau] | m[t] >= M) with binomial standard error."""
    return _f1(_Sparse.of(ms), M, J, tau)


def f2(ms, M: int, tau: int) -> Moment:
    """Mean of nonzero m over the forward windows of conditioning minutes, with sample standard error."""
    return _f2(_Sparse.of(ms), M, tau)


@dataclass
class MomentProfile:
    tau: int
    j_threshold: int
    m_grid: tuple[int, ...]
    f1: dict[int, Moment]
    f2: dict[int, Moment]
    horizon: int | None = None

    def rows(self):
        for M in self.m_grid:
            a, b = self.f1[M], self.f2[M]
            yield M, a.mean, a.stderr, a.n, b.mean, b.stderr, b.n


def moment_profile(ms, tau: int = DEFAULT_TAU, J: int = DEFAULT_J, m_grid: Sequence[int] = DEFAULT_S) -> MomentProfile:
    return _profile(ms if isinstance(ms, _Sparse) else _Sparse.of(ms), tau, J, m_grid)


def _profile(sp: _Sparse, tau, J, m_grid) -> MomentProfile:
    grid = tuple(int(M) for M in m_grid)
    if not grid:
        raise ValueError("m_grid must be nonempty")
    c1, c2 = _prefix_sums(sp.vals)
    return MomentProfile(
        tau, J, grid, {M: _f1(sp, M, J, tau) for M in grid}, {M: _f2(sp, M, tau, c1, c2) for M in grid}, sp.length
    )


class Chi2(NamedTuple):
    chi2_1: float
    chi2_2: float
    total: float
    n_skipped: int


def _chi2_component(data: dict[int, Moment], model: dict[int, Moment], grid) -> tuple[float, int]:
    total, skipped = 0.0, 0
    for M in grid:
        d, m = data[M], model[M]
        var = d.stderr**2 + m.stderr**2
        if d.empty or m.empty or var == 0.0:
            skipped += 1
            continue
        total += (d.mean - m.mean) ** 2 / var
    return total, skipped


def chi2_loss(data: MomentProfile, model: MomentProfile, f2_weight: float = F2_WEIGHT) -> Chi2:
    """sum_M (a_d - a_m)^2 / (d_d^2 + d_m^2) per statistic; total = chi2_1 + 0.5 chi2_2.

    Grid points that are empty on either side, or have zero combined
    variance, are skipped and counted.
    """
    if data.tau != model.tau or data.j_threshold != model.j_threshold:
        raise ValueError("profiles were computed with different tau or J")
    grid = [M for M in data.m_grid if M in set(model.m_grid)]
    if not grid:
        raise ValueError("moment profiles share no conditioning multiplicities")
    c1, s1 = _chi2_component(data.f1, model.f1, grid)
    c2, s2 = _chi2_component(data.f2, model.f2, grid)
    return Chi2(c1, c2, c1 + f2_weight * c2, s1 + s2)


def _aggregate(per_path: list[dict[int, Moment]], grid) -> dict[int, Moment]:
    out = {}
    for M in grid:
        vals = np.array([p[M].mean for p in per_path if not p[M].empty])
        if vals.size == 0:
            out[M] = EMPTY
        elif vals.size == 1:
            out[M] = Moment(float(vals[0]), 0.0, 1)
        else:
            out[M] = Moment(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)), int(vals.size))
    return out


def model_moments(
    p: HawkesParams,
    tau: int = DEFAULT_TAU,
    J: int = DEFAULT_J,
    m_grid: Sequence[int] = DEFAULT_S,
    n_paths: int = 20,
    horizon: int = 96861,
    seed=0,
    binning: str = "max",
) -> MomentProfile:
    """Monte-Carlo moment profile: per-path f1/f2, averaged, with across-path standard errors."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    km = build_kernel(p)
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # explicit spawn keys: spawn() would mutate a shared SeedSequence
    children = [np.random.SeedSequence(seq.entropy, spawn_key=(*seq.spawn_key, i)) for i in range(n_paths)]
    profiles = []
    for child in children:
        es = simulate(km, p.beta, horizon, np.random.default_rng(child))
        profiles.append(_profile(_sparse_bins(es, binning, horizon), tau, J, m_grid))
    grid = tuple(int(M) for M in m_grid)
    return MomentProfile(
        tau,
        J,
        grid,
        _aggregate([q.f1 for q in profiles], grid),
        _aggregate([q.f2 for q in profiles], grid),
        horizon=horizon,
    )


def _sparse_bins(es, rule: str, length: int) -> _Sparse:
    if rule != "max":
        return _Sparse.of(bin_to_multiplicity(es, rule, length))
    bins = np.floor(es.times).astype(np.int64)
    keep = bins < length
    bins, types = bins[keep], es.types[keep]
    if bins.size == 0:
        return _Sparse(bins, types, length)
    # times are sorted, so bins are grouped; reduce each run with max
    starts = np.flatnonzero(np.r_[True, bins[1:] != bins[:-1]])
    return _Sparse(bins[starts], np.maximum.reduceat(types, starts), length)


@dataclass(frozen=True)
class GridSpec:
    """Inclusive ``(min, max, step)`` ranges per parameter."""

    eta: tuple[float, float, float] = (0.05, 0.95, 0.05)
    beta: tuple[float, float, float] = (0.05, 3.0, 0.05)
    gamma: tuple[float, float, float] = (1.0, 5.0, 0.05)

    @staticmethod
    def _axis(lo, hi, step) -> np.ndarray:
        if step <= 0 or hi < lo:
            raise ConfigError(f"bad grid range {lo}:{hi}:{step}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(count), 10)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._axis(*self.eta), self._axis(*self.beta), self._axis(*self.gamma)

    def points(self) -> list[tuple[float, float, float]]:
        """Grid points in lexicographic (eta, beta, gamma) order."""
        return [tuple(float(v) for v in pt) for pt in itertools.product(*self.axes())]

    @classmethod
    def parse(cls, text: str, step: float = 0.05) -> "GridSpec":
        """Parse ``eta=0.05:0.95,beta=0.05:3.0,gamma=1.0:5.0`` (an optional third field sets the step)."""
        ranges = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            try:
                name, bounds = part.split("=")
                fields = [float(v) for v in bounds.split(":")]
            except ValueError as exc:
                raise ConfigError(f"bad grid term {part!r}") from exc
            if name not in ("eta", "beta", "gamma") or len(fields) not in (1, 2, 3):
                raise ConfigError(f"bad grid term {part!r}")
            if len(fields) == 1:
                fields = [fields[0], fields[0]]
            ranges[name] = tuple(fields) if len(fields) == 3 else (*fields, step)
        return cls(**ranges)


REDUCED_GRID = GridSpec(eta=(0.05, 0.35, 0.05), beta=(0.3, 1.2, 0.05), gamma=(2.0, 3.5, 0.05))


@dataclass
class CalibrationResult:
    eta: float
    beta: float
    gamma: float
    loss: float
    chi2_1: float
    chi2_2: float
    n_mc_paths: int
    n_ties: int
    seed: int
    surface: list[tuple] = field(repr=False, default_factory=list)

    SURFACE_HEADER = ("eta", "beta", "gamma", "chi2_1", "chi2_2", "total", "n_skipped")

    def to_json(self) -> str:
        d = {k: getattr(self, k) for k in ("eta", "beta", "gamma", "loss", "chi2_1", "chi2_2", "n_mc_paths", "n_ties", "seed")}
        d["n_grid_points"] = len(self.surface)
        return json.dumps(d, indent=2)


def _evaluate_point(args):
    data, point, lambda_bar, n_paths, horizon, seed, binning = args
    eta, beta, gamma = point
    p = HawkesParams(len(lambda_bar), eta, beta, gamma, lambda_bar)
    try:
        model = model_moments(p, data.tau, data.j_threshold, data.m_grid, n_paths, horizon, seed, binning)
    except ModelError as exc:
        log.warning("grid point %s failed: %s", point, exc)
        return (eta, beta, gamma, math.inf, math.inf, math.inf, -1)
    c = chi2_loss(data, model)
    return (eta, beta, gamma, c.chi2_1, c.chi2_2, c.total, c.n_skipped)


def grid_search(
    data: MomentProfile,
    grid: GridSpec,
    lambda_bar,
    n_paths: int = 20,
    seed: int = 0,
    horizon: int | None = None,
    binning: str = "max",
    workers: int = 1,
) -> CalibrationResult:
    """Exhaustive search of the total loss; ties go to the lexicographically smallest point.

    Point ``k`` simulates from ``SeedSequence([seed, k])`` so results do not
    depend on scheduling.
    """
    points = grid.points()
    if not points:
        raise ConfigError("empty parameter grid")
    horizon = horizon or data.horizon
    if not horizon:
        raise ConfigError("simulation horizon unknown")
    lambda_bar = np.asarray(lambda_bar, dtype=float)
    jobs = [
        (data, pt, lambda_bar, n_paths, horizon, np.random.SeedSequence([seed, k]), binning)
        for k, pt in enumerate(points)
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            surface = list(pool.map(_evaluate_point, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        surface = [_evaluate_point(j) for j in jobs]
    totals = np.array([row[5] for row in surface])
    best = int(np.argmin(totals))  # first minimum = lexicographically smallest
    n_ties = int(np.count_nonzero(totals == totals[best]))
    if n_ties > 1:
        log.info("%d grid points tie at the minimum loss; keeping %s", n_ties, points[best])
    row = surface[best]
    return CalibrationResult(row[0], row[1], row[2], row[5], row[3], row[4], n_paths, n_ties, seed, surface)


def shuffle_benchmark(ms: MultiplicitySeries, seed) -> MultiplicitySeries:
    """Uniform random permutation of the series: same values, no temporal dependence."""
    rng = np.random.default_rng(seed)
    return MultiplicitySeries(rng.permutation(ms.m), ms.n_assets, ms.theta, ms.timescale)
