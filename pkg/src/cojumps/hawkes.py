"""N-dimensional exponential-kernel Hawkes process for the multiplicity vector.

Component ``i`` (1-based) counts cojumps of multiplicity ``i``. The kernel
matrix is ``Gamma = D @ Sigma`` with ``Sigma_ij = (|i - j| + 1)^-gamma`` and
``D`` chosen so that the mean intensity ``lambda_bar`` is the Perron
eigenvector of ``Gamma`` with eigenvalue ``1 - eta``; the baseline is
``mu = eta * lambda_bar``. All kernels decay at one rate ``beta``, so an
event of type ``j`` raises every ``lambda^i`` by ``alpha_ij = beta * Gamma_ij``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import ConfigError, ModelError, NonStationaryError, RunawayError
from .stats import MultiplicitySeries

RUNAWAY_FACTOR = 50.0


@dataclass(frozen=True)
class HawkesParams:
    n: int
    eta: float
    beta: float
    gamma: float
    lambda_bar: np.ndarray  # events / minute, length n

    def __post_init__(self):
        lb = np.asarray(self.lambda_bar, dtype=float)
        object.__setattr__(self, "lambda_bar", lb)
        if lb.shape != (self.n,):
            raise ConfigError(f"lambda_bar must have length n={self.n}")
        if not 0 < self.eta < 1:
            raise ConfigError("eta must lie in (0, 1)")
        if not self.beta > 0 or not self.gamma > 0:
            raise ConfigError("beta and gamma must be positive")
        if np.any(~(lb > 0)):
            raise ConfigError("lambda_bar must be strictly positive")

    @classmethod
    def from_frequencies(cls, counts, length: int, eta: float, beta: float, gamma: float) -> "HawkesParams":
        """Anchor ``lambda_bar`` to observed per-multiplicity counts over ``length`` minutes.

        ``counts[i-1]`` is the number of minutes with multiplicity ``i``; empty
        multiplicities get ``0.5 / length`` so the vector stays strictly positive.
        """
        counts = np.asarray(counts, dtype=float)
        lb = np.maximum(counts, 0.5) / length
        return cls(len(lb), eta, beta, gamma, lb)

    @classmethod
    def from_series(cls, ms: MultiplicitySeries, eta: float, beta: float, gamma: float) -> "HawkesParams":
        counts = np.bincount(ms.m, minlength=ms.n_assets + 1)[1:]
        return cls.from_frequencies(counts, len(ms), eta, beta, gamma)

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n, "eta": self.eta, "beta": self.beta, "gamma": self.gamma, "lambda_bar": self.lambda_bar.tolist()},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "HawkesParams":
        try:
            d = json.loads(text)
            return cls(int(d["n"]), float(d["eta"]), float(d["beta"]), float(d["gamma"]), np.asarray(d["lambda_bar"], float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model file: {exc}") from exc

    @classmethod
    def load(cls, path) -> "HawkesParams":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class KernelMatrix:
    gamma_matrix: np.ndarray
    mu: np.ndarray
    d_diag: np.ndarray | None = None
    sigma_matrix: np.ndarray | None = None
    beta: float | None = None

    def __post_init__(self):
        self.gamma_matrix = np.atleast_2d(np.asarray(self.gamma_matrix, dtype=float))
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        n = self.mu.size
        if self.gamma_matrix.shape != (n, n):
            raise ConfigError("kernel matrix and baseline sizes differ")
        if np.any(self.gamma_matrix < 0) or np.any(self.mu < 0):
            raise ConfigError("kernel and baseline must be non-negative")

    @property
    def n(self) -> int:
        return self.mu.size

    def alpha(self, beta: float) -> np.ndarray:
        return beta * self.gamma_matrix


def sigma_entry(i: int, j: int, gamma: float) -> float:
    return (abs(i - j) + 1.0) ** -gamma


def sigma_matrix(n: int, gamma: float) -> np.ndarray:
    idx = np.arange(n)
    return (np.abs(idx[:, None] - idx[None, :]) + 1.0) ** -gamma


def build_kernel(p: HawkesParams, rtol: float = 1e-10) -> KernelMatrix:
    sig = sigma_matrix(p.n, p.gamma)
    d = (1.0 - p.eta) * p.lambda_bar / (sig @ p.lambda_bar)
    gamma_matrix = d[:, None] * sig
    lhs = gamma_matrix @ p.lambda_bar
    rhs = (1.0 - p.eta) * p.lambda_bar
    err = np.max(np.abs(lhs - rhs) / rhs)
    if not err < rtol:
        raise ModelError(f"eigenvector identity violated (relative error {err:.3g})")
    return KernelMatrix(gamma_matrix, p.eta * p.lambda_bar, d, sig, p.beta)


@dataclass
class Spectrum:
    eigenvalues: np.ndarray  # descending
    diagonally_dominant: bool

    @property
    def radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


def spectrum(km: KernelMatrix) -> Spectrum:
    """Eigenvalues of Gamma, sorted descending.

    When Gamma = D Sigma with D > 0 diagonal and Sigma symmetric, Gamma is
    similar to sqrt(D) Sigma sqrt(D), so a symmetric solver gives real values.
    """
    g = km.gamma_matrix
    if km.d_diag is not None and km.sigma_matrix is not None:
        root = np.sqrt(km.d_diag)
        eig = np.linalg.eigvalsh(root[:, None] * km.sigma_matrix * root[None, :])
    else:
        eig = np.linalg.eigvals(g)
        if np.max(np.abs(eig.imag), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(eig))):
            raise ModelError("kernel matrix has complex eigenvalues")
        eig = eig.real
    diag = np.abs(np.diag(g))
    off = np.abs(g).sum(axis=1) - diag
    return Spectrum(np.sort(eig)[::-1], bool(np.all(diag > off)))


def expected_intensity(km: KernelMatrix) -> np.ndarray:
    """Stationary mean intensity ``(I - Gamma)^-1 mu``."""
    radius = spectrum(km).radius
    if not radius < 1:
        raise NonStationaryError(f"spectral radius {radius:.6g} >= 1, process is not stationary")
    return np.linalg.solve(np.eye(km.n) - km.gamma_matrix, km.mu)


@dataclass
class EventStream:
    times: np.ndarray  # minutes, nondecreasing
    types: np.ndarray  # multiplicity index 1..N
    horizon: float
    n_types: int

    def __len__(self):
        return len(self.times)

    def counts(self) -> np.ndarray:
        return np.bincount(self.types, minlength=self.n_types + 1)[1:]


@numba.njit(cache=True)
def _ogata(mu, alpha_t, beta, horizon, x0, rng, max_events):
    """Thinning with the current total intensity as the bound.

    Between events every excitation decays by the same factor, so a rejected
    candidate costs O(1); only accepted events touch the N-vector.
    Returns (times, types, ok).
    """
    n = mu.size
    mu_total = mu.sum()
    mu_cum = np.cumsum(mu)
    col_sum = alpha_t.sum(axis=1)
    x = x0.copy()
    x_total = x.sum()
    t_ref = 0.0
    t = 0.0
    cap = 1024
    times = np.empty(cap)
    types = np.empty(cap, dtype=np.int64)
    count = 0
    bound = mu_total + x_total
    while bound > 0.0:
        t += rng.standard_exponential() / bound
        if t >= horizon:
            break
        decay = math.exp(-beta * (t - t_ref))
        lam = mu_total + x_total * decay
        if rng.random() * bound > lam:
            bound = lam
            continue
        x_total = 0.0
        for i in range(n):
            x[i] *= decay
            x_total += x[i]
        t_ref = t
        lam = mu_total + x_total
        u = rng.random() * lam
        if u < mu_total:
            j = min(np.searchsorted(mu_cum, u, side="right"), n - 1)
        else:
            u -= mu_total
            j = n - 1
            acc = 0.0
            for i in range(n):
                acc += x[i]
                if u < acc:
                    j = i
                    break
        if count >= max_events:
            return times[:count], types[:count], False
        if count == cap:
            cap *= 2
            grown_t = np.empty(cap)
            grown_t[:count] = times
            grown_k = np.empty(cap, dtype=np.int64)
            grown_k[:count] = types
            times, types = grown_t, grown_k
        times[count] = t
        types[count] = j + 1
        count += 1
        row = alpha_t[j]
        for i in range(n):
            x[i] += row[i]
        x_total += col_sum[j]
        bound = mu_total + x_total
    return times[:count], types[:count], True


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ConfigError("simulation needs an explicit seed")
    return np.random.default_rng(seed)


def simulate(
    km: KernelMatrix,
    beta: float | None,
    horizon: float,
    seed,
    max_factor: float = RUNAWAY_FACTOR,
    initial_type: int | None = None,
) -> EventStream:
    """Exact simulation on ``[0, horizon)`` minutes by Ogata thinning.

    ``initial_type`` seeds the history with one event of that type at t=0
    (not part of the returned stream), which together with ``mu = 0``
    simulates a single cluster.
    """
    beta = km.beta if beta is None else beta
    if beta is None or not beta > 0:
        raise ConfigError("beta must be positive")
    if not horizon > 0:
        raise ConfigError("horizon must be positive")
    lam = expected_intensity(km)
    expected = lam.sum() * horizon
    max_events = max(int(max_factor * expected), 1000)
    alpha_t = np.ascontiguousarray(km.alpha(beta).T)
    x0 = np.zeros(km.n) if initial_type is None else alpha_t[initial_type - 1].copy()
    times, types, ok = _ogata(km.mu, alpha_t, float(beta), float(horizon), x0, _rng(seed), max_events)
    if not ok:
        raise RunawayError(
            f"more than {max_events} events (over {max_factor:g}x the stationary expectation); "
            "parameters are too close to criticality"
        )
    return EventStream(times, types, float(horizon), km.n)


def intensity_recursive(km: KernelMatrix, beta: float, es: EventStream, at) -> np.ndarray:
    """Intensity vectors just before each time in ``at`` (sorted), via the exponential recursion."""
    alpha = km.alpha(beta)
    out = np.empty((len(at), km.n))
    excess = np.zeros(km.n)
    t_ref = 0.0
    k = 0
    for row, t in enumerate(at):
        while k < len(es) and es.times[k] < t:
            excess = excess * math.exp(-beta * (es.times[k] - t_ref)) + alpha[:, es.types[k] - 1]
            t_ref = es.times[k]
            k += 1
        out[row] = km.mu + excess * math.exp(-beta * (t - t_ref))
    return out


def cluster_offspring(km: KernelMatrix, parent_type: int, seed, n_clusters: int = 1) -> np.ndarray:
    """Direct offspring counts of one type-``parent_type`` event, drawn from the branching structure.

    Each type ``i`` receives Poisson(Gamma_ij) children. Returns an
    ``(n_clusters, N)`` count array.
    """
    rng = _rng(seed)
    rates = km.gamma_matrix[:, parent_type - 1]
    return rng.poisson(rates, size=(n_clusters, km.n))


BIN_RULES = ("max", "sum", "first")


def bin_to_multiplicity(es: EventStream, rule: str = "max", length: int | None = None) -> MultiplicitySeries:
    """Collapse a stream onto one-minute bins.

    ``max`` keeps the largest type in a bin; ``sum`` adds types (capped at N);
    ``first`` keeps the earliest event's type.
    """
    length = math.ceil(es.horizon) if length is None else length
    m = np.zeros(length, dtype=np.int64)
    bins = np.floor(es.times).astype(np.int64)
    inside = bins < length
    bins, types = bins[inside], es.types[inside]
    if rule == "max":
        np.maximum.at(m, bins, types)
    elif rule == "sum":
        np.add.at(m, bins, types)
        np.minimum(m, es.n_types, out=m)
    elif rule == "first":
        # times are sorted, so the first occurrence of each bin is the earliest event
        uniq, first = np.unique(bins, return_index=True)
        m[uniq] = types[first]
    else:
        raise ConfigError(f"unknown binning rule {rule!r}; choose from {BIN_RULES}")
    return MultiplicitySeries(m, es.n_types)
