"""Scheduled macro announcements matched against cojump events.

A news at minute ``s`` is credited to an event at minute ``t`` when
``0 <= t - s <= tau``: same-minute releases count, since announcements land
inside the one-minute bar.
"""
from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from datetime import datetime, time
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .csvio import read_rows
from .errors import ParseError
from .stats import CojumpEvent, Ratio

log = logging.getLogger(__name__)

DEFAULT_TAUS = (1, 5, 10, 15)


class Importance(str, Enum):
    MMI = "MMI"  # Market Moving Indicator
    MEA = "MEA"  # Merit Extra Attention


@dataclass(frozen=True, order=True)
class NewsRecord:
    timestamp: datetime
    category: str = ""
    importance: Importance = Importance.MMI


@dataclass
class NewsMatchResult:
    tau: int
    by_multiplicity: dict[int, Ratio]

    def rows(self):
        for m_min, r in sorted(self.by_multiplicity.items()):
            yield self.tau, m_min, r.denominator, r.numerator, r.value


def load_news(path, session_start: time = time(9, 30), session_end: time = time(16, 0)) -> list[NewsRecord]:
    """Parse ``timestamp,category,importance`` rows; out-of-session records are dropped."""
    news = []
    for lineno, row in read_rows(path, ["timestamp", "category", "importance"], allow_empty=True):
        try:
            ts = datetime.fromisoformat(row["timestamp"]).replace(tzinfo=None, second=0, microsecond=0)
        except ValueError as exc:
            raise ParseError(f"bad timestamp {row['timestamp']!r}", lineno) from exc
        try:
            imp = Importance(row["importance"].upper())
        except ValueError as exc:
            raise ParseError(f"importance must be MMI or MEA, got {row['importance']!r}", lineno) from exc
        if not session_start <= ts.time() < session_end:
            log.warning("line %d: news at %s outside the trading session, dropped", lineno, ts)
            continue
        news.append(NewsRecord(ts, row["category"], imp))
    news.sort(key=lambda n: n.timestamp)
    return news


def _minutes(ts: datetime) -> int:
    return int(ts.timestamp() // 60) if ts.tzinfo else int((ts - datetime(1970, 1, 1)).total_seconds() // 60)


class _NewsIndex:
    def __init__(self, news: Iterable[NewsRecord], importance: Iterable[Importance] | None = None):
        keep = None if importance is None else {Importance(i) for i in importance}
        self.minutes = sorted(_minutes(n.timestamp) for n in news if keep is None or n.importance in keep)

    def matched(self, t: int, tau: int) -> bool:
        # latest news at or before t
        i = bisect.bisect_right(self.minutes, t)
        return i > 0 and t - self.minutes[i - 1] <= tau


def news_triggered_fraction(
    events: Sequence[CojumpEvent],
    news: Sequence[NewsRecord],
    tau: int,
    m_min: int,
    importance: Iterable[Importance] | None = None,
) -> Ratio:
    """Share of events with multiplicity >= ``m_min`` that have a news in ``[t - tau, t]``."""
    if tau < 1:
        raise ValueError("tau must be >= 1 minute")
    index = _NewsIndex(news, importance)
    selected = [_minutes(e.timestamp) for e in events if e.multiplicity >= m_min]
    hits = sum(index.matched(t, tau) for t in selected)
    return Ratio.of(hits, len(selected))


def news_fraction_profile(
    events: Sequence[CojumpEvent],
    news: Sequence[NewsRecord],
    taus: Sequence[int] = DEFAULT_TAUS,
    m_grid: Sequence[int] = (1, 10, 30, 60),
    importance: Iterable[Importance] | None = None,
) -> list[NewsMatchResult]:
    index = _NewsIndex(news, importance)
    times = np.array([_minutes(e.timestamp) for e in events], dtype=np.int64)
    mult = np.array([e.multiplicity for e in events], dtype=np.int64)
    out = []
    for tau in taus:
        if tau < 1:
            raise ValueError("tau must be >= 1 minute")
        hit = np.array([index.matched(t, tau) for t in times], dtype=bool)
        out.append(
            NewsMatchResult(
                tau, {m: Ratio.of(np.count_nonzero(hit & (mult >= m)), np.count_nonzero(mult >= m)) for m in m_grid}
            )
        )
    return out
