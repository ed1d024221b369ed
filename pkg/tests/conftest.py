from datetime import date, datetime, time, timedelta

import numpy as np
import pytest


def minute_rows(asset, day, prices, start=time(9, 30)):
    """``(asset, timestamp, price)`` rows for consecutive minutes from the open."""
    t0 = datetime.combine(day, start)
    return [(asset, (t0 + timedelta(minutes=i)).isoformat(timespec="minutes"), p) for i, p in enumerate(prices)]


def write_prices(path, rows, header="asset_id,timestamp,close"):
    lines = [header] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20130102)


DAY1 = date(2013, 1, 2)
DAY2 = date(2013, 1, 3)


# one line per acceptance criterion, printed after the run whatever the capture mode
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
