from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cojumps.errors import DataError
from cojumps.jumps import JumpMatrix, VolatilityConfig, detect
from cojumps.marketdata import Grid, ReturnPanel
from cojumps.stats import (
    CojumpEvent,
    MultiplicitySeries,
    cojump_calendar,
    cojump_events,
    hill_estimator,
    jump_frequency,
    multiplicity_ccdf,
    multiplicity_series,
    systemic_fraction,
    timescale_robustness,
)
from cojumps.synth import discrete_pareto


def jm_of(flags, spd=None):
    flags = np.asarray(flags, dtype=bool)
    grid = Grid.synthetic(1, slots_per_day=spd or flags.shape[1])
    return JumpMatrix(flags, 4.0, 1, [f"A{i}" for i in range(flags.shape[0])], grid)


def ms_of(m, n=None):
    m = np.asarray(m)
    return MultiplicitySeries(m, n if n is not None else max(int(m.max(initial=0)), 1))


# ---- multiplicity_series ----


def test_all_false():
    assert multiplicity_series(jm_of(np.zeros((4, 10)))).m.tolist() == [0] * 10


def test_single_cojump():
    flags = np.zeros((3, 5), dtype=bool)
    flags[:2, 3] = True
    ms = multiplicity_series(jm_of(flags))
    assert ms.m.tolist() == [0, 0, 0, 2, 0]
    assert ms.n_assets == 3


@settings(max_examples=50, deadline=None)
@given(flags=arrays(np.bool_, st.tuples(st.integers(1, 8), st.integers(1, 40))))
def test_recount_oracle(flags):
    ms = multiplicity_series(jm_of(flags))
    recount = [sum(1 for i in range(flags.shape[0]) if flags[i, t]) for t in range(flags.shape[1])]
    assert ms.m.tolist() == recount
    assert ms.m.sum() == flags.sum()
    assert all(0 <= v <= flags.shape[0] for v in ms.m)


def test_series_bounds_checked():
    with pytest.raises(DataError):
        MultiplicitySeries(np.array([0, 4]), 3)


# ---- jump_frequency ----


def test_jump_frequency_examples():
    assert jump_frequency(jm_of(np.zeros((2, 4)))) == 0.0
    assert jump_frequency(jm_of(np.ones((2, 4)))) == 1.0
    flags = np.zeros((2, 4), dtype=bool)
    flags[:, 1] = True
    flags[0, 3] = True  # m = [0, 2, 0, 1]
    assert jump_frequency(jm_of(flags)) == 0.5


# ---- systemic_fraction ----


def test_systemic_examples():
    ms = ms_of([0, 5, 30, 60], 60)
    assert systemic_fraction(ms, 1).value == 1.0
    r = systemic_fraction(ms, 30)
    assert r.value == pytest.approx(2 / 3)
    assert (r.numerator, r.denominator) == (2, 3)
    assert systemic_fraction(ms, 61).value == 0.0


def test_systemic_empty_flag():
    r = systemic_fraction(ms_of([0, 0, 0], 5), 2)
    assert r.value == 0.0 and r.empty
    assert not systemic_fraction(ms_of([1], 5), 2).empty


def test_systemic_rejects_zero_threshold():
    with pytest.raises(ValueError):
        systemic_fraction(ms_of([1]), 0)


@settings(max_examples=50, deadline=None)
@given(m=arrays(np.int64, st.integers(1, 60), elements=st.integers(0, 20)))
def test_systemic_nonincreasing(m):
    ms = ms_of(m, 20)
    vals = [systemic_fraction(ms, k).value for k in range(1, 22)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


# ---- multiplicity_ccdf ----


def test_ccdf_all_ones():
    cc = multiplicity_ccdf(ms_of([0, 1, 1, 0, 1], 5))
    assert cc.as_dict()[1] == 1.0
    assert cc.as_dict()[2] == 0.0


def test_ccdf_hand_enumeration():
    cc = multiplicity_ccdf(ms_of([1, 1, 2, 4], 4))
    assert cc.as_dict() == {1: 1.0, 2: 0.5, 3: 0.25, 4: 0.25}
    assert cc.n_cojumps == 4


def test_ccdf_needs_cojumps():
    with pytest.raises(DataError, match="no cojumps"):
        multiplicity_ccdf(ms_of([0, 0], 3))


@settings(max_examples=50, deadline=None)
@given(m=arrays(np.int64, st.integers(1, 80), elements=st.integers(0, 15)).filter(lambda a: a.max() > 0))
def test_ccdf_properties(m):
    cc = multiplicity_ccdf(ms_of(m, 15))
    assert cc.ccdf[0] == 1.0
    assert np.all(np.diff(cc.ccdf) <= 0)
    scaled = cc.ccdf * cc.n_cojumps
    np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-9)


def test_hill_on_discrete_pareto():
    m = discrete_pareto(100_000, 1.5, np.random.default_rng(11))
    alpha, se, k = hill_estimator(m)
    assert k == 10_000
    assert alpha == pytest.approx(1.5, abs=0.1)
    assert se == pytest.approx(alpha / 100)


def test_hill_on_continuous_pareto():
    y = (1 - np.random.default_rng(3).random(200_000)) ** (-1 / 1.5)
    alpha, se, _ = hill_estimator(y)
    assert abs(alpha - 1.5) < 4 * se


def test_hill_degenerate_inputs():
    assert np.isnan(hill_estimator([3.0])[0])
    assert hill_estimator([2.0] * 50)[0] == float("inf")


def test_discrete_pareto_support():
    m = discrete_pareto(50_000, 1.5, np.random.default_rng(0))
    assert m.min() >= 2
    # P(M >= m) = (m - 1)^-alpha
    for v in (3, 5, 10):
        assert np.mean(m >= v) == pytest.approx((v - 1) ** -1.5, rel=0.08)


# ---- timescale_robustness ----


def quiet_panel(n_assets, n_days, seed, s=1.0):
    """Rademacher background: every score stays far below 4 at all timescales."""
    r = s * np.random.default_rng(seed).choice([-1.0, 1.0], size=(n_assets, n_days * 390))
    r[:, ::390] = 0.0
    return r


def test_background_has_no_jumps():
    rp = ReturnPanel.from_array(quiet_panel(10, 3, 0), 390)
    for k in range(1, 6):
        assert not detect(rp, VolatilityConfig(timescale=k)).flags.any()


def test_k1_row_is_direct():
    r = quiet_panel(40, 3, 1)
    r[:25, 390 + 120] += 30.0
    r[:3, 2 * 390 + 200] += 30.0
    rp = ReturnPanel.from_array(r, 390)
    cfg = VolatilityConfig()
    rows = timescale_robustness(rp, cfg, 20)
    assert rows[0] == (1, systemic_fraction(multiplicity_series(detect(rp, cfg)), 20))
    assert rows[0][1].value == 0.5


def test_single_minute_cojumps_invariant():
    r = quiet_panel(40, 4, 2)
    for day, slot, m in [(1, 120, 30), (2, 180, 5), (3, 240, 35)]:
        r[:m, day * 390 + slot] += 30.0
    rows = timescale_robustness(ReturnPanel.from_array(r, 390), VolatilityConfig(), 30)
    assert {row[1] for row in rows} == {rows[0][1]}
    assert rows[0][1].value == pytest.approx(2 / 3)


def test_spread_cojump_nondecreasing():
    r = quiet_panel(40, 3, 3)
    t = 390 + 120
    r[:15, t] += 30.0
    r[15:30, t + 1] += 30.0  # straddles two minutes, shares one bin for k >= 2
    r[:10, 2 * 390 + 300] += 30.0
    rows = timescale_robustness(ReturnPanel.from_array(r, 390), VolatilityConfig(), 30)
    fracs = [row[1].value for row in rows]
    assert fracs[0] == 0.0
    assert all(a <= b for a, b in zip(fracs, fracs[1:]))
    assert fracs[1:] == [0.5] * 4


# ---- events and calendar ----


def test_events_carry_assets():
    flags = np.zeros((3, 20), dtype=bool)
    flags[[0, 2], 15] = True
    ev = cojump_events(jm_of(flags))
    assert len(ev) == 1
    assert ev[0].multiplicity == 2
    assert ev[0].asset_ids == frozenset({"A0", "A2"})


def test_event_validation():
    with pytest.raises(ValueError):
        CojumpEvent(datetime(2013, 1, 2, 10), 0)
    with pytest.raises(ValueError):
        CojumpEvent(datetime(2013, 1, 2, 10), 2, frozenset({"A"}))


@pytest.mark.parametrize("n", [0, 1, 3])
def test_calendar_pass_through(n):
    events = [CojumpEvent(datetime(2013, 1, 2 + i, 10, 5 * i), i + 1) for i in range(n)]
    rows = cojump_calendar(events)
    assert len(rows) == n
    for i, (day, tod, m) in enumerate(rows):
        assert day == f"2013-01-0{2 + i}"
        assert tod == f"10:{5 * i:02d}"
        assert m == i + 1
