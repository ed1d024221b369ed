"""Command-line pipeline: synth | detect | stats | simulate | calibrate.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines (keys
are the long option names with underscores); explicit flags win over the
file. Exit codes: 0 ok, 2 configuration error, 3 data error, 4 model error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import date, time
from pathlib import Path

import numpy as np

from . import calibrate as cal
from . import hawkes, jumps, marketdata, news, stats, synth
from .csvio import atomic_write_text, config_hash, read_rows, write_csv
from .errors import CojumpError, ConfigError, DataError

log = logging.getLogger("cojumps")


# ---- argument types ----


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _clock(text):
    try:
        return time.fromisoformat(str(text).strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a time of day: {text!r}") from exc


def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from exc


def _int_range(text):
    """``5:70:5`` (inclusive) or a comma list."""
    text = str(text)
    if ":" not in text:
        return _int_list(text)
    try:
        parts = [int(v) for v in text.split(":")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from exc
    lo, hi, step = (parts + [1])[:3] if len(parts) == 2 else parts
    return list(range(lo, hi + 1, step))


def _plants(text):
    out = []
    for item in filter(None, (p.strip() for p in str(text).split(","))):
        try:
            t, m = item.split(":")
            out.append((int(t), int(m)))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"plant must be MINUTE:MULTIPLICITY, got {item!r}") from exc
    return out


def read_config(path) -> dict[str, str]:
    cfg = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


# ---- shared pieces ----


def _require(path, what):
    if path is None:
        raise ConfigError(f"{what} is required")
    if not Path(path).exists():
        raise ConfigError(f"{what} {path} does not exist")
    return Path(path)


def _seed(args):
    if args.seed is None:
        raise ConfigError("--seed is mandatory for stochastic commands")
    return args.seed


def _provenance(args) -> str:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    return f"config_sha256={config_hash(cfg)} command={args.command}"


def _vol_config(args) -> jumps.VolatilityConfig:
    return jumps.VolatilityConfig(
        theta=args.theta,
        ewma_halflife=args.halflife,
        sigma_floor=args.sigma_floor,
        warmup_minutes=args.warmup,
        timescale=args.timescale,
        open_exclusion_minutes=args.open_exclusion,
    )


def _read_holidays(path) -> frozenset:
    if path is None:
        return frozenset()
    days = set()
    for lineno, line in enumerate(_require(path, "--holidays").read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            try:
                days.add(date.fromisoformat(line))
            except ValueError as exc:
                raise DataError(f"holidays line {lineno}: bad date {line!r}") from exc
    return frozenset(days)


def _normalized_returns(args) -> marketdata.ReturnPanel:
    fmt = marketdata.PanelFormat(
        session_start=args.session_start,
        session_end=args.session_end,
        max_missing_frac=args.max_missing_frac,
        exclude_days=_read_holidays(args.holidays),
    )
    panel = marketdata.load_price_panel(_require(args.prices, "--prices"), fmt)
    rp = marketdata.compute_log_returns(panel)
    pattern = marketdata.estimate_intraday_pattern(rp, pooled=args.pattern_pooled)
    return marketdata.normalize_returns(rp, pattern)


def _write_multiplicity(path, ms: stats.MultiplicitySeries, comment):
    if ms.grid is not None:
        rows = ((t, ms.grid.timestamp(t).isoformat(timespec="minutes"), int(v)) for t, v in enumerate(ms.m))
        write_csv(path, ("t", "timestamp", "multiplicity"), rows, comment)
    else:
        write_csv(path, ("t", "multiplicity"), enumerate(ms.m.tolist()), comment)


def _read_multiplicity(path, n_assets=None):
    rows = read_rows(_require(path, "multiplicity file"), ["multiplicity"])
    try:
        m = np.array([int(r["multiplicity"]) for _, r in rows], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: non-integer multiplicity") from exc
    stamps = [r.get("timestamp") for _, r in rows]
    if m.size and m.min() < 0:
        raise DataError(f"{path}: negative multiplicity")
    n = n_assets if n_assets is not None else int(m.max(initial=1))
    return stats.MultiplicitySeries(m, n), stamps


# ---- commands ----


def cmd_synth(args):
    seed = _seed(args)
    horizon = args.days * marketdata.Grid.synthetic(1).slots_per_day
    bad = [t for t in (args.news_minutes or []) + [t for t, _ in args.plant or []] if not 0 <= t < horizon]
    if bad:
        raise ConfigError(f"minute indices {bad} outside the {horizon}-minute panel")
    if any(not 1 <= m <= args.n_assets for _, m in args.plant or []):
        raise ConfigError("planted multiplicity must lie in 1..n_assets")
    panel = synth.synthetic_panel(
        args.n_assets, args.days, seed, args.sigma, args.u_shape, args.plant or [], args.plant_size
    )
    out = Path(args.out_dir)
    note = _provenance(args)
    panel.write_prices(out / "prices.csv", note)
    minutes = list(args.news_minutes or [])
    items = synth.synthetic_news(panel.grid, minutes)
    if args.news_per_day:
        items += synth.random_news(panel.grid, args.news_per_day, np.random.SeedSequence([seed, 1]))
    synth.write_news(out / "news.csv", sorted(items), note)
    rows = (
        (p.t, panel.grid.timestamp(p.t).isoformat(timespec="minutes"), p.multiplicity, " ".join(panel.asset_ids[a] for a in p.assets))
        for p in panel.planted
    )
    write_csv(out / "planted.csv", ("t", "timestamp", "multiplicity", "assets"), rows, note)
    print(f"wrote {panel.grid.size} minutes x {args.n_assets} assets to {out}")


def cmd_detect(args):
    cfg = _vol_config(args)
    rp = _normalized_returns(args)
    jm = jumps.detect(rp, cfg)
    ms = stats.multiplicity_series(jm)
    out = Path(args.out_dir)
    note = _provenance(args)
    write_csv(out / "jumps.csv", ("asset_id", "timestamp", "return", "sigma", "score"), jm.flagged_rows(), note)
    _write_multiplicity(out / "multiplicity.csv", ms, note)
    print(f"{int(jm.flags.sum())} jumps in {int(np.count_nonzero(ms.m))} of {len(ms)} bins (theta={cfg.theta:g}, k={cfg.timescale})")
    return jm, ms, rp


def cmd_stats(args):
    out = Path(args.out_dir)
    note = _provenance(args)
    rp = None
    if args.prices is not None:
        cfg = _vol_config(args)
        rp = _normalized_returns(args)
        jm = jumps.detect(rp, cfg)
        ms = stats.multiplicity_series(jm)
        events = stats.cojump_events(jm)
    elif args.multiplicity is not None:
        ms, stamps = _read_multiplicity(args.multiplicity, args.n_assets)
        if any(s is None for s in stamps):
            raise DataError("multiplicity file needs a timestamp column for calendar and news tables")
        from datetime import datetime

        events = [stats.CojumpEvent(datetime.fromisoformat(s), int(v)) for s, v in zip(stamps, ms.m) if v > 0]
    else:
        raise ConfigError("stats needs --prices or --multiplicity")

    freq = float(np.count_nonzero(ms.m) / len(ms)) if len(ms) else 0.0
    write_csv(out / "jump_frequency.csv", ("theta", "timescale", "n_bins", "jump_frequency"), [(ms.theta, ms.timescale, len(ms), freq)], note)
    rows = []
    for m_min in args.m_min:
        r = stats.systemic_fraction(ms, m_min)
        rows.append((m_min, r.numerator, r.denominator, r.value, r.empty))
    write_csv(out / "systemic_fraction.csv", ("m_min", "n_systemic", "n_cojumps", "fraction", "empty"), rows, note)
    if np.any(ms.m > 0):
        cc = stats.multiplicity_ccdf(ms)
        write_csv(out / "multiplicity_ccdf.csv", ("multiplicity", "ccdf"), zip(cc.support.tolist(), cc.ccdf.tolist()), note)
        write_csv(
            out / "tail_exponent.csv",
            ("tail_exponent", "stderr", "k", "n_cojumps"),
            [(cc.tail_exponent, cc.tail_stderr, cc.tail_k, cc.n_cojumps)],
            note,
        )
    write_csv(out / "cojump_calendar.csv", ("day", "time", "multiplicity"), stats.cojump_calendar(events), note)
    if rp is not None:
        rows = []
        for m_min in args.m_min:
            for k, r in stats.timescale_robustness(rp, _vol_config(args), m_min):
                rows.append((k, m_min, r.numerator, r.denominator, r.value))
        write_csv(out / "timescale_robustness.csv", ("timescale", "m_min", "n_systemic", "n_cojumps", "fraction"), rows, note)
    if args.news is not None:
        items = news.load_news(_require(args.news, "--news"), args.session_start, args.session_end)
        imp = None if args.importance == "both" else [news.Importance(args.importance)]
        profile = news.news_fraction_profile(events, items, args.taus, args.m_min, imp)
        rows = [row for res in profile for row in res.rows()]
        write_csv(out / "news_fraction.csv", ("tau", "m_min", "n_events", "n_matched", "fraction"), rows, note)
    print(f"statistics for {len(ms)} bins written to {out}")


def cmd_simulate(args):
    seed = _seed(args)
    params = hawkes.HawkesParams.load(_require(args.model, "--model"))
    km = hawkes.build_kernel(params)
    sp = hawkes.spectrum(km)
    if not sp.radius < 1:
        print(f"refusing to simulate: spectral radius {sp.radius:.6g} >= 1", file=sys.stderr)
        print("leading eigenvalues: " + ", ".join(f"{v:.6g}" for v in sp.eigenvalues[:5]), file=sys.stderr)
        raise hawkes.NonStationaryError("nonstationary model")
    es = hawkes.simulate(km, params.beta, args.horizon, seed)
    ms = hawkes.bin_to_multiplicity(es, args.binning, int(np.ceil(args.horizon)))
    out = Path(args.out_dir)
    note = _provenance(args)
    write_csv(out / "events.csv", ("time", "type"), zip(map(repr, es.times.tolist()), es.types.tolist()), note)
    _write_multiplicity(out / "multiplicity.csv", ms, note)
    write_csv(out / "spectrum.csv", ("rank", "eigenvalue"), enumerate(sp.eigenvalues.tolist(), start=1), note)
    if np.any(ms.m > 0):
        cc = stats.multiplicity_ccdf(ms)
        write_csv(out / "model_ccdf.csv", ("multiplicity", "ccdf"), zip(cc.support.tolist(), cc.ccdf.tolist()), note)
    print(
        f"{len(es)} events, {int(np.count_nonzero(ms.m))} nonzero minutes; spectral radius {sp.radius:.6f}, "
        f"diagonally dominant: {sp.diagonally_dominant}"
    )
    return es, ms


def cmd_calibrate(args):
    seed = _seed(args)
    ms, _ = _read_multiplicity(args.data, args.n_assets)
    grid = cal.GridSpec.parse(args.grid)
    profile = cal.moment_profile(ms, args.tau, args.J, args.S)
    lam = hawkes.HawkesParams.from_series(ms, 0.5, 1.0, 1.0).lambda_bar
    result = cal.grid_search(profile, grid, lam, args.paths, seed, args.horizon or len(ms), args.binning, args.workers)
    out = Path(args.out_dir)
    note = _provenance(args)
    atomic_write_text(out / "calibration.json", result.to_json() + "\n")
    write_csv(out / "surface.csv", result.SURFACE_HEADER, result.surface, note)
    write_csv(out / "data_moments.csv", ("M", "f1", "f1_se", "f1_n", "f2", "f2_se", "f2_n"), profile.rows(), note)
    print(f"eta={result.eta:g} beta={result.beta:g} gamma={result.gamma:g} loss={result.loss:.4g} ({len(result.surface)} grid points)")
    return result


# ---- parser ----


def _detection_options(p):
    p.add_argument("--theta", type=float, default=4.0)
    p.add_argument("--timescale", type=int, default=1)
    p.add_argument("--halflife", type=float, default=60.0, help="EWMA half-life in minutes")
    p.add_argument("--warmup", type=int, default=120, help="warmup in minutes")
    p.add_argument("--sigma-floor", type=float, default=1e-8)
    p.add_argument("--open-exclusion", type=int, default=10, help="minutes after the open never flagged")


def _market_options(p):
    p.add_argument("--prices", type=Path)
    p.add_argument("--holidays", type=Path, help="file of ISO dates to exclude (early closes)")
    p.add_argument("--session-start", type=_clock, default=time(9, 30))
    p.add_argument("--session-end", type=_clock, default=time(16, 0))
    p.add_argument("--max-missing-frac", type=float, default=0.10)
    p.add_argument("--pattern-pooled", type=_bool, default=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cojumps", description="Jump/cojump detection and multiplicity Hawkes modelling.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", type=Path, help="key = value file; flags override it")
        p.add_argument("--out-dir", type=Path, default=Path("."))
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "write a synthetic price panel and news calendar")
    p.add_argument("--n-assets", type=int, default=20)
    p.add_argument("--days", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float, default=1e-3, help="per-minute return standard deviation")
    p.add_argument("--u-shape", type=float, default=0.0, help="intraday U-shape amplitude (0 = flat)")
    p.add_argument("--plant", type=_plants, help="planted cojumps MINUTE:MULTIPLICITY[,...]")
    p.add_argument("--plant-size", type=float, default=8.0, help="planted return in local standard deviations")
    p.add_argument("--news-minutes", type=_int_list, help="minute indices of scheduled news")
    p.add_argument("--news-per-day", type=float, default=0.0)

    p = add("detect", cmd_detect, "flag jumps and write the multiplicity series")
    _market_options(p)
    _detection_options(p)

    p = add("stats", cmd_stats, "cojump statistics and news association tables")
    _market_options(p)
    _detection_options(p)
    p.add_argument("--multiplicity", type=Path, help="use a multiplicity.csv instead of --prices")
    p.add_argument("--n-assets", type=int)
    p.add_argument("--news", type=Path)
    p.add_argument("--importance", choices=["MMI", "MEA", "both"], default="both")
    p.add_argument("--m-min", type=_int_list, default=[2, 10, 30, 60])
    p.add_argument("--taus", type=_int_list, default=list(news.DEFAULT_TAUS))

    p = add("simulate", cmd_simulate, "simulate the multiplicity Hawkes model")
    p.add_argument("--model", type=Path, help="JSON with n, eta, beta, gamma, lambda_bar")
    p.add_argument("--horizon", type=float, default=96861.0, help="minutes")
    p.add_argument("--seed", type=int)
    p.add_argument("--binning", choices=hawkes.BIN_RULES, default="max")

    p = add("calibrate", cmd_calibrate, "grid-search (eta, beta, gamma) by moment matching")
    p.add_argument("--data", type=Path, help="multiplicity.csv")
    p.add_argument("--tau", type=int, default=cal.DEFAULT_TAU)
    p.add_argument("--J", type=int, default=cal.DEFAULT_J)
    p.add_argument("--S", type=_int_range, default=list(cal.DEFAULT_S))
    p.add_argument("--grid", default="eta=0.05:0.95,beta=0.05:3.0,gamma=1.0:5.0")
    p.add_argument("--paths", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-assets", type=int)
    p.add_argument("--horizon", type=int, help="simulated minutes per path (default: data length)")
    p.add_argument("--binning", choices=hawkes.BIN_RULES, default="max")
    p.add_argument("--workers", type=int, default=1)
    return ap


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)  # explicit flags override the file's defaults
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except CojumpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
