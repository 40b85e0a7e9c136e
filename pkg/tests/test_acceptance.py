"""Acceptance suite: one test per criterion, each printed as PASS/FAIL in the
terminal summary (see conftest.py)."""

from __future__ import annotations

import math
import time

import numpy as np
import pandas as pd
import pytest
from helpers import make_panel, random_walk_prices, turnover_panel
from oracles import dummy_design_ols, normal_equations_ols

from defix.cli import main
from defix.econometrics import lagged_design, ols, panel_ols_time_effects, pearson_pvalue, significance_stars
from defix.features import log_growth
from defix.index_engine import IndexConfig, index_level, run_index
from defix.stats import durbin_watson, fmt3, sharpe, summary_stats

criterion = pytest.mark.criterion


@criterion(1, "index base anchoring: first level is exactly 1000.0")
def test_c01_base_anchoring(fixture_pipeline):
    pl = fixture_pipeline
    universe = pl.panel.subset(pl.defi_symbols)
    t0 = time.perf_counter()
    series = run_index(universe, pl.config.index)
    elapsed = time.perf_counter() - t0
    assert series.levels.iloc[0] == 1000.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        prices = random_walk_prices(rng, [f"S{i}" for i in range(7 + seed)], pd.date_range("2021-01-01", periods=40))
        caps = prices * np.exp(rng.uniform(15, 22, prices.shape[1]))
        assert run_index(make_panel(prices, caps)).levels.iloc[0] == 1000.0
    assert elapsed < 1.0, f"{elapsed:.2f}s"


@criterion(2, "divisor continuity across full-turnover reconstitutions, tol 1e-9 * level")
def test_c02_divisor_continuity():
    t0 = time.perf_counter()
    panel = turnover_panel(n_tokens=40, months=24)
    series = run_index(panel, IndexConfig(target_count=20))
    prices = panel.wide("price")
    worst = 0.0
    for prev, new in zip(series.history, series.history[1:]):
        day = new.divisor.effective_date
        row = prices.loc[day].dropna().to_dict()
        old_level = index_level(prev.constituents, prev.divisor, row)
        new_level = index_level(new.constituents, new.divisor, row)
        assert old_level == series.levels.loc[day]
        worst = max(worst, abs(old_level - new_level) / old_level)
        assert not set(prev.constituents.symbols) & set(new.constituents.symbols)
    elapsed = time.perf_counter() - t0
    assert len(series.history) == 24
    assert worst <= 1e-9
    assert elapsed < 5.0, f"{elapsed:.2f}s"


@criterion(3, "OLS equals the normal-equations oracle on 1000 instances, rel 1e-9")
def test_c03_ols_oracle():
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(1, 4))  # regressors; with the constant k_total <= 4
        n = int(rng.integers(k + 3, 51))
        X = rng.standard_normal((n, k)) * rng.uniform(0.5, 5.0, k) + rng.normal(0, 2, k)
        y = X @ rng.normal(0, 1, k) + rng.normal(0, 2) + rng.standard_normal(n) * rng.uniform(0.2, 3.0)
        res = ols(y, X)
        ref = normal_equations_ols(y, X)
        for got, want in ((res.coef, ref["coef"]), (res.se, ref["se"]), (res.t, ref["t"]), (res.r2, ref["r2"])):
            got, want = np.atleast_1d(got), np.atleast_1d(want)
            worst = max(worst, float(np.max(np.abs(got - want) / np.abs(want))))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9, f"worst relative error {worst:.2e}"
    assert elapsed < 10.0, f"{elapsed:.2f}s"


@criterion(4, "panel estimator equals dummy-augmented OLS on 100 unbalanced panels, tol 1e-8")
def test_c04_panel_dummy_equivalence():
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n_ent = int(rng.integers(2, 12))
        n_per = int(rng.integers(4, 25))
        k = int(rng.integers(1, 5))
        keep = rng.random((n_ent, n_per)) < rng.uniform(0.5, 0.95)
        keep[:2, :] = True  # every period seen by at least two entities
        ent, per = np.nonzero(keep)
        X = rng.standard_normal((len(ent), k))
        tau = rng.standard_normal(n_per)
        y = X @ rng.normal(0, 1, k) + tau[per] + rng.standard_normal(len(ent))
        design = pd.DataFrame(X, columns=[f"x(t-{j + 1})" for j in range(k)])
        design["y"] = y
        design.index = pd.MultiIndex.from_arrays([[f"E{e}" for e in ent], per], names=["entity", "time"])
        res = panel_ols_time_effects(design)
        ref = dummy_design_ols(y, X, list(per))
        worst = max(worst, float(np.max(np.abs(res.coef - ref["coef"]))))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-8, f"worst abs difference {worst:.2e}"
    assert elapsed < 30.0, f"{elapsed:.2f}s"


@criterion(5, 'sharpe convention: mean 0.125, sd 5.725 renders "0.022"')
def test_c05_sharpe_rendering():
    assert fmt3(sharpe(0.125, 5.725)) == "0.022"
    rng = np.random.default_rng(0)
    x = rng.standard_normal(500)
    x = (x - x.mean()) / x.std(ddof=1) * 5.725 + 0.125
    assert fmt3(summary_stats(x, with_sharpe=True).sharpe) == "0.022"


@criterion(6, 'star reproduction: r = 0.758, n = 265 gives "***"')
def test_c06_star_reproduction():
    t = 0.758 * math.sqrt(263) / math.sqrt(1 - 0.758**2)
    assert t == pytest.approx(18.9, abs=0.1)
    assert significance_stars(pearson_pvalue(0.758, 265)) == "***"


@criterion(7, "Durbin-Watson closed forms: alternating series and white noise")
def test_c07_durbin_watson():
    for n in (2, 10, 1000, 10_000):
        alt = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)])
        assert abs(durbin_watson(alt) - 4 * (n - 1) / n) <= 1e-12
    noise = np.random.default_rng(12345).standard_normal(10_000)
    assert 1.9 <= durbin_watson(noise) <= 2.1


@criterion(8, "log-growth telescoping over 1000 positive series, tol 1e-12")
def test_c08_telescoping():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 300))
        x = np.exp(np.cumsum(rng.normal(0, 0.05, n)) + rng.uniform(-5, 15))
        total = log_growth(pd.Series(x)).values.sum()
        worst = max(worst, abs(total - math.log(x[-1] / x[0])))
    assert worst <= 1e-12, f"worst {worst:.2e}"


@criterion(9, "Monte Carlo: planted lag-1 beta 0.9 recovered; null rarely ***")
def test_c09_monte_carlo():
    hits, null_stars, null_coefs = 0, 0, 0
    idx = pd.date_range("2010-01-03", periods=501, freq="7D")
    for seed in range(200):
        rng = np.random.default_rng(90_000 + seed)
        x = pd.Series(rng.standard_normal(501), index=idx, name="x")
        y = 0.9 * x.shift(1) + rng.standard_normal(501)
        ys, X = lagged_design(y.iloc[1:], x, [1, 2])
        res = ols(ys, X)
        hits += abs(res["x(t-1)"] - 0.9) <= 0.1
        y0 = pd.Series(rng.standard_normal(501), index=idx)
        ys0, X0 = lagged_design(y0.iloc[1:], x, [1, 2])
        null = ols(ys0, X0)
        null_stars += sum(s == "***" for s in null.stars())
        null_coefs += len(null.coef)
    assert len(ys) == 499
    assert hits / 200 >= 0.95, hits
    assert null_stars / null_coefs <= 0.03, null_stars / null_coefs


@criterion(10, "excess kurtosis of a large uniform sample lies in [-1.3, -1.1]")
def test_c10_uniform_kurtosis():
    x = np.random.default_rng(10).uniform(size=200_000)
    assert -1.3 <= summary_stats(x).kurtosis <= -1.1


@criterion(11, "end-to-end determinism: two fixture runs are byte-identical")
def test_c11_determinism(fixture_copy, tmp_path):
    import json

    cfg = str(fixture_copy / "defix.ini")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run-all", "--config", cfg, "--out", str(a)]) == 0
    assert main(["run-all", "--config", cfg, "--out", str(b)]) == 0
    files_a = sorted(p.name for p in a.iterdir())
    assert files_a == sorted(p.name for p in b.iterdir())
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["artifacts"] == mb["artifacts"] and len(ma["artifacts"]) == len(files_a) - 1


REGRESSION = {"table_id", "version", "row", "term", "coef", "se", "t", "p", "stars", "ci_low", "ci_high", "r2", "r2_between", "n"}
EXPECTED_SCHEMAS = {
    "t1": {"table_id", "version", "panel", "frequency", "variable", "unit", "n", "mean", "sd", "max", "min",
           "skewness", "kurtosis", "durbin_watson", "sharpe"},
    "t2": {"table_id", "version", "row", "col", "r", "p", "stars", "n"},
    "t6": {"table_id", "version", "row", "col", "r", "p", "stars", "n"},
    **{tid: REGRESSION for tid in ("t3", "t4", "t5", "t7", "t8", "t9", "t10", "t11", "t12", "t13", "t14", "t15", "t16", "d1", "d2")},
    "fig1": {"table_id", "version", "n", "date", "cumret_defix", "cumret_btc", "cumret_eth", "cumret_crix"},
    "fig2": {"table_id", "version", "n", "symbol", "date", "ln_tvl", "ln_mcap"},
    "fig2_fit": REGRESSION,
}


@criterion(12, "table-schema conformance for every emitted table")
def test_c12_schema_conformance(fixture_run):
    out, _, manifest = fixture_run
    assert set(manifest["tables"]) == set(EXPECTED_SCHEMAS)
    for tid, cols in EXPECTED_SCHEMAS.items():
        frame = pd.read_csv(out / f"{tid}.csv")
        assert set(frame.columns) == cols, tid
        assert len(frame) > 0, tid
        assert (out / f"{tid}.txt").read_text().startswith(f"{tid}:")
