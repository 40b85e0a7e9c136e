"""Deterministic synthetic input set used by the tests and the CLI smoke run.

The data are invented: geometric random walks driven by a common crypto
factor, with DeFi tokens loading on the lagged benchmark, TVL tied to market
cap through a noisy valuation ratio, and a weekly two-term search series.
The generator deliberately includes the awkward cases the loaders must
handle: late listings, a delisting, missing closes, sub-threshold tokens,
zero network counts and extension rows for unknown symbols.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .config import DEFAULT_ATTENTION_TERMS, MAJOR_TOKENS

DEFAULT_SEED = 20211231
START, END = "2020-01-01", "2021-12-31"
MINOR_TOKENS = (
    "SUSHI", "COMP", "YFI", "SNX", "BAL", "BNT", "REN", "KNC",
    "ZRX", "UMA", "BAND", "ALPHA", "PERP", "DODO", "TINY", "DUST",
)
LATE_LISTINGS = {"PERP": "2020-09-08", "DODO": "2020-09-25", "GRT": "2020-12-17", "RUNE": "2020-03-02"}
DELISTED = {"ALPHA": "2021-06-15"}
SUB_THRESHOLD = ("TINY", "DUST")
GAPPY = ("BAND", "UMA", "DUST", "LRC")
BLANK_CLOSE = ("XTZ", "KNC")
TVL_UNMATCHED = ("GHOSTA", "GHOSTB")
NETWORK_UNMATCHED = ("PHANTOM",)
NETWORK_TOKENS = ("UNI", "DAI", "LINK", "AAVE", "MKR", "CRV", "LRC", "COMP", "SNX", "YFI")

FILES = ("prices.csv", "tvl.csv", "network.csv", "attention.csv", "defix.ini")

CONFIG_TEXT = """\
; synthetic fixture run configuration
[inputs]
prices = prices.csv
tvl = tvl.csv
network = network.csv
attention = attention.csv

[index]
min_mcap = 1000000
reconstitution = monthly

[benchmarks]
btc = BTC
eth = ETH
crix = CRIX

[tokens]
major = {major}

[analysis]
week_start = sunday
lags_crypto = 1,2
lags_network = 1,2,3,4
lags_attention = 1,2,3
lags_valuation = 1,2,3,4
attention_terms = {terms}

[output]
dir = out
"""


def _walk(rng: np.random.Generator, n: int, start: float, drift: float, vol: float, shocks: np.ndarray) -> np.ndarray:
    steps = drift + shocks + vol * rng.standard_normal(n)
    steps[0] = 0.0
    return start * np.exp(np.cumsum(steps))


def generate(seed: int = DEFAULT_SEED) -> dict[str, pd.DataFrame]:
    """Return the four input tables as DataFrames in file column order."""
    rng = np.random.default_rng(seed)
    dates = pd.date_range(START, END, freq="D")
    n = len(dates)
    market = 0.03 * rng.standard_normal(n)  # common daily crypto shock
    lag_market = np.concatenate([[0.0], market[:-1]])

    prices, tvl_rows, net_rows = [], [], []
    paths: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def add_prices(sym: str, price: np.ndarray, supply: float | None, alive: np.ndarray) -> None:
        mcap = price * supply if supply is not None else np.full(n, np.nan)
        volume = mcap * rng.uniform(0.02, 0.2, n) if supply is not None else price * rng.uniform(1e3, 1e4, n)
        for i in np.flatnonzero(alive):
            prices.append((dates[i], sym, price[i], mcap[i], volume[i]))
        paths[sym] = (price, mcap)

    everywhere = np.ones(n, dtype=bool)
    add_prices("BTC", _walk(rng, n, 7200.0, 0.0025, 0.01, market), 18.5e6, everywhere)
    add_prices("ETH", _walk(rng, n, 130.0, 0.0035, 0.015, 1.2 * market), 110e6, everywhere)
    add_prices("CRIX", _walk(rng, n, 1000.0, 0.0028, 0.005, market), None, everywhere)

    for j, sym in enumerate((*MAJOR_TOKENS, *MINOR_TOKENS)):
        beta = rng.uniform(0.8, 1.5)
        lag_beta = rng.uniform(0.1, 0.4)
        shocks = beta * market + lag_beta * lag_market
        start_price = float(np.exp(rng.uniform(-1.0, 4.0)))
        if sym in SUB_THRESHOLD:
            supply = rng.uniform(1e4, 1e5) / start_price
        else:
            supply = float(np.exp(rng.uniform(np.log(3e7), np.log(2e9)))) / start_price
        price = _walk(rng, n, start_price, 0.003, rng.uniform(0.02, 0.05), shocks)
        alive = everywhere.copy()
        if sym in LATE_LISTINGS:
            alive &= dates >= pd.Timestamp(LATE_LISTINGS[sym])
        if sym in DELISTED:
            alive &= dates <= pd.Timestamp(DELISTED[sym])
        add_prices(sym, price, supply, alive)

    prices_df = pd.DataFrame(prices, columns=["date", "symbol", "close_usd", "market_cap_usd", "volume_usd"])
    # sporadic gaps in a few tokens: some rows vanish, some keep the row with an empty close
    gappy = prices_df["symbol"].isin(GAPPY).to_numpy()
    gap = gappy & (rng.random(len(prices_df)) < 0.01)
    prices_df = prices_df[~gap].copy()
    blank = prices_df["symbol"].isin(BLANK_CLOSE).to_numpy() & (rng.random(len(prices_df)) < 0.01)
    prices_df.loc[blank, "close_usd"] = np.nan

    tvl_syms = [s for s in (*MAJOR_TOKENS, *MINOR_TOKENS) if s not in SUB_THRESHOLD][:20]
    for sym in tvl_syms:
        _, mcap = paths[sym]
        log_ratio = np.cumsum(0.02 * rng.standard_normal(n)) + rng.uniform(-1.0, 0.5)
        tvl = mcap * np.exp(log_ratio)
        start = LATE_LISTINGS.get(sym, START)
        for i in np.flatnonzero(dates >= pd.Timestamp(start)):
            tvl_rows.append((dates[i], sym, tvl[i]))
    for sym in TVL_UNMATCHED:
        for i in range(0, n, 3):
            tvl_rows.append((dates[i], sym, 1e6 * (1 + i)))

    for sym in NETWORK_TOKENS:
        base = rng.uniform(2e3, 5e4)
        trend = np.exp(np.cumsum(0.01 * rng.standard_normal(n) + 0.3 * market))
        addr = rng.poisson(base * trend)
        txn = rng.poisson(3.0 * base * trend)
        quiet = rng.random(n) < 0.005  # reporting outages recorded as zero
        addr[quiet] = 0
        txn[quiet] = 0
        for i in range(n):
            net_rows.append((dates[i], sym, int(addr[i]), int(txn[i])))
    for sym in NETWORK_UNMATCHED:
        for i in range(0, n, 7):
            net_rows.append((dates[i], sym, 100, 250))

    weeks = pd.date_range("2019-12-29", END, freq="7D")
    attention_rows = []
    for k, term in enumerate(DEFAULT_ATTENTION_TERMS):
        level = np.exp(np.cumsum(0.08 * rng.standard_normal(len(weeks))) + 0.01 * k * np.arange(len(weeks)))
        interest = np.rint(100.0 * level / level.max()).astype(int)
        attention_rows += [(w, term, int(v)) for w, v in zip(weeks, interest)]

    return {
        "prices.csv": prices_df.sort_values(["date", "symbol"]).reset_index(drop=True),
        "tvl.csv": pd.DataFrame(tvl_rows, columns=["date", "symbol", "tvl_usd"]).sort_values(["date", "symbol"]),
        "network.csv": pd.DataFrame(net_rows, columns=["date", "symbol", "address_count", "transaction_count"]).sort_values(["date", "symbol"]),
        "attention.csv": pd.DataFrame(attention_rows, columns=["week_start", "term", "interest"]),
    }


def write_fixture(dest: str | Path, seed: int = DEFAULT_SEED) -> list[Path]:
    """Write the four CSVs and a matching ``defix.ini`` into ``dest``."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    for name, frame in generate(seed).items():
        out = frame.copy()
        date_col = "week_start" if "week_start" in out else "date"
        out[date_col] = out[date_col].dt.strftime("%Y-%m-%d")
        path = dest / name
        out.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
        written.append(path)
    ini = dest / "defix.ini"
    ini.write_text(
        CONFIG_TEXT.format(major=", ".join(MAJOR_TOKENS), terms=", ".join(DEFAULT_ATTENTION_TERMS)),
        encoding="utf-8",
    )
    written.append(ini)
    return written


def fixture_dir() -> Path:
    """Directory of the fixture files shipped with the package."""
    return Path(str(resources.files("defix") / "fixture_data"))
