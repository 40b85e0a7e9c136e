"""Small builders for synthetic panels used across the test modules."""

from __future__ import annotations

import numpy as np
import pandas as pd

from defix.market_data import TokenPanel


def make_panel(prices: pd.DataFrame, caps: pd.DataFrame | None = None, supply: float = 1e7) -> TokenPanel:
    """TokenPanel from a wide date x symbol price table; NaN prices mean no row."""
    if caps is None:
        caps = prices * supply
    long = pd.DataFrame(
        {
            "price": prices.stack(future_stack=True),
            "market_cap": caps.reindex_like(prices).stack(future_stack=True),
        }
    )
    long.index.names = ["date", "symbol"]
    long = long[long["price"].notna()]
    long["volume"] = long["market_cap"] * 0.01
    frame = long.reorder_levels(["symbol", "date"]).sort_index()
    return TokenPanel(frame[["price", "market_cap", "volume"]])


def random_walk_prices(rng: np.random.Generator, symbols, dates, vol: float = 0.03) -> pd.DataFrame:
    steps = vol * rng.standard_normal((len(dates), len(symbols)))
    steps[0] = 0.0
    start = np.exp(rng.uniform(0.0, 4.0, len(symbols)))
    return pd.DataFrame(start * np.exp(np.cumsum(steps, axis=0)), index=pd.DatetimeIndex(dates, name="date"), columns=list(symbols))


def turnover_panel(seed: int = 7, n_tokens: int = 40, months: int = 24) -> TokenPanel:
    """Two halves of the universe swap dominance every month, so each
    reconstitution replaces the whole top-20 basket."""
    rng = np.random.default_rng(seed)
    start = pd.Timestamp("2020-01-01")
    dates = pd.date_range(start, start + pd.DateOffset(months=months) - pd.Timedelta(days=1), freq="D")
    symbols = [f"T{i:02d}" for i in range(n_tokens)]
    prices = random_walk_prices(rng, symbols, dates)
    half = n_tokens // 2
    month = dates.to_period("M").astype(int).to_numpy()
    group_a = (month - month[0]) % 2 == 0
    supply = np.ones((len(dates), n_tokens))
    supply[np.ix_(group_a, np.arange(half))] = 1e13
    supply[np.ix_(~group_a, np.arange(half, n_tokens))] = 1e13
    supply[supply == 1] = 1e7
    caps = prices * supply
    return make_panel(prices, caps)
