"""Derived regressors: log-difference growth, TVL/market-cap ratio, log-log fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .econometrics import RegressionResult, ols
from .errors import TooFewObservations

FEATURE_EXPORT_COLUMNS = ("date", "symbol", "feature", "value")
FEATURES = ("d_address", "d_transaction", "d_tvl", "val_ratio")


@dataclass
class GrowthSeries:
    values: pd.Series
    skipped: int = 0  # steps with a non-positive endpoint


@dataclass
class RatioSeries:
    values: pd.Series
    skipped: int = 0  # dates with zero market cap


def log_growth(series: pd.Series) -> GrowthSeries:
    """ln(x_t) - ln(x_{t-1}) between consecutive rows.

    A step touching a zero or negative value is missing (never +-inf) and
    counted in ``skipped``; a step touching a missing value is just missing.
    """
    s = pd.Series(series, dtype=float)
    v = s.to_numpy()
    if len(v) < 2:
        return GrowthSeries(pd.Series(dtype=float, name=s.name), 0)
    prev, cur = v[:-1], v[1:]
    present = np.isfinite(prev) & np.isfinite(cur)
    positive = present & (prev > 0) & (cur > 0)
    out = np.full(len(cur), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[positive] = np.log(cur[positive]) - np.log(prev[positive])
    skipped = int(np.sum(present & ~positive))
    return GrowthSeries(pd.Series(out, index=s.index[1:], name=s.name), skipped)


def valuation_ratio(tvl: pd.Series, mcap: pd.Series) -> RatioSeries:
    """TVL / market cap on the common dates; missing where either input is missing or mcap is 0."""
    t, m = pd.Series(tvl, dtype=float).align(pd.Series(mcap, dtype=float), join="inner")
    zero = m == 0
    ratio = t / m.where(~zero)
    ratio.name = getattr(tvl, "name", None)
    return RatioSeries(ratio, int((zero & t.notna()).sum()))


def loglog_fit(tvl: pd.DataFrame, mcap: pd.DataFrame) -> tuple[RegressionResult, pd.DataFrame]:
    """Regress ln(mcap) on [const, ln(tvl)] over every strictly positive pair.

    Accepts wide (date x symbol) tables or aligned series.  Returns the fit
    and the point cloud with columns symbol, date, ln_tvl, ln_mcap.
    """
    if isinstance(tvl, pd.Series):
        tvl = tvl.to_frame("value")
        mcap = pd.Series(mcap).to_frame("value")
    t = tvl.stack(future_stack=True).rename("tvl")
    m = mcap.stack(future_stack=True).rename("mcap")
    pairs = pd.concat([t, m], axis=1, join="inner").dropna()
    pairs = pairs[(pairs["tvl"] > 0) & (pairs["mcap"] > 0)]
    if len(pairs) < 3:
        raise TooFewObservations(f"log-log fit needs >= 3 positive pairs, got {len(pairs)}")
    cloud = pd.DataFrame(
        {
            "ln_tvl": np.log(pairs["tvl"].to_numpy()),
            "ln_mcap": np.log(pairs["mcap"].to_numpy()),
        },
        index=pairs.index,
    )
    cloud.index.names = ["date", "symbol"]
    cloud = cloud.reset_index().sort_values(["symbol", "date"], kind="mergesort").reset_index(drop=True)
    cloud = cloud[["symbol", "date", "ln_tvl", "ln_mcap"]]
    fit = ols(cloud["ln_mcap"], cloud[["ln_tvl"]], names=["ln_tvl"])
    return fit, cloud


def export_features(features: dict[str, pd.DataFrame]) -> pd.DataFrame:
    """Long table date,symbol,feature,value from {feature: wide date x symbol table}."""
    parts = []
    for name in sorted(features):
        if name not in FEATURES:
            raise ValueError(f"unknown feature {name!r}")
        long = features[name].stack(future_stack=True).dropna().rename("value").reset_index()
        long.columns = ["date", "symbol", "value"]
        long["feature"] = name
        parts.append(long)
    if not parts:
        return pd.DataFrame(columns=list(FEATURE_EXPORT_COLUMNS))
    out = pd.concat(parts, ignore_index=True)[list(FEATURE_EXPORT_COLUMNS)]
    return out.sort_values(["feature", "symbol", "date"], kind="mergesort").reset_index(drop=True)
