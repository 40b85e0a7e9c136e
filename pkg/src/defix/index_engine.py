"""Divisor-chained, value-weighted index over a TokenPanel.

The level on day t is

    level_t = sum_i beta_i * P_it * Q_i / divisor

with quantities Q_i, adjustment factors beta_i and the divisor frozen at the
last reconstitution.  At inception the divisor is set so the level equals the
base value; at every later reconstitution it is reset so the new basket
reproduces the level the old basket produced that day.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, InsufficientEligible, MissingPrice, ZeroCapitalization
from .market_data import DEFAULT_MIN_MCAP, TokenPanel, bucket_start

BASE_VALUE = 1000.0
SCHEDULES = ("weekly", "monthly", "quarterly")


@dataclass(frozen=True)
class Member:
    symbol: str
    quantity: float
    beta: float = 1.0


@dataclass(frozen=True)
class ConstituentSet:
    effective_date: pd.Timestamp
    members: tuple[Member, ...]

    @property
    def symbols(self) -> list[str]:
        return [m.symbol for m in self.members]

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Divisor:
    value: float
    effective_date: pd.Timestamp


@dataclass(frozen=True)
class Epoch:
    epoch_id: int
    constituents: ConstituentSet
    divisor: Divisor
    target_level: float
    reason: str  # inception | scheduled | forced


@dataclass
class IndexConfig:
    min_mcap: float = DEFAULT_MIN_MCAP
    target_count: int | None = None
    reconstitution: str = "monthly"
    base_value: float = BASE_VALUE
    lookback_days: int = 0
    betas: Mapping[str, float] = field(default_factory=dict)
    exclude: Sequence[str] = ()
    # Hook for a model-based choice of constituent count.  Receives the
    # ranked eligible symbols and returns k; the result must still be a
    # positive multiple of five.
    count_selector: Callable[[list[str]], int] | None = None

    def __post_init__(self) -> None:
        if not self.min_mcap > 0:
            raise ConfigError(f"min_mcap must be > 0, got {self.min_mcap}")
        if self.target_count is not None and (self.target_count < 5 or self.target_count % 5):
            raise ConfigError(f"target_count must be a positive multiple of 5, got {self.target_count}")
        if self.reconstitution not in SCHEDULES:
            raise ConfigError(f"reconstitution must be one of {SCHEDULES}")
        if not self.base_value > 0:
            raise ConfigError("base_value must be > 0")
        if any(not b > 0 for b in self.betas.values()):
            raise ConfigError("adjustment factors must be > 0")


@dataclass
class IndexSeries:
    levels: pd.Series
    epoch_ids: pd.Series
    history: list[Epoch]
    base_value: float = BASE_VALUE

    def cumulative_members(self) -> list[str]:
        """Every symbol that was a constituent at some point."""
        return sorted({s for e in self.history for s in e.constituents.symbols})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"date": self.levels.index, "level": self.levels.values, "epoch_id": self.epoch_ids.values})

    def write_csv(self, dest) -> None:
        df = self.to_frame()
        df["date"] = df["date"].dt.strftime("%Y-%m-%d")
        df.to_csv(dest, index=False, lineterminator="\n")

    def history_json(self) -> list[dict]:
        return [
            {
                "epoch_id": e.epoch_id,
                "effective_date": e.divisor.effective_date.strftime("%Y-%m-%d"),
                "reason": e.reason,
                "target_level": e.target_level,
                "divisor": e.divisor.value,
                "members": [{"symbol": m.symbol, "quantity": m.quantity, "beta": m.beta} for m in e.constituents.members],
            }
            for e in self.history
        ]

    def write_history(self, dest) -> None:
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.history_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _day_slice(panel: TokenPanel, date: pd.Timestamp) -> pd.DataFrame:
    try:
        return panel.frame.xs(date, level="date")
    except KeyError:
        return panel.frame.iloc[0:0].droplevel("date")


def eligible_symbols(
    panel: TokenPanel,
    date,
    config: IndexConfig,
    exclude: Sequence[str] = (),
) -> list[str]:
    """Symbols passing the screen on ``date``, ranked by market cap (desc), ties by symbol."""
    day = pd.Timestamp(date)
    today = _day_slice(panel, day)
    blocked = set(config.exclude) | set(exclude)
    ok = today[
        today["price"].notna()
        & (today["price"] > 0)
        & today["market_cap"].notna()
        & (today["market_cap"] >= config.min_mcap)
    ]
    caps = {sym: float(cap) for sym, cap in ok["market_cap"].items() if sym not in blocked}
    if config.lookback_days > 0 and caps:
        start = day - pd.Timedelta(days=config.lookback_days)
        prices = panel.wide("price", symbols=sorted(caps))
        window = prices.loc[(prices.index >= start) & (prices.index <= day)]
        calendar = pd.date_range(start, day, freq="D")
        window = window.reindex(calendar)
        complete = window.notna().all()
        caps = {s: c for s, c in caps.items() if complete[s]}
    return [s for s, _ in sorted(caps.items(), key=lambda kv: (-kv[1], kv[0]))]


def select_constituents(
    panel: TokenPanel,
    date,
    config: IndexConfig | None = None,
    exclude: Sequence[str] = (),
) -> ConstituentSet:
    """Top-k eligible symbols, k the largest multiple of five allowed by eligibility and target."""
    config = config or IndexConfig()
    day = pd.Timestamp(date)
    ranked = eligible_symbols(panel, day, config, exclude)
    if len(ranked) < 5:
        raise InsufficientEligible(day.date(), len(ranked))
    if config.count_selector is not None:
        k = int(config.count_selector(ranked))
        if k < 5 or k % 5 or k > len(ranked):
            raise ConfigError(f"count_selector returned invalid constituent count {k}")
    else:
        k = 5 * (len(ranked) // 5)
        if config.target_count is not None:
            k = min(k, config.target_count)
    today = _day_slice(panel, day)
    members = []
    for sym in ranked[:k]:
        price = float(today.at[sym, "price"])
        cap = float(today.at[sym, "market_cap"])
        members.append(Member(sym, cap / price, float(config.betas.get(sym, 1.0))))
    return ConstituentSet(day, tuple(members))


def _basket_value(cset: ConstituentSet, prices: Mapping[str, float], date=None) -> float:
    total = 0.0
    for m in cset.members:
        p = prices.get(m.symbol)
        if p is None or not math.isfinite(p):
            raise MissingPrice(m.symbol, date)
        total += m.beta * p * m.quantity
    return total


def compute_divisor(cset: ConstituentSet, prices: Mapping[str, float], target_level: float = BASE_VALUE) -> Divisor:
    """Divisor that makes ``cset`` evaluate to ``target_level`` at its effective date."""
    if not target_level > 0:
        raise ValueError(f"target_level must be > 0, got {target_level}")
    total = _basket_value(cset, prices, cset.effective_date.date())
    if total == 0:
        raise ZeroCapitalization(f"basket on {cset.effective_date.date()} has zero capitalization")
    return Divisor(total / target_level, cset.effective_date)


def index_level(cset: ConstituentSet, divisor: Divisor, prices: Mapping[str, float], date=None) -> float:
    if not divisor.value > 0:
        raise ValueError("divisor must be > 0")
    return _basket_value(cset, prices, date) / divisor.value


def reconstitution_dates(dates: pd.DatetimeIndex, schedule: str, week_start: str = "sunday") -> set[pd.Timestamp]:
    """First available date of each week/month/quarter (the very first date excluded)."""
    dates = pd.DatetimeIndex(sorted(dates))
    if schedule == "weekly":
        keys = bucket_start(dates, "weekly", week_start)
    elif schedule == "monthly":
        keys = dates.to_period("M")
    elif schedule == "quarterly":
        keys = dates.to_period("Q")
    else:
        raise ConfigError(f"unknown reconstitution schedule {schedule!r}")
    first = pd.Series(dates, index=keys).groupby(level=0).min()
    return set(first.iloc[1:]) if len(first) else set()


def run_index(panel: TokenPanel, config: IndexConfig | None = None, start=None) -> IndexSeries:
    """Build the daily index series and its epoch history.

    Inception is ``start`` or the first date with at least five eligible
    symbols.  When a constituent has no price on the next date, the basket is
    reconstituted on the last day it was still priced (a forced epoch) so no
    level is ever imputed.
    """
    config = config or IndexConfig()
    if panel.frequency != "daily":
        raise ValueError("run_index expects a daily panel")
    prices = panel.wide("price")
    dates = prices.index
    if start is not None:
        dates = dates[dates >= pd.Timestamp(start)]
    rows = {d: {s: float(v) for s, v in row.items() if np.isfinite(v)} for d, row in prices.loc[dates].iterrows()}

    def priced_next(i: int) -> set[str] | None:
        return set(rows[dates[i + 1]]) if i + 1 < len(dates) else None

    def select(i: int) -> ConstituentSet:
        nxt = priced_next(i)
        exclude = [] if nxt is None else [s for s in rows[dates[i]] if s not in nxt]
        return select_constituents(panel, dates[i], config, exclude=exclude)

    # inception: first date on which a basket can be formed
    i0 = None
    cset = None
    last_err: InsufficientEligible | None = None
    for i in range(len(dates)):
        try:
            cset = select(i)
            i0 = i
            break
        except InsufficientEligible as err:
            last_err = err
            if start is not None:
                raise
    if cset is None:
        raise last_err or InsufficientEligible(None, 0)

    divisor = compute_divisor(cset, rows[dates[i0]], config.base_value)
    history = [Epoch(0, cset, divisor, config.base_value, "inception")]
    scheduled = reconstitution_dates(dates[i0:], config.reconstitution)

    out_dates = [dates[i0]]
    levels = [config.base_value]
    epoch_ids = [0]
    for i in range(i0 + 1, len(dates)):
        day = dates[i]
        level = index_level(cset, divisor, rows[day], day.date())
        out_dates.append(day)
        levels.append(level)
        epoch_ids.append(history[-1].epoch_id)

        nxt = priced_next(i)
        forced = nxt is not None and any(s not in nxt for s in cset.symbols)
        if day in scheduled or forced:
            cset = select(i)
            divisor = compute_divisor(cset, rows[day], level)
            reason = "scheduled" if day in scheduled else "forced"
            history.append(Epoch(len(history), cset, divisor, level, reason))

    idx = pd.DatetimeIndex(out_dates, name="date")
    return IndexSeries(
        levels=pd.Series(levels, index=idx, name="level", dtype=float),
        epoch_ids=pd.Series(epoch_ids, index=idx, name="epoch_id", dtype=int),
        history=history,
        base_value=config.base_value,
    )
