"""Loading, validation, cleaning and resampling of the raw input files.

Every loader takes a path or an open text stream in one of the fixed CSV
schemas below and returns validated pandas objects.  Dates are calendar UTC
days stored as tz-naive midnight timestamps.  An empty field means missing.

    prices.csv:    date,symbol,close_usd,market_cap_usd,volume_usd
    tvl.csv:       date,symbol,tvl_usd
    network.csv:   date,symbol,address_count,transaction_count
    attention.csv: week_start,term,interest
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Union

import numpy as np
import pandas as pd

from .errors import (
    BadDate,
    BadNumber,
    ConfigError,
    DuplicateKey,
    InterestOutOfRange,
    MissingColumn,
    NegativeValue,
    SchemaMismatch,
)

Source = Union[str, "os.PathLike[str]", IO[str]]

PRICES_SCHEMA = ("date", "symbol", "close_usd", "market_cap_usd", "volume_usd")
TVL_SCHEMA = ("date", "symbol", "tvl_usd")
NETWORK_SCHEMA = ("date", "symbol", "address_count", "transaction_count")
ATTENTION_SCHEMA = ("week_start", "term", "interest")

# file column -> panel column
_PRICE_FIELDS = {"close_usd": "price", "market_cap_usd": "market_cap", "volume_usd": "volume"}
_TVL_FIELDS = {"tvl_usd": "tvl"}
_NETWORK_FIELDS = {"address_count": "address_count", "transaction_count": "transaction_count"}

BASE_FIELDS = ("price", "market_cap", "volume")
EXTENSION_FIELDS = ("tvl", "address_count", "transaction_count")
FREQUENCIES = ("daily", "weekly", "monthly")

DEFAULT_MIN_MCAP = 1_000_000.0


@dataclass
class TokenPanel:
    """Per-token, per-date observations.

    ``frame`` is indexed by a sorted (symbol, date) MultiIndex and always has
    the columns ``price``, ``market_cap`` and ``volume``; ``tvl``,
    ``address_count`` and ``transaction_count`` appear once attached.
    """

    frame: pd.DataFrame
    frequency: str = "daily"

    def __post_init__(self) -> None:
        if self.frequency not in FREQUENCIES:
            raise ValueError(f"unknown frequency {self.frequency!r}")

    @property
    def symbols(self) -> list[str]:
        return sorted(self.frame.index.get_level_values("symbol").unique())

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(sorted(self.frame.index.get_level_values("date").unique()))

    def has_field(self, name: str) -> bool:
        return name in self.frame.columns

    def series(self, symbol: str, name: str = "price") -> pd.Series:
        s = self.frame.xs(symbol, level="symbol")[name]
        s.name = symbol
        return s

    def wide(self, name: str = "price", symbols: Iterable[str] | None = None) -> pd.DataFrame:
        """date x symbol table of one field (missing where not observed)."""
        if name not in self.frame.columns:
            raise KeyError(name)
        w = self.frame[name].unstack("symbol").sort_index()
        if symbols is not None:
            w = w.reindex(columns=list(symbols))
        w.columns.name = None
        return w

    def subset(self, symbols: Iterable[str]) -> "TokenPanel":
        keep = set(symbols)
        mask = self.frame.index.get_level_values("symbol").isin(keep)
        return TokenPanel(self.frame[mask].copy(), self.frequency)

    def symbols_with(self, name: str) -> list[str]:
        """Symbols that have at least one non-missing value of ``name``."""
        if name not in self.frame.columns:
            return []
        col = self.frame[name].dropna()
        return sorted(col.index.get_level_values("symbol").unique())

    def to_prices_csv(self, dest: Source) -> None:
        out = self.frame.reset_index()[["date", "symbol", *BASE_FIELDS]]
        out = out.rename(columns={v: k for k, v in _PRICE_FIELDS.items()})
        out["date"] = out["date"].dt.strftime("%Y-%m-%d")
        out = out.sort_values(["date", "symbol"], kind="mergesort")
        out.to_csv(dest, index=False, lineterminator="\n")


@dataclass
class AttachReport:
    """Outcome of joining an extension file onto a panel."""

    kind: str
    matched_rows: int = 0
    unmatched_rows: int = 0
    unmatched_symbols: list[str] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return json.dumps(
            {
                "event": "unmatched",
                "kind": self.kind,
                "matched_rows": self.matched_rows,
                "unmatched_rows": self.unmatched_rows,
                "unmatched_symbols": self.unmatched_symbols,
            },
            sort_keys=True,
        ) + "\n"


@dataclass
class CleaningReport:
    rows_before: dict[str, int] = field(default_factory=dict)
    rows_dropped: dict[str, int] = field(default_factory=dict)
    dropped_symbols: list[str] = field(default_factory=list)

    @property
    def total_dropped(self) -> int:
        return sum(self.rows_dropped.values())

    def to_jsonl(self) -> str:
        lines = []
        for sym in sorted(self.rows_before):
            lines.append(
                json.dumps(
                    {
                        "event": "clean",
                        "symbol": sym,
                        "rows_before": self.rows_before[sym],
                        "rows_dropped": self.rows_dropped.get(sym, 0),
                        "symbol_dropped": sym in self.dropped_symbols,
                    },
                    sort_keys=True,
                )
            )
        return "".join(line + "\n" for line in lines)


# --- parsing helpers ----------------------------------------------------------


def _label(source: Source) -> str | None:
    if isinstance(source, (str, os.PathLike)):
        return os.fspath(source)
    return getattr(source, "name", None)


def _read_raw(source: Source, schema: tuple[str, ...]) -> pd.DataFrame:
    label = _label(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    if not text.strip():
        raise MissingColumn("empty input, header row required", source=label)
    raw = pd.read_csv(
        io.StringIO(text), dtype=str, keep_default_na=False, na_values=[], skipinitialspace=False
    )
    raw.columns = [c.strip() for c in raw.columns]
    missing = [c for c in schema if c not in raw.columns]
    if missing:
        raise MissingColumn(f"missing column(s): {', '.join(missing)}", source=label)
    raw = raw[list(schema)].apply(lambda c: c.str.strip())
    raw.index = pd.RangeIndex(1, len(raw) + 1)
    return raw


def _first_bad(mask: pd.Series) -> int:
    return int(mask[mask].index[0])


def _parse_dates(col: pd.Series, name: str, label: str | None) -> pd.Series:
    parsed = pd.to_datetime(col, format="%Y-%m-%d", errors="coerce")
    bad = parsed.isna()
    if bad.any():
        row = _first_bad(bad)
        raise BadDate(f"unparseable {name} {col[row]!r}", row=row, source=label)
    return parsed


def _parse_numbers(raw: pd.DataFrame, cols: Iterable[str], label: str | None) -> pd.DataFrame:
    out = {}
    bad_rows: set[int] = set()
    for c in cols:
        text = raw[c]
        empty = text == ""
        vals = pd.to_numeric(text.where(~empty), errors="coerce").astype(float)
        bad = ~empty & ~np.isfinite(vals)
        bad_rows.update(int(r) for r in bad[bad].index)
        out[c] = vals
    if bad_rows:
        rows = sorted(bad_rows)
        shown = ", ".join(str(r) for r in rows[:20])
        more = f" (+{len(rows) - 20} more)" if len(rows) > 20 else ""
        err = BadNumber(f"unparseable numeric field in rows {shown}{more}", row=rows[0], source=label)
        err.rows = rows
        raise err
    nums = pd.DataFrame(out, index=raw.index)
    neg = (nums < 0).any(axis=1)
    if neg.any():
        row = _first_bad(neg)
        col = next(c for c in nums.columns if nums.at[row, c] < 0)
        raise NegativeValue(f"{col} = {raw.at[row, col]} is negative", row=row, source=label)
    return nums


def _keyed_frame(raw: pd.DataFrame, fields: dict[str, str], label: str | None) -> pd.DataFrame:
    dates = _parse_dates(raw["date"], "date", label)
    symbols = raw["symbol"]
    blank = symbols == ""
    if blank.any():
        raise SchemaMismatch("empty symbol", row=_first_bad(blank), source=label)
    nums = _parse_numbers(raw, fields.keys(), label)
    df = nums.rename(columns=fields)
    df.insert(0, "symbol", symbols.values)
    df.insert(1, "date", dates.values)
    dup = df.duplicated(["symbol", "date"], keep="first")
    if dup.any():
        row = _first_bad(dup)
        raise DuplicateKey(
            f"duplicate (symbol, date) = ({df.at[row, 'symbol']}, {raw.at[row, 'date']})",
            row=row,
            source=label,
        )
    return df.set_index(["symbol", "date"]).sort_index()


# --- public loaders -------------------------------------------------------------


def ingest_prices(source: Source) -> TokenPanel:
    """Load ``prices.csv`` into a daily panel."""
    label = _label(source)
    raw = _read_raw(source, PRICES_SCHEMA)
    return TokenPanel(_keyed_frame(raw, _PRICE_FIELDS, label), "daily")


def ingest_tvl(source: Source) -> pd.DataFrame:
    label = _label(source)
    return _keyed_frame(_read_raw(source, TVL_SCHEMA), _TVL_FIELDS, label)


def ingest_network(source: Source) -> pd.DataFrame:
    label = _label(source)
    return _keyed_frame(_read_raw(source, NETWORK_SCHEMA), _NETWORK_FIELDS, label)


def attach(panel: TokenPanel, extension: pd.DataFrame, kind: str = "extension") -> tuple[TokenPanel, AttachReport]:
    """Outer-join extension columns (tvl / network counts) onto the panel.

    Rows whose symbol has no price history are kept, with missing price
    fields, and listed in the report.
    """
    known = set(panel.symbols)
    ext_symbols = extension.index.get_level_values("symbol")
    unmatched_mask = ~ext_symbols.isin(known)
    report = AttachReport(
        kind=kind,
        matched_rows=int((~unmatched_mask).sum()),
        unmatched_rows=int(unmatched_mask.sum()),
        unmatched_symbols=sorted(set(ext_symbols[unmatched_mask])),
    )
    base = panel.frame.drop(columns=[c for c in extension.columns if c in panel.frame.columns])
    merged = base.join(extension, how="outer").sort_index()
    return TokenPanel(merged, panel.frequency), report


def ingest_attention(source: Source, week_start: str = "sunday") -> pd.DataFrame:
    """Load weekly search interest as a week_start x term table of ints in [0, 100]."""
    label = _label(source)
    raw = _read_raw(source, ATTENTION_SCHEMA)
    weeks = _parse_dates(raw["week_start"], "week_start", label)
    terms = raw["term"]
    if (terms == "").any():
        raise SchemaMismatch("empty term", row=_first_bad(terms == ""), source=label)
    text = raw["interest"]
    vals = pd.to_numeric(text.where(text != ""), errors="coerce")
    bad = (text != "") & (vals.isna() | (vals != np.round(vals)))
    if bad.any():
        row = _first_bad(bad)
        raise BadNumber(f"interest {text[row]!r} is not an integer", row=row, source=label)
    out_of_range = vals.notna() & ((vals < 0) | (vals > 100))
    if out_of_range.any():
        row = _first_bad(out_of_range)
        raise InterestOutOfRange(f"interest {text[row]} outside [0, 100]", row=row, source=label)
    anchor = _WEEK_ANCHORS[week_start]
    off = weeks.dt.dayofweek != anchor
    if off.any():
        row = _first_bad(off)
        raise BadDate(f"week_start {raw.at[row, 'week_start']} is not a {week_start}", row=row, source=label)
    df = pd.DataFrame({"week_start": weeks, "term": terms, "interest": vals})
    dup = df.duplicated(["term", "week_start"])
    if dup.any():
        row = _first_bad(dup)
        raise DuplicateKey(f"duplicate (term, week_start) for {terms[row]}", row=row, source=label)
    for term, grp in df.sort_values("week_start").groupby("term", sort=True):
        gaps = grp["week_start"].diff().dropna()
        irregular = gaps != pd.Timedelta(days=7)
        if irregular.any():
            row = int(irregular[irregular].index[0])
            raise BadDate(f"week_starts for {term!r} are not 7 days apart", row=row, source=label)
    wide = df.pivot(index="week_start", columns="term", values="interest").sort_index()
    wide.columns.name = None
    wide.index.name = "week_start"
    return wide


# --- cleaning and screening --------------------------------------------------------


def clean_panel(panel: TokenPanel, forward_fill: bool = False) -> tuple[TokenPanel, CleaningReport]:
    """Drop rows with a missing price; drop symbols left with no rows.

    With ``forward_fill`` the last observed price, market cap and volume are
    carried forward within each symbol before dropping (off by default).
    """
    if panel.frequency != "daily":
        raise ValueError("clean_panel expects a daily panel")
    frame = panel.frame
    if forward_fill:
        frame = frame.copy()
        cols = [c for c in BASE_FIELDS if c in frame.columns]
        frame[cols] = frame[cols].groupby(level="symbol").ffill()
    report = CleaningReport()
    counts = frame.groupby(level="symbol").size()
    missing = frame["price"].isna()
    dropped = missing.groupby(level="symbol").sum()
    for sym, n in counts.items():
        report.rows_before[sym] = int(n)
        report.rows_dropped[sym] = int(dropped.get(sym, 0))
        if dropped.get(sym, 0) == n:
            report.dropped_symbols.append(sym)
    if not missing.any():
        return TokenPanel(frame, panel.frequency), report
    return TokenPanel(frame[~missing], panel.frequency), report


def filter_min_mcap(panel: TokenPanel, date, threshold: float = DEFAULT_MIN_MCAP) -> TokenPanel:
    """Keep the symbols whose market cap on ``date`` is at least ``threshold``."""
    if not threshold > 0:
        raise ConfigError(f"min_mcap must be > 0, got {threshold}")
    day = pd.Timestamp(date)
    try:
        caps = panel.frame.xs(day, level="date")["market_cap"]
    except KeyError:
        return panel.subset([])
    keep = caps[caps >= threshold].index
    return panel.subset(keep)


def top_by_average_mcap(
    panel: TokenPanel,
    n: int = 15,
    window_days: int = 100,
    end=None,
    candidates: Iterable[str] | None = None,
) -> list[str]:
    """Largest symbols by average market cap over the trailing window ending at ``end``."""
    caps = panel.wide("market_cap")
    if candidates is not None:
        caps = caps.reindex(columns=sorted(set(candidates) & set(caps.columns)))
    if caps.empty:
        return []
    last = pd.Timestamp(end) if end is not None else caps.index.max()
    window = caps.loc[(caps.index > last - pd.Timedelta(days=window_days)) & (caps.index <= last)]
    avg = window.mean().dropna()
    ranked = sorted(avg.items(), key=lambda kv: (-kv[1], kv[0]))
    return [sym for sym, _ in ranked[:n]]


# --- frequency conversion ------------------------------------------------------------

_WEEK_ANCHORS = {"monday": 0, "sunday": 6}
_KINDS = ("level", "return", "growth")


def bucket_start(dates: pd.DatetimeIndex, to: str, week_start: str = "sunday") -> pd.DatetimeIndex:
    """First calendar day of the weekly/monthly bucket containing each date."""
    dates = pd.DatetimeIndex(dates)
    if to == "weekly":
        shift = (dates.dayofweek - _WEEK_ANCHORS[week_start]) % 7
        return dates - pd.to_timedelta(shift, unit="D")
    if to == "monthly":
        return dates.to_period("M").to_timestamp()
    if to == "daily":
        return dates
    raise ValueError(f"unknown frequency {to!r}")


def resample(series: pd.Series, to: str, kind: str = "level", week_start: str = "sunday") -> pd.Series:
    """Convert a daily series to weekly or monthly buckets labelled by bucket start.

    kind="level" keeps the last observation, kind="return" compounds simple
    returns, kind="growth" sums log growths.  Buckets with no observation
    inside the covered range come back as NaN.
    """
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    s = series.dropna().sort_index()
    if to == "daily":
        return s
    if s.empty:
        return pd.Series(dtype=float, name=series.name)
    keys = bucket_start(s.index, to, week_start)
    grouped = s.groupby(keys)
    if kind == "level":
        out = grouped.last()
    elif kind == "return":
        out = (1.0 + s).groupby(keys).prod(min_count=1) - 1.0
        single = grouped.count() == 1
        out[single] = grouped.first()[single]  # avoid (1 + r) - 1 rounding
    else:
        out = grouped.sum(min_count=1)
    freq = "7D" if to == "weekly" else "MS"
    full = pd.date_range(out.index.min(), out.index.max(), freq=freq)
    out = out.reindex(full)
    out.index.name = series.index.name
    out.name = series.name
    return out
