"""Experiment suite: wires loading, index construction and estimation into tables.

Each ``cmd_*`` function returns a list of artifacts; :func:`write_artifacts`
puts them in the output directory and refreshes ``manifest.json``.  A table
whose estimation fails (entirely or for some rows) is still written with the
rows that succeeded and is flagged in the manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import RunConfig
from .econometrics import (
    PanelResult,
    lagged_design,
    ols,
    panel_lag_design,
    panel_ols_time_effects,
    pearson_matrix,
)
from .errors import DefixError
from .features import export_features, log_growth, loglog_fit, valuation_ratio
from .index_engine import IndexSeries, run_index
from .market_data import (
    TokenPanel,
    attach,
    clean_panel,
    ingest_attention,
    ingest_network,
    ingest_prices,
    ingest_tvl,
    resample,
    top_by_average_mcap,
)
from .stats import cumulative_returns, simple_returns, summary_stats
from .tables import (
    TableArtifact,
    conform,
    regression_rows,
    render_correlation,
    render_panel,
    render_regressions,
    render_summary,
)

log = logging.getLogger(__name__)

PREDICTORS = ("btc", "eth", "crix")
PREDICTOR_TABLES = {"btc": "t3", "eth": "t4", "crix": "t5"}
NETWORK_PANELS = (
    ("t8", "tvl", "d_tvl", "all"),
    ("t9", "tvl", "d_tvl", "major"),
    ("t10", "transaction_count", "d_transaction", "all"),
    ("t11", "transaction_count", "d_transaction", "major"),
    ("t12", "address_count", "d_address", "all"),
    ("t13", "address_count", "d_address", "major"),
)
VALUATION_TABLES = {"weekly": ("t15", "t16"), "monthly": ("d1", "d2")}
GROWTH_FIELDS = {"d_address": "address_count", "d_transaction": "transaction_count", "d_tvl": "tvl"}


@dataclass
class FileArtifact:
    name: str
    content: str


def _err(where: str, exc: Exception) -> str:
    return f"{where}: {type(exc).__name__}: {exc}"


class Pipeline:
    """Loads the inputs once and derives every series the tables need."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.notes: list[str] = []

    # -- inputs ------------------------------------------------------------------

    @cached_property
    def _loaded(self):
        cfg = self.config
        raw = ingest_prices(cfg.inputs["prices"])
        panel, tvl_report = attach(raw, ingest_tvl(cfg.inputs["tvl"]), "tvl")
        panel, net_report = attach(panel, ingest_network(cfg.inputs["network"]), "network")
        panel, clean_report = clean_panel(panel)
        return panel, [tvl_report, net_report], clean_report

    @property
    def panel(self) -> TokenPanel:
        return self._loaded[0]

    def ingest_report(self) -> str:
        _, attach_reports, clean_report = self._loaded
        return "".join(r.to_jsonl() for r in attach_reports) + clean_report.to_jsonl()

    @cached_property
    def attention(self) -> pd.DataFrame:
        att = ingest_attention(self.config.inputs["attention"], week_start=self.config.week_start)
        missing = [t for t in self.config.attention_terms if t not in att.columns]
        if missing:
            raise DefixError(f"attention terms not found in attention file: {missing}")
        return att[list(self.config.attention_terms)].astype(float)

    @cached_property
    def defi_symbols(self) -> list[str]:
        bench = set(self.config.benchmarks.values())
        return [s for s in self.panel.symbols if s not in bench]

    @cached_property
    def major_symbols(self) -> list[str]:
        cfg = self.config
        if cfg.major is None:
            return top_by_average_mcap(
                self.panel, cfg.major_count, cfg.major_window_days, candidates=self.defi_symbols
            )
        present = set(self.defi_symbols)
        missing = [s for s in cfg.major if s not in present]
        if missing:
            self.notes.append(f"major tokens absent from prices: {', '.join(missing)}")
            log.warning("major tokens absent from prices: %s", ", ".join(missing))
        return [s for s in cfg.major if s in present]

    @cached_property
    def index(self) -> IndexSeries:
        universe = self.panel.subset(self.defi_symbols)
        return run_index(universe, self.config.index)

    # -- derived series ------------------------------------------------------------

    def _freq(self, series: pd.Series, freq: str, kind: str) -> pd.Series:
        return resample(series, freq, kind=kind, week_start=self.config.week_start)

    def daily_returns(self, symbol: str) -> pd.Series:
        if symbol == "DeFiX":
            return simple_returns(self.index.levels).rename("DeFiX")
        return simple_returns(self.panel.series(symbol, "price")).rename(symbol)

    def returns(self, symbol: str, freq: str = "weekly") -> pd.Series:
        return self._freq(self.daily_returns(symbol), freq, "return")

    def benchmark(self, key: str) -> str:
        return self.config.benchmarks[key]

    def returns_wide(self, symbols, freq: str) -> pd.DataFrame:
        cols = {}
        for s in symbols:
            try:
                cols[s] = self.returns(s, freq)
            except DefixError:
                continue
        return pd.DataFrame(cols).sort_index()

    def field_wide(self, field: str, symbols=None) -> pd.DataFrame:
        if not self.panel.has_field(field):
            return pd.DataFrame()
        return self.panel.wide(field, symbols=symbols)

    def growth_wide(self, feature: str, freq: str = "daily", symbols=None) -> pd.DataFrame:
        """Per-token log growth of a network field; weekly/monthly by summing daily growths."""
        field = GROWTH_FIELDS[feature]
        symbols = symbols if symbols is not None else self.entities(field, "all")
        cols = {}
        for s in symbols:
            g = log_growth(self.panel.series(s, field)).values.rename(s)
            cols[s] = g if freq == "daily" else self._freq(g, freq, "growth")
        return pd.DataFrame(cols).sort_index()

    def averaged_growth(self, feature: str, freq: str) -> pd.Series:
        """Cross-sectional mean growth per date."""
        daily = self.growth_wide(feature, "daily").mean(axis=1, skipna=True).rename(feature)
        return daily if freq == "daily" else self._freq(daily, freq, "growth")

    def ratio_wide(self, freq: str, symbols=None) -> pd.DataFrame:
        symbols = symbols if symbols is not None else self.entities("tvl", "all")
        cols = {}
        for s in symbols:
            r = valuation_ratio(self.panel.series(s, "tvl"), self.panel.series(s, "market_cap")).values
            cols[s] = self._freq(r.rename(s), freq, "level")
        return pd.DataFrame(cols).sort_index()

    def entities(self, field: str, which: str) -> list[str]:
        have = set(self.panel.symbols_with(field)) & set(self.defi_symbols)
        if which == "major":
            return [s for s in self.major_symbols if s in have]
        return sorted(have)


# --- commands --------------------------------------------------------------------------


def cmd_build_index(pl: Pipeline) -> list:
    idx = pl.index
    frame = idx.to_frame()
    frame["date"] = frame["date"].dt.strftime("%Y-%m-%d")
    epochs = json.dumps(idx.history_json(), indent=2, sort_keys=True) + "\n"
    return [
        FileArtifact("index.csv", frame.to_csv(index=False, lineterminator="\n")),
        FileArtifact("epochs.json", epochs),
        FileArtifact("ingest_report.jsonl", pl.ingest_report()),
    ]


def _summary_row(panel: str, freq: str, variable: str, unit: str, series, sharpe: bool, scale: float = 1.0) -> dict:
    row = summary_stats(series, with_sharpe=sharpe).scaled(scale)
    return {"panel": panel, "frequency": freq, "variable": variable, "unit": unit, **row.as_dict()}


def cmd_summary(pl: Pipeline) -> list:
    rows, errors = [], []

    def attempt(where, fn):
        try:
            rows.append(fn())
        except DefixError as exc:
            errors.append(_err(where, exc))

    panel_a = [
        ("Address Count", "count/day", lambda: pl.field_wide("address_count", pl.entities("address_count", "all")).mean(axis=1)),
        ("Transaction Count", "count/day", lambda: pl.field_wide("transaction_count", pl.entities("transaction_count", "all")).mean(axis=1)),
        ("TVL", "USD", lambda: pl.field_wide("tvl", pl.entities("tvl", "all")).mean(axis=1)),
        ("Δ Address Count", "log difference", lambda: pl.averaged_growth("d_address", "daily")),
        ("Δ Transaction Count", "log difference", lambda: pl.averaged_growth("d_transaction", "daily")),
        ("Δ TVL", "log difference", lambda: pl.averaged_growth("d_tvl", "daily")),
    ]
    for name, unit, get in panel_a:
        attempt(f"A/daily/{name}", lambda name=name, unit=unit, get=get: _summary_row("A", "daily", name, unit, get(), False))

    for term in pl.config.attention_terms:
        attempt(
            f"B/weekly/{term}",
            lambda term=term: _summary_row("B", "weekly", f'"{term}" search', "index 0-100", pl.attention[term], False),
        )

    names = [("DeFiX", "DeFiX"), ("CRIX", pl.benchmark("crix")), ("BTC", pl.benchmark("btc")), ("ETH", pl.benchmark("eth"))]
    for freq in ("daily", "weekly", "monthly"):
        for label, sym in names:
            attempt(
                f"C/{freq}/{label}",
                lambda freq=freq, label=label, sym=sym: _summary_row(
                    "C", freq, label, "percent", pl.returns(sym, freq), True, scale=100.0
                ),
            )
    frame = conform("t1", rows)
    return [TableArtifact("t1", frame, render_summary(frame, errors), errors)]


def _correlation_table(table_id: str, data: pd.DataFrame) -> TableArtifact:
    labels = list(data.columns)
    try:
        cm = pearson_matrix(data)
    except DefixError as exc:
        errors = [_err(table_id, exc)]
        frame = conform(table_id, [])
        return TableArtifact(table_id, frame, render_correlation(table_id, frame, labels, errors), errors)
    rows = [
        {"row": cm.labels[a], "col": cm.labels[b], "r": float(cm.r[a, b]), "p": float(cm.p[a, b]),
         "stars": cm.stars[a][b], "n": int(cm.n[a, b])}
        for a in range(len(labels))
        for b in range(a + 1)
    ]
    frame = conform(table_id, rows)
    return TableArtifact(table_id, frame, render_correlation(table_id, frame, labels), [])


def cmd_correlations(pl: Pipeline) -> list:
    out = []
    try:
        crypto = pd.concat(
            [
                pl.returns("DeFiX", "weekly").rename("DeFiX"),
                pl.returns(pl.benchmark("eth"), "weekly").rename("Rt_ETH"),
                pl.returns(pl.benchmark("btc"), "weekly").rename("Rt_BTC"),
                pl.returns(pl.benchmark("crix"), "weekly").rename("CRIX"),
            ],
            axis=1,
        )
        out.append(_correlation_table("t2", crypto))
    except DefixError as exc:
        out.append(_failed_correlation("t2", ["DeFiX", "Rt_ETH", "Rt_BTC", "CRIX"], exc))
    labels = ["d_transaction", "d_address", "d_tvl"]
    try:
        network = pd.concat([pl.averaged_growth(f, "weekly") for f in labels], axis=1)
        out.append(_correlation_table("t6", network))
    except DefixError as exc:
        out.append(_failed_correlation("t6", labels, exc))
    return out


def _failed_correlation(table_id, labels, exc) -> TableArtifact:
    errors = [_err(table_id, exc)]
    frame = conform(table_id, [])
    return TableArtifact(table_id, frame, render_correlation(table_id, frame, labels, errors), errors)


def _regression_table(table_id: str, fits) -> TableArtifact:
    rows, errors = [], []
    for label, fn in fits:
        try:
            rows.extend(regression_rows(label, fn()))
        except DefixError as exc:
            errors.append(_err(f"{table_id}/{label}", exc))
    frame = conform(table_id, rows)
    return TableArtifact(table_id, frame, render_regressions(table_id, frame, errors), errors)


def _lagged_fit(y: pd.Series, x, lags):
    ys, X = lagged_design(y, x, lags)
    return ols(ys, X)


def cmd_lagged_regressions(pl: Pipeline, predictor: str = "btc") -> list:
    if predictor not in PREDICTORS:
        raise ValueError(f"predictor must be one of {PREDICTORS}")
    table_id = PREDICTOR_TABLES[predictor]
    sym = pl.benchmark(predictor)
    lags = pl.config.lags_crypto

    def fit(dep):
        return lambda: _lagged_fit(pl.returns(dep, "weekly"), pl.returns(sym, "weekly").rename(predictor.upper()), lags)

    fits = [(dep, fit(dep)) for dep in ["DeFiX", *pl.major_symbols]]
    return [_regression_table(table_id, fits)]


def _network_exposure(pl: Pipeline, features: list[str]):
    y = pl.returns("DeFiX", "weekly")
    X = pd.concat([pl.averaged_growth(f, "weekly") for f in features], axis=1)
    data = pd.concat([y.rename("__y__"), X], axis=1, join="inner").dropna()
    return ols(data["__y__"], data[features])


def _panel_table(table_id: str, y: pd.DataFrame, x: pd.DataFrame, lags, label: str) -> TableArtifact:
    errors, res = [], None
    rows = []
    try:
        if y.empty or x.empty:
            raise DefixError("no entities with data")
        design = panel_lag_design(y, x, lags, label=label)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = panel_ols_time_effects(design, "y")
        rows = regression_rows("panel", res)
    except DefixError as exc:
        errors.append(_err(table_id, exc))
        res = None
    frame = conform(table_id, rows)
    return TableArtifact(table_id, frame, render_panel(table_id, frame, res, errors), errors)


def cmd_network_suite(pl: Pipeline) -> list:
    fits = [
        ("(7)", lambda: _network_exposure(pl, ["d_transaction"])),
        ("(8)", lambda: _network_exposure(pl, ["d_address"])),
        ("(9)", lambda: _network_exposure(pl, ["d_tvl"])),
        ("(10)", lambda: _network_exposure(pl, ["d_transaction", "d_address", "d_tvl"])),
    ]
    out = [_regression_table("t7", fits)]
    for table_id, field, feature, which in NETWORK_PANELS:
        ents = pl.entities(field, which)
        y = pl.returns_wide(ents, "weekly")
        x = pl.growth_wide(feature, "weekly", ents)
        out.append(_panel_table(table_id, y, x, pl.config.lags_network, feature))
    return out


def cmd_attention(pl: Pipeline) -> list:
    lags = pl.config.lags_attention

    def fit(dep):
        return lambda: _lagged_fit(pl.returns(dep, "weekly"), pl.attention, lags)

    return [_regression_table("t14", [(dep, fit(dep)) for dep in ["DeFiX", *pl.major_symbols]])]


def cmd_valuation(pl: Pipeline, frequency: str = "weekly") -> list:
    if frequency not in VALUATION_TABLES:
        raise ValueError("frequency must be weekly or monthly")
    out = []
    for table_id, which in zip(VALUATION_TABLES[frequency], ("all", "major")):
        ents = pl.entities("tvl", which)
        y = pl.returns_wide(ents, frequency)
        x = pl.ratio_wide(frequency, ents)
        out.append(_panel_table(table_id, y, x, pl.config.lags_valuation, "val_ratio"))
    out.extend(_fig2(pl))
    return out


def _fig2(pl: Pipeline) -> list:
    ents = pl.entities("tvl", "all")
    errors, rows, fit_rows = [], [], []
    try:
        fit, cloud = loglog_fit(pl.field_wide("tvl", ents), pl.field_wide("market_cap", ents))
        cloud = cloud.assign(date=cloud["date"].dt.strftime("%Y-%m-%d"), n=len(cloud))
        rows = cloud.to_dict("records")
        fit_rows = regression_rows("ln_mcap", fit)
    except DefixError as exc:
        errors.append(_err("fig2", exc))
    scatter = conform("fig2", rows)
    fit_frame = conform("fig2_fit", fit_rows)
    text = f"fig2: log TVL vs log market cap, {len(scatter)} points\n" + "".join(f"FAILED: {e}\n" for e in errors)
    return [
        TableArtifact("fig2", scatter, text, errors),
        TableArtifact("fig2_fit", fit_frame, render_regressions("fig2_fit", fit_frame, errors), list(errors)),
    ]


def cmd_cumulative(pl: Pipeline) -> list:
    errors, rows = [], []
    try:
        daily = pd.concat(
            [
                pl.daily_returns("DeFiX").rename("cumret_defix"),
                pl.daily_returns(pl.benchmark("btc")).rename("cumret_btc"),
                pl.daily_returns(pl.benchmark("eth")).rename("cumret_eth"),
                pl.daily_returns(pl.benchmark("crix")).rename("cumret_crix"),
            ],
            axis=1,
            join="inner",
        ).dropna()
        cum = daily.apply(cumulative_returns)
        cum.insert(0, "date", cum.index.strftime("%Y-%m-%d"))
        cum.insert(0, "n", len(cum))
        rows = cum.to_dict("records")
    except DefixError as exc:
        errors.append(_err("fig1", exc))
    frame = conform("fig1", rows)
    text = f"fig1: cumulative daily returns over {len(frame)} common dates\n" + "".join(f"FAILED: {e}\n" for e in errors)
    return [TableArtifact("fig1", frame, text, errors)]


def cmd_features(pl: Pipeline) -> list:
    feats = {name: pl.growth_wide(name, "daily") for name in GROWTH_FIELDS}
    feats["val_ratio"] = pl.ratio_wide("daily")
    out = export_features(feats)
    out["date"] = pd.to_datetime(out["date"]).dt.strftime("%Y-%m-%d")
    return [FileArtifact("features.csv", out.to_csv(index=False, lineterminator="\n"))]


COMMANDS = {
    "build-index": lambda pl, **kw: cmd_build_index(pl),
    "summary": lambda pl, **kw: cmd_summary(pl),
    "correlations": lambda pl, **kw: cmd_correlations(pl),
    "lagged-regressions": lambda pl, predictor="btc", **kw: cmd_lagged_regressions(pl, predictor),
    "network-suite": lambda pl, **kw: cmd_network_suite(pl),
    "attention": lambda pl, **kw: cmd_attention(pl),
    "valuation": lambda pl, frequency="weekly", **kw: cmd_valuation(pl, frequency),
    "cumulative": lambda pl, **kw: cmd_cumulative(pl),
    "features": lambda pl, **kw: cmd_features(pl),
}


def run_all(pl: Pipeline) -> list:
    out = []
    out += cmd_build_index(pl)
    out += cmd_summary(pl)
    out += cmd_correlations(pl)
    for p in PREDICTORS:
        out += cmd_lagged_regressions(pl, p)
    out += cmd_network_suite(pl)
    out += cmd_attention(pl)
    out += cmd_valuation(pl, "weekly")
    out += cmd_valuation(pl, "monthly")
    out += cmd_cumulative(pl)
    out += cmd_features(pl)
    return out


# --- output -------------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_artifacts(pl: Pipeline, artifacts: list, out_dir: Path, command: str, failures: list[str] = ()) -> dict:
    """Write artifacts, then atomically rewrite manifest.json. Returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.json"
    if manifest_path.exists():
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    else:
        manifest = {"artifacts": {}, "tables": {}, "commands": [], "failures": []}

    written: list[Path] = []
    for art in artifacts:
        if isinstance(art, TableArtifact):
            written += art.write(out_dir)
            manifest["tables"][art.table_id] = {
                "status": "ok" if not art.errors else ("failed" if art.frame.empty else "partial"),
                "n": art.n,
                "rows": len(art.frame),
                "errors": list(art.errors),
            }
        else:
            path = out_dir / art.name
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(art.content)
            written.append(path)
    for path in written:
        manifest["artifacts"][path.name] = _sha256(path)

    cfg = pl.config
    manifest["version"] = __version__
    manifest["config"] = cfg.echo
    manifest["inputs"] = {
        key: {"file": cfg.echo.get("inputs", {}).get(key, path.name), "sha256": _sha256(path)}
        for key, path in sorted(cfg.inputs.items())
    }
    if command not in manifest["commands"]:
        manifest["commands"].append(command)
    refreshed = {a.table_id for a in artifacts if isinstance(a, TableArtifact)}
    kept = {f for f in manifest.get("failures", []) if f.split("/")[0].split(":")[0] not in refreshed}
    fresh = {e for a in artifacts if isinstance(a, TableArtifact) for e in a.errors}
    manifest["failures"] = sorted(kept | fresh | set(failures))
    manifest["notes"] = sorted(set(manifest.get("notes", [])) | set(pl.notes))
    manifest["artifacts"] = dict(sorted(manifest["artifacts"].items()))
    manifest["tables"] = dict(sorted(manifest["tables"].items()))

    tmp = manifest_path.with_suffix(".json.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    os.replace(tmp, manifest_path)
    return manifest


def any_failed(artifacts: list) -> bool:
    return any(isinstance(a, TableArtifact) and a.errors for a in artifacts)
