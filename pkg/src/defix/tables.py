"""Column schemas of every emitted table and their text renderings."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats as sps

from . import __version__
from .econometrics import PanelResult, RegressionResult, significance_stars
from .stats import fmt3

REGRESSION_COLUMNS = (
    "table_id", "version", "row", "term", "coef", "se", "t", "p", "stars",
    "ci_low", "ci_high", "r2", "r2_between", "n",
)
SUMMARY_COLUMNS = (
    "table_id", "version", "panel", "frequency", "variable", "unit", "n",
    "mean", "sd", "max", "min", "skewness", "kurtosis", "durbin_watson", "sharpe",
)
CORRELATION_COLUMNS = ("table_id", "version", "row", "col", "r", "p", "stars", "n")
FIG1_COLUMNS = ("table_id", "version", "n", "date", "cumret_defix", "cumret_btc", "cumret_eth", "cumret_crix")
FIG2_COLUMNS = ("table_id", "version", "n", "symbol", "date", "ln_tvl", "ln_mcap")

TABLE_SCHEMAS: dict[str, tuple[str, ...]] = {
    "t1": SUMMARY_COLUMNS,
    "t2": CORRELATION_COLUMNS,
    "t6": CORRELATION_COLUMNS,
    "fig1": FIG1_COLUMNS,
    "fig2": FIG2_COLUMNS,
    **{tid: REGRESSION_COLUMNS for tid in (
        "t3", "t4", "t5", "t7", "t8", "t9", "t10", "t11", "t12", "t13",
        "t14", "t15", "t16", "d1", "d2", "fig2_fit",
    )},
}

TITLES = {
    "t1": "Summary statistics",
    "t2": "Pearson correlation, crypto market vs DeFi market (weekly returns)",
    "t3": "Predicting power of BTC on DeFiX and DeFi token returns",
    "t4": "Predicting power of ETH on DeFiX and DeFi token returns",
    "t5": "Predicting power of CRIX on DeFiX and DeFi token returns",
    "t6": "Pearson correlation among network growth variables (weekly)",
    "t7": "DeFiX weekly returns on network growth variables",
    "t8": "Panel OLS, token returns on lagged TVL growth (all tokens with TVL)",
    "t9": "Panel OLS, token returns on lagged TVL growth (major tokens)",
    "t10": "Panel OLS, token returns on lagged transaction growth (all tokens with network data)",
    "t11": "Panel OLS, token returns on lagged transaction growth (major tokens)",
    "t12": "Panel OLS, token returns on lagged address growth (all tokens with network data)",
    "t13": "Panel OLS, token returns on lagged address growth (major tokens)",
    "t14": "Predicting power of search attention",
    "t15": "TVL-to-market ratio, weekly panel (all tokens with TVL)",
    "t16": "TVL-to-market ratio, weekly panel (major tokens)",
    "d1": "TVL-to-market ratio, monthly panel (all tokens with TVL)",
    "d2": "TVL-to-market ratio, monthly panel (major tokens)",
    "fig1": "Cumulative daily returns",
    "fig2": "log TVL vs log market cap (scatter)",
    "fig2_fit": "log market cap on log TVL",
}


@dataclass
class TableArtifact:
    table_id: str
    frame: pd.DataFrame
    text: str
    errors: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.frame["n"].max()) if len(self.frame) else 0

    def write(self, out_dir: Path) -> list[Path]:
        csv_path = out_dir / f"{self.table_id}.csv"
        txt_path = out_dir / f"{self.table_id}.txt"
        self.frame.to_csv(csv_path, index=False, lineterminator="\n")
        with open(txt_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text)
            if not self.text.endswith("\n"):
                fh.write("\n")
        return [csv_path, txt_path]


def conform(table_id: str, rows: list[dict]) -> pd.DataFrame:
    cols = TABLE_SCHEMAS[table_id]
    df = pd.DataFrame(rows, columns=[c for c in cols if c not in ("table_id", "version")])
    df.insert(0, "table_id", table_id)
    df.insert(1, "version", __version__)
    return df[list(cols)]


# --- regression rows --------------------------------------------------------------


def regression_rows(row: str, res: RegressionResult) -> list[dict]:
    if isinstance(res, PanelResult):
        lo, hi = res.ci_low, res.ci_high
        r2b = res.r2_between
    else:
        tcrit = sps.t.ppf(0.975, res.df_resid)
        lo, hi = res.coef - tcrit * res.se, res.coef + tcrit * res.se
        r2b = np.nan
    return [
        {
            "row": row,
            "term": name,
            "coef": float(res.coef[j]),
            "se": float(res.se[j]),
            "t": float(res.t[j]),
            "p": float(res.p[j]),
            "stars": significance_stars(res.p[j]),
            "ci_low": float(lo[j]),
            "ci_high": float(hi[j]),
            "r2": float(res.r2),
            "r2_between": float(r2b),
            "n": int(res.n),
        }
        for j, name in enumerate(res.names)
    ]


def _cell(coef: float, t: float, stars: str) -> str:
    return f"{coef:.4f}{stars} ({t:.3f})"


def render_regressions(table_id: str, frame: pd.DataFrame, errors: list[str] = ()) -> str:
    """Wide layout: one line per dependent series, coefficient with stars and (t)."""
    lines = [f"{table_id}: {TITLES.get(table_id, '')}", ""]
    if frame.empty:
        lines.append("(no rows)")
    else:
        terms = list(dict.fromkeys(frame["term"]))
        rows = list(dict.fromkeys(frame["row"]))
        header = ["", *terms, "R2", "n"]
        body = []
        for r in rows:
            sub = frame[frame["row"] == r].set_index("term")
            cells = [r]
            for term in terms:
                cells.append(_cell(sub.at[term, "coef"], sub.at[term, "t"], sub.at[term, "stars"]) if term in sub.index else "")
            cells.append(f"{100 * sub['r2'].iloc[0]:.1f}%")
            cells.append(str(int(sub["n"].iloc[0])))
            body.append(cells)
        lines.extend(_align([header, *body]))
        lines.append("")
        lines.append("t-statistics in parentheses; * p<=0.10, ** p<=0.05, *** p<=0.01.")
    lines.extend(f"FAILED: {e}" for e in errors)
    return "\n".join(lines) + "\n"


def render_panel(table_id: str, frame: pd.DataFrame, res: PanelResult | None, errors: list[str] = ()) -> str:
    lines = [f"{table_id}: {TITLES.get(table_id, '')}", ""]
    if res is None or frame.empty:
        lines.append("(not estimated)")
    else:
        header = ["", "Parameter", "Std. Err.", "T-stat", "P-value", "Lower CI", "Upper CI"]
        body = [
            [
                r.term,
                f"{r.coef:.4f}{r.stars}",
                f"{r.se:.4f}",
                f"{r.t:.4f}",
                f"{r.p:.4f}",
                f"{r.ci_low:.4f}",
                f"{r.ci_high:.4f}",
            ]
            for r in frame.itertuples()
        ]
        lines.extend(_align([header, *body]))
        lines.append("")
        r2b = "n/a" if not np.isfinite(res.r2_between) else f"{100 * res.r2_between:.2f}%"
        lines.append(
            f"R2 is {100 * res.r2:.2f}%, R2 between is {r2b}. Time effects included "
            f"({res.n_time_effects} period dummies). Entities: {res.n_entities}. Observations: {res.n}."
        )
    lines.extend(f"FAILED: {e}" for e in errors)
    return "\n".join(lines) + "\n"


def render_correlation(table_id: str, frame: pd.DataFrame, labels: list[str], errors: list[str] = ()) -> str:
    lines = [f"{table_id}: {TITLES.get(table_id, '')}", ""]
    if frame.empty:
        lines.append("(not estimated)")
    else:
        cell = {(r.row, r.col): (r.r, r.stars) for r in frame.itertuples()}
        body = [["", *labels]]
        for a in labels:
            cells = [a]
            for b in labels:
                if (a, b) in cell:
                    r, s = cell[(a, b)]
                    cells.append("1" if a == b else f"{r:.3f}{s}")
                else:
                    cells.append("")
            body.append(cells)
        lines.extend(_align(body))
        lines.append("")
        lines.append(f"Pairwise-complete observations: {int(frame['n'].max())} max. * p<=0.10, ** p<=0.05, *** p<=0.01.")
    lines.extend(f"FAILED: {e}" for e in errors)
    return "\n".join(lines) + "\n"


def render_summary(frame: pd.DataFrame, errors: list[str] = ()) -> str:
    lines = ["t1: Summary statistics", ""]
    for panel, cols in (
        ("A", ["mean", "sd", "max", "min", "skewness", "kurtosis", "durbin_watson"]),
        ("B", ["mean", "sd", "max", "min", "skewness", "kurtosis", "durbin_watson"]),
        ("C", ["mean", "sd", "sharpe", "skewness", "kurtosis", "durbin_watson"]),
    ):
        sub = frame[frame["panel"] == panel]
        if sub.empty:
            continue
        header = [f"Panel {panel}", "", *[c.replace("_", "-").title() for c in cols], "n"]
        body = []
        last_freq = None
        for r in sub.itertuples():
            freq = r.frequency.title() if r.frequency != last_freq else ""
            last_freq = r.frequency
            body.append([freq, r.variable, *[fmt3(getattr(r, c)) for c in cols], str(r.n)])
        lines.extend(_align([header, *body]))
        units = sorted(set(sub["unit"]))
        lines.append(f"units: {', '.join(units)}")
        lines.append("")
    lines.extend(f"FAILED: {e}" for e in errors)
    return "\n".join(lines) + "\n"


def _align(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    out = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        out.append("  ".join(cells).rstrip())
    return out
