"""Correlation, lag construction, OLS and pooled panel OLS with time effects.

All inference is classical (homoskedastic): sigma^2 = RSS / (n - k),
Var(b) = sigma^2 (X'X)^-1, two-sided Student-t p-values with n - k degrees
of freedom.  Least squares is solved through a Householder QR factorization;
a column whose |R_jj| falls below 1e-10 times the largest column norm is
treated as linearly dependent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import linalg
from scipy import stats as sps

from .errors import RankDeficient, SeriesTooShort, TooFewEntities, TooFewObservations, ZeroVariance

RANK_TOL = 1e-10


def significance_stars(p: float) -> str:
    """``***`` at 1%, ``**`` at 5%, ``*`` at 10%; thresholds are inclusive."""
    if p is None or not np.isfinite(p):
        return ""
    if p <= 0.01:
        return "***"
    if p <= 0.05:
        return "**"
    if p <= 0.10:
        return "*"
    return ""


@dataclass
class RegressionResult:
    names: list[str]
    coef: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    r2: float
    n: int
    df_resid: int
    residuals: np.ndarray = field(repr=False, default=None)
    fitted: np.ndarray = field(repr=False, default=None)

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def stars(self) -> list[str]:
        return [significance_stars(p) for p in self.p]

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"coef": self.coef, "se": self.se, "t": self.t, "p": self.p, "stars": self.stars()},
            index=pd.Index(self.names, name="term"),
        )


@dataclass
class PanelResult(RegressionResult):
    ci_low: np.ndarray = None
    ci_high: np.ndarray = None
    r2_between: float = float("nan")
    n_entities: int = 0
    n_periods: int = 0
    n_time_effects: int = 0

    def table(self) -> pd.DataFrame:
        df = super().table()
        df["ci_low"] = self.ci_low
        df["ci_high"] = self.ci_high
        return df


# --- least squares core ---------------------------------------------------------


def _qr_solve(X: np.ndarray, y: np.ndarray, names: Sequence[str]):
    """Coefficients and (X'X)^-1 via QR; raises RankDeficient naming the offending column."""
    n, k = X.shape
    norms = np.linalg.norm(X, axis=0)
    scale = norms.max() if k else 0.0
    if k == 0 or scale == 0:
        raise RankDeficient("design matrix has no non-zero column")
    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    dependent = np.flatnonzero(diag <= RANK_TOL * scale)
    if dependent.size:
        bad = ", ".join(str(names[j]) for j in dependent)
        raise RankDeficient(f"design is rank deficient; dependent column(s): {bad}")
    beta = linalg.solve_triangular(R, Q.T @ y)
    Rinv = linalg.solve_triangular(R, np.eye(k))
    xtx_inv = Rinv @ Rinv.T
    return beta, xtx_inv


def ols(y, X, names: Sequence[str] | None = None, intercept: bool = True) -> RegressionResult:
    """OLS of ``y`` on ``X`` (plus a leading ``const`` column when ``intercept``)."""
    if isinstance(X, pd.Series):
        X = X.to_frame()
    if names is None:
        names = [str(c) for c in X.columns] if isinstance(X, pd.DataFrame) else [f"x{j + 1}" for j in range(np.shape(X)[1] if np.ndim(X) > 1 else 1)]
    yv = np.asarray(y, dtype=float).ravel()
    Xv = np.asarray(X, dtype=float)
    if Xv.ndim == 1:
        Xv = Xv[:, None]
    if Xv.shape[0] != yv.shape[0]:
        raise ValueError("y and X have different lengths")
    names = list(names)
    if intercept:
        Xv = np.column_stack([np.ones(len(yv)), Xv])
        names = ["const", *names]
    n, k = Xv.shape
    if n - k < 1:
        raise TooFewObservations(f"need n > k; got n={n}, k={k}")
    if not (np.all(np.isfinite(yv)) and np.all(np.isfinite(Xv))):
        raise ValueError("ols input contains missing or non-finite values")
    beta, xtx_inv = _qr_solve(Xv, yv, names)
    return _finish(yv, Xv, beta, xtx_inv, names, intercept)


def _finish(yv, Xv, beta, xtx_inv, names, intercept) -> RegressionResult:
    n, k = Xv.shape
    fitted = Xv @ beta
    resid = yv - fitted
    rss = float(resid @ resid)
    df = n - k
    sigma2 = rss / df
    se = np.sqrt(np.maximum(np.diag(xtx_inv) * sigma2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.nan)
    p = 2.0 * sps.t.sf(np.abs(t), df)
    if np.ptp(yv) == 0:
        r2 = 0.0
    else:
        centre = yv.mean() if intercept else 0.0
        tss = float(np.sum((yv - centre) ** 2))
        r2 = 1.0 - rss / tss
    return RegressionResult(
        names=list(names), coef=beta, se=se, t=t, p=p, r2=r2, n=n, df_resid=df, residuals=resid, fitted=fitted
    )


# --- lags ------------------------------------------------------------------------


def make_lags(series, lags: Iterable[int]) -> pd.DataFrame:
    """Lagged copies of a regular (bucket-indexed) series or frame.

    Column ``"{name}(t-l)"`` at position t holds the value l buckets earlier.
    Rows are not dropped here; see :func:`lagged_design` for listwise deletion.
    """
    lags = list(lags)
    if not lags or any(int(l) != l or l < 1 for l in lags):
        raise ValueError("lags must be a non-empty list of positive integers")
    frame = series.to_frame() if isinstance(series, pd.Series) else pd.DataFrame(series)
    if max(lags) >= len(frame):
        raise SeriesTooShort(f"lag {max(lags)} needs more than {len(frame)} observations")
    cols = {}
    for name in frame.columns:
        for l in lags:
            cols[f"{name}(t-{l})"] = frame[name].shift(l)
    return pd.DataFrame(cols, index=frame.index)


def lagged_design(y: pd.Series, x, lags: Iterable[int]) -> tuple[pd.Series, pd.DataFrame]:
    """Align ``y_t`` with lags of ``x`` on y's index and drop incomplete rows."""
    X = make_lags(x, lags)
    joined = pd.concat([y.rename("__y__"), X], axis=1, join="inner").dropna()
    if joined.empty:
        raise TooFewObservations("no complete rows after lagging")
    return joined["__y__"].rename(y.name), joined.drop(columns="__y__")


# --- correlations -------------------------------------------------------------------


@dataclass
class CorrMatrix:
    labels: list[str]
    r: np.ndarray
    p: np.ndarray
    n: np.ndarray
    stars: list[list[str]]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.r, index=self.labels, columns=self.labels)


def pearson_pvalue(r: float, n: int) -> float:
    """Two-sided p-value of t = r sqrt(n-2) / sqrt(1-r^2) with n-2 df."""
    if n < 3:
        raise TooFewObservations("pearson significance needs n >= 3")
    if abs(r) >= 1.0:
        return 0.0
    t = r * np.sqrt(n - 2) / np.sqrt(1.0 - r * r)
    return float(2.0 * sps.t.sf(abs(t), n - 2))


def pearson_matrix(columns: pd.DataFrame) -> CorrMatrix:
    """Pairwise-complete Pearson correlations with significance stars."""
    labels = [str(c) for c in columns.columns]
    data = columns.to_numpy(dtype=float)
    k = len(labels)
    r = np.eye(k)
    p = np.zeros((k, k))
    n = np.zeros((k, k), dtype=int)
    for j in range(k):
        col = data[:, j]
        fin = col[np.isfinite(col)]
        n[j, j] = len(fin)
        if len(fin) and np.ptp(fin) == 0:
            raise ZeroVariance(f"column {labels[j]!r} is constant")
    for a in range(k):
        for b in range(a + 1, k):
            mask = np.isfinite(data[:, a]) & np.isfinite(data[:, b])
            m = int(mask.sum())
            if m < 3:
                raise TooFewObservations(f"{labels[a]}/{labels[b]}: only {m} paired observations")
            xa = data[mask, a] - data[mask, a].mean()
            xb = data[mask, b] - data[mask, b].mean()
            denom = np.sqrt((xa @ xa) * (xb @ xb))
            if denom == 0:
                raise ZeroVariance(f"{labels[a]}/{labels[b]}: zero variance on the paired sample")
            rab = float(np.clip((xa @ xb) / denom, -1.0, 1.0))
            r[a, b] = r[b, a] = rab
            p[a, b] = p[b, a] = pearson_pvalue(rab, m)
            n[a, b] = n[b, a] = m
    stars = [["" if a == b else significance_stars(p[a, b]) for b in range(k)] for a in range(k)]
    return CorrMatrix(labels, r, p, n, stars)


# --- pooled panel with time effects --------------------------------------------------


def panel_lag_design(y: pd.DataFrame, x: pd.DataFrame, lags: Iterable[int], label: str = "x") -> pd.DataFrame:
    """Stack wide (time x entity) outcome and regressor tables into a long design.

    Lags are taken within each entity along the time index; rows with any
    missing value are dropped.  Returns columns ``y`` and ``label(t-l)``
    indexed by (entity, time).
    """
    lags = list(lags)
    entities = sorted(set(y.columns) & set(x.columns))
    index = y.index.union(x.index).sort_values()
    parts = []
    for ent in entities:
        xs = x[ent].reindex(index).rename(label)
        if max(lags) >= len(xs):
            continue
        block = make_lags(xs, lags)
        block.insert(0, "y", y[ent].reindex(index))
        block["entity"] = ent
        parts.append(block)
    if not parts:
        raise TooFewObservations("no entity has enough observations for the requested lags")
    long = pd.concat(parts)
    long.index.name = "time"
    long = long.reset_index().set_index(["entity", "time"]).sort_index()
    return long.dropna()


def time_dummies(times: pd.Index) -> tuple[np.ndarray, list]:
    """One indicator per period present, first period omitted."""
    periods = sorted(pd.unique(times))
    codes = pd.Index(periods).get_indexer(times)
    D = np.zeros((len(times), max(len(periods) - 1, 0)))
    rows = np.flatnonzero(codes > 0)
    D[rows, codes[rows] - 1] = 1.0
    return D, periods


def panel_ols_time_effects(design: pd.DataFrame, y_col: str = "y", x_cols: Sequence[str] | None = None) -> PanelResult:
    """Pooled OLS of ``y`` on [const, x_cols, time dummies].

    ``design`` is indexed by (entity, time).  Only const and the x columns
    are reported; the time dummies are absorbed.  ``r2`` is that of the full
    fitted model; ``r2_between`` is the squared correlation between
    entity-mean fitted values and entity-mean outcomes.
    """
    if x_cols is None:
        x_cols = [c for c in design.columns if c != y_col]
    x_cols = list(x_cols)
    data = design[[y_col, *x_cols]].dropna()
    entities = data.index.get_level_values(0)
    times = data.index.get_level_values(1)
    n_entities = entities.nunique()
    if n_entities < 2:
        raise TooFewEntities(f"panel needs >= 2 entities, got {n_entities}")

    yv = data[y_col].to_numpy(dtype=float)
    Xr = data[x_cols].to_numpy(dtype=float)
    D, periods = time_dummies(times)

    counts = pd.Series(times).value_counts()
    singletons = counts[counts == 1]
    if len(singletons):
        warnings.warn(
            f"{len(singletons)} period(s) have a single observation; their time effect absorbs it",
            RuntimeWarning,
            stacklevel=2,
        )

    # lag columns must vary within periods once time effects are removed
    period_codes = pd.Index(periods).get_indexer(times)
    demeaned = Xr - pd.DataFrame(Xr).groupby(period_codes).transform("mean").to_numpy()
    dn = np.linalg.norm(demeaned, axis=0)
    raw_n = np.linalg.norm(Xr, axis=0)
    flat = [x_cols[j] for j in range(len(x_cols)) if dn[j] <= RANK_TOL * max(raw_n[j], 1.0)]
    if flat:
        raise RankDeficient(f"regressor(s) collinear with the time effects: {', '.join(flat)}")

    names = ["const", *x_cols] + [f"time[{p}]" for p in periods[1:]]
    X = np.column_stack([np.ones(len(yv)), Xr, D])
    n, k = X.shape
    if n - k < 1:
        raise TooFewObservations(f"need n > k; got n={n}, k={k}")
    beta, xtx_inv = _qr_solve(X, yv, names)
    full = _finish(yv, X, beta, xtx_inv, names, intercept=True)

    m = 1 + len(x_cols)
    tcrit = sps.t.ppf(0.975, full.df_resid)
    coef, se = full.coef[:m], full.se[:m]

    ent_means = pd.DataFrame({"y": yv, "f": full.fitted}).groupby(np.asarray(entities)).mean()
    if len(ent_means) >= 2 and np.ptp(ent_means["y"]) > 0 and np.ptp(ent_means["f"]) > 0:
        r2_between = float(np.corrcoef(ent_means["y"], ent_means["f"])[0, 1] ** 2)
    else:
        r2_between = float("nan")

    return PanelResult(
        names=names[:m],
        coef=coef,
        se=se,
        t=full.t[:m],
        p=full.p[:m],
        r2=full.r2,
        n=n,
        df_resid=full.df_resid,
        residuals=full.residuals,
        fitted=full.fitted,
        ci_low=coef - tcrit * se,
        ci_high=coef + tcrit * se,
        r2_between=r2_between,
        n_entities=int(n_entities),
        n_periods=len(periods),
        n_time_effects=len(periods) - 1,
    )
