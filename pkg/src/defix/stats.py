"""Returns, cumulative returns and descriptive statistics.

Moments are plain moment ratios with no small-sample correction:
skewness = m3 / m2**1.5 and kurtosis is the excess m4 / m2**2 - 3, where
m_k are central moments with divisor n.  The standard deviation is the
sample (n - 1) one.  Returns are fractions; percent only appears when a
caller renders them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .errors import NonPositiveLevel, TooFewObservations, ZeroVariance


@dataclass(frozen=True)
class SummaryRow:
    n: int
    mean: float
    sd: float
    max: float
    min: float
    skewness: float
    kurtosis: float
    durbin_watson: float
    sharpe: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)

    def scaled(self, factor: float) -> "SummaryRow":
        """Same statistics for the series multiplied by ``factor`` > 0 (e.g. 100 for percent)."""
        return SummaryRow(
            n=self.n,
            mean=self.mean * factor,
            sd=self.sd * factor,
            max=self.max * factor,
            min=self.min * factor,
            skewness=self.skewness,
            kurtosis=self.kurtosis,
            durbin_watson=self.durbin_watson,
            sharpe=self.sharpe,
        )


def _values(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    return x[np.isfinite(x)]


def simple_returns(levels: pd.Series) -> pd.Series:
    """r_t = P_t / P_{t-1} - 1 between consecutive observations."""
    s = pd.Series(levels, dtype=float).dropna()
    if len(s) < 2:
        raise TooFewObservations("need at least 2 levels to form a return")
    if (s <= 0).any():
        bad = s[s <= 0].index[0]
        raise NonPositiveLevel(f"non-positive level at {bad}")
    v = s.to_numpy()
    out = pd.Series(v[1:] / v[:-1] - 1.0, index=s.index[1:], name=s.name)
    return out


def cumulative_returns(returns: pd.Series) -> pd.Series:
    """c_t = prod_{s<=t} (1 + r_s) - 1."""
    r = pd.Series(returns, dtype=float)
    if r.empty:
        return r.copy()
    return (1.0 + r).cumprod() - 1.0


def durbin_watson(series) -> float:
    """sum (x_t - x_{t-1})^2 / sum (x_t - mean)^2 on the series itself."""
    x = _values(series)
    if len(x) < 2:
        raise TooFewObservations("durbin_watson needs at least 2 observations")
    dev = x - x.mean()
    denom = float(np.dot(dev, dev))
    if denom == 0 or np.ptp(x) == 0:
        raise ZeroVariance("durbin_watson undefined for a constant series")
    d = np.diff(x)
    return float(np.dot(d, d) / denom)


def sharpe(mean: float, sd: float) -> float:
    """Mean over standard deviation; zero risk-free rate, no annualization."""
    if not sd > 0:
        raise ZeroVariance("sharpe undefined for zero standard deviation")
    return mean / sd


def summary_stats(series, with_sharpe: bool = False) -> SummaryRow:
    x = _values(series)
    n = len(x)
    if n < 4:
        raise TooFewObservations(f"summary statistics need n >= 4, got {n}")
    if np.ptp(x) == 0:
        raise ZeroVariance("summary statistics undefined for a constant series")
    mean = float(x.mean())
    dev = x - mean
    m2 = float(np.mean(dev**2))
    m3 = float(np.mean(dev**3))
    m4 = float(np.mean(dev**4))
    sd = float(np.sqrt(np.sum(dev**2) / (n - 1)))
    return SummaryRow(
        n=n,
        mean=mean,
        sd=sd,
        max=float(x.max()),
        min=float(x.min()),
        skewness=m3 / m2**1.5,
        kurtosis=m4 / m2**2 - 3.0,
        durbin_watson=durbin_watson(x),
        sharpe=sharpe(mean, sd) if with_sharpe else None,
    )


def fmt3(value: float | None) -> str:
    """Three-decimal rendering used in summary tables."""
    if value is None or not np.isfinite(value):
        return ""
    return f"{value:.3f}"
