"""Run configuration read from an INI-style file.

Keys (all sections optional except ``[inputs]``)::

    [inputs]        prices, tvl, network, attention   (paths relative to the config file)
    [index]         min_mcap, reconstitution, target_count, lookback_days, base_value
    [benchmarks]    btc, eth, crix                    (symbols in prices.csv)
    [tokens]        major (comma list or "auto"), major_count, major_window_days
    [analysis]      week_start, lags_crypto, lags_network, lags_attention,
                    lags_valuation, attention_terms
    [output]        dir

The only environment override is ``OUTPUT_DIR``.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .index_engine import SCHEDULES, IndexConfig
from .market_data import DEFAULT_MIN_MCAP

MAJOR_TOKENS = (
    "LUNA", "AVAX", "WBTC", "UNI", "DAI", "LINK", "FTM", "XTZ",
    "AAVE", "GRT", "MKR", "CAKE", "RUNE", "CRV", "LRC",
)
DEFAULT_ATTENTION_TERMS = ("Decentralized finance", "DeFi")
INPUT_KEYS = ("prices", "tvl", "network", "attention")


@dataclass
class RunConfig:
    inputs: dict[str, Path]
    index: IndexConfig = field(default_factory=IndexConfig)
    benchmarks: dict[str, str] = field(default_factory=lambda: {"btc": "BTC", "eth": "ETH", "crix": "CRIX"})
    major: tuple[str, ...] | None = MAJOR_TOKENS  # None -> trailing average market-cap rule
    major_count: int = 15
    major_window_days: int = 100
    week_start: str = "sunday"
    lags_crypto: tuple[int, ...] = (1, 2)
    lags_network: tuple[int, ...] = (1, 2, 3, 4)
    lags_attention: tuple[int, ...] = (1, 2, 3)
    lags_valuation: tuple[int, ...] = (1, 2, 3, 4)
    attention_terms: tuple[str, ...] = DEFAULT_ATTENTION_TERMS
    output_dir: Path = Path("out")
    echo: dict[str, dict[str, str]] = field(default_factory=dict)

    def check_inputs(self) -> None:
        for key, path in self.inputs.items():
            if not path.is_file():
                raise ConfigError(f"input {key!r} not found: {path}")


def _lags(text: str, key: str) -> tuple[int, ...]:
    try:
        lags = tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigError(f"{key}: lags must be comma-separated integers, got {text!r}") from None
    if not lags:
        raise ConfigError(f"{key}: lag set must not be empty")
    if any(l < 1 for l in lags):
        raise ConfigError(f"{key}: lags must be positive")
    return lags


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def load_config(path: str | os.PathLike, check_paths: bool = True) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    cp.read(path, encoding="utf-8")
    base = path.resolve().parent

    if not cp.has_section("inputs"):
        raise ConfigError("config needs an [inputs] section")
    unknown = set(cp["inputs"]) - set(INPUT_KEYS)
    if unknown:
        raise ConfigError(f"unknown input key(s): {', '.join(sorted(unknown))}")
    missing = [k for k in INPUT_KEYS if not cp["inputs"].get(k)]
    if missing:
        raise ConfigError(f"missing input path(s): {', '.join(missing)}")
    inputs = {k: (base / cp["inputs"][k]).resolve() for k in INPUT_KEYS}

    sec = cp["index"] if cp.has_section("index") else {}
    try:
        min_mcap = float(sec.get("min_mcap", DEFAULT_MIN_MCAP))
        target = sec.get("target_count", "").strip()
        index = IndexConfig(
            min_mcap=min_mcap,
            target_count=int(target) if target else None,
            reconstitution=sec.get("reconstitution", "monthly").strip(),
            lookback_days=int(sec.get("lookback_days", 0)),
            base_value=float(sec.get("base_value", 1000.0)),
        )
    except ValueError as err:
        raise ConfigError(f"[index]: {err}") from None
    if index.reconstitution not in SCHEDULES:
        raise ConfigError(f"reconstitution must be one of {SCHEDULES}")

    cfg = RunConfig(inputs=inputs, index=index)
    if cp.has_section("benchmarks"):
        for key in ("btc", "eth", "crix"):
            if key in cp["benchmarks"]:
                cfg.benchmarks[key] = cp["benchmarks"][key].strip()
    cfg.index.exclude = tuple(cfg.benchmarks.values())

    if cp.has_section("tokens"):
        tok = cp["tokens"]
        major = tok.get("major", "").strip()
        if major.lower() == "auto":
            cfg.major = None
        elif major:
            cfg.major = _names(major)
        cfg.major_count = int(tok.get("major_count", cfg.major_count))
        cfg.major_window_days = int(tok.get("major_window_days", cfg.major_window_days))

    if cp.has_section("analysis"):
        an = cp["analysis"]
        cfg.week_start = an.get("week_start", cfg.week_start).strip().lower()
        if cfg.week_start not in ("sunday", "monday"):
            raise ConfigError("week_start must be sunday or monday")
        for key in ("lags_crypto", "lags_network", "lags_attention", "lags_valuation"):
            if key in an:
                setattr(cfg, key, _lags(an[key], key))
        if "attention_terms" in an:
            cfg.attention_terms = _names(an["attention_terms"])
            if len(cfg.attention_terms) != 2:
                raise ConfigError("attention_terms must name exactly two search terms")

    out = cp["output"].get("dir", "out") if cp.has_section("output") else "out"
    cfg.output_dir = (base / out).resolve()
    if os.environ.get("OUTPUT_DIR"):
        cfg.output_dir = Path(os.environ["OUTPUT_DIR"]).resolve()

    cfg.echo = {s: dict(cp[s]) for s in cp.sections()}
    if check_paths:
        cfg.check_inputs()
    return cfg
