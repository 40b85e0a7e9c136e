from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from defix.cli import main
from defix.config import MAJOR_TOKENS, load_config
from defix.econometrics import lagged_design, panel_lag_design
from defix.errors import ConfigError
from defix.fixture import FILES, fixture_dir, write_fixture
from defix.pipeline import Pipeline, cmd_attention, cmd_cumulative, cmd_lagged_regressions
from defix.stats import cumulative_returns


def test_shipped_fixture_matches_generator(tmp_path):
    write_fixture(tmp_path)
    for name in FILES:
        assert (tmp_path / name).read_bytes() == (fixture_dir() / name).read_bytes(), name


def test_config_defaults_and_overrides(fixture_copy, monkeypatch):
    cfg = load_config(fixture_copy / "defix.ini")
    assert cfg.major == MAJOR_TOKENS
    assert cfg.lags_network == (1, 2, 3, 4)
    assert cfg.index.exclude == ("BTC", "ETH", "CRIX")
    assert cfg.output_dir == (fixture_copy / "out").resolve()
    monkeypatch.setenv("OUTPUT_DIR", str(fixture_copy / "elsewhere"))
    assert load_config(fixture_copy / "defix.ini").output_dir == (fixture_copy / "elsewhere").resolve()


@pytest.mark.parametrize(
    "old,new",
    [
        ("min_mcap = 1000000", "min_mcap = 0"),
        ("lags_crypto = 1,2", "lags_crypto ="),
        ("lags_crypto = 1,2", "lags_crypto = 0,1"),
        ("prices = prices.csv", "prices = nowhere.csv"),
        ("reconstitution = monthly", "reconstitution = daily"),
    ],
)
def test_config_rejections(fixture_copy, old, new):
    ini = fixture_copy / "defix.ini"
    ini.write_text(ini.read_text().replace(old, new))
    with pytest.raises(ConfigError):
        load_config(ini)


def test_reported_n_equals_listwise_sample(fixture_pipeline, fixture_run):
    out, _, _ = fixture_run
    pl = fixture_pipeline
    t3 = pd.read_csv(out / "t3.csv")
    for dep in ["DeFiX", *pl.major_symbols]:
        ys, _ = lagged_design(pl.returns(dep, "weekly"), pl.returns("BTC", "weekly").rename("BTC"), [1, 2])
        assert set(t3.loc[t3["row"] == dep, "n"]) == {len(ys)}, dep
    t8 = pd.read_csv(out / "t8.csv")
    ents = pl.entities("tvl", "all")
    design = panel_lag_design(pl.returns_wide(ents, "weekly"), pl.growth_wide("d_tvl", "weekly", ents), [1, 2, 3, 4], "d_tvl")
    assert set(t8["n"]) == {len(design)}


def test_table_shapes(fixture_pipeline, fixture_run):
    out, _, _ = fixture_run
    rows = 1 + len(fixture_pipeline.major_symbols)
    t3 = pd.read_csv(out / "t3.csv")
    assert t3["row"].nunique() == rows
    assert list(dict.fromkeys(t3["term"])) == ["const", "BTC(t-1)", "BTC(t-2)"]
    t14 = pd.read_csv(out / "t14.csv")
    assert t14.groupby("row").size().eq(7).all()
    for tid in ("t8", "t9", "t10", "t11", "t12", "t13", "t15", "t16", "d1", "d2"):
        frame = pd.read_csv(out / f"{tid}.csv")
        assert len(frame) == 5, tid
    d1 = pd.read_csv(out / "d1.csv")
    t15 = pd.read_csv(out / "t15.csv")
    assert list(d1["term"]) == list(t15["term"])
    t7 = pd.read_csv(out / "t7.csv")
    assert list(dict.fromkeys(t7["row"])) == ["(7)", "(8)", "(9)", "(10)"]


def test_every_table_carries_id_n_version(fixture_run):
    out, artifacts, manifest = fixture_run
    for tid in manifest["tables"]:
        frame = pd.read_csv(out / f"{tid}.csv")
        assert {"table_id", "n", "version"} <= set(frame.columns)
        assert (frame["table_id"] == tid).all()
        assert (frame["version"] == manifest["version"]).all()


def test_manifest_content(fixture_run):
    out, _, manifest = fixture_run
    assert set(manifest["inputs"]) == {"prices", "tvl", "network", "attention"}
    assert manifest["config"]["index"]["reconstitution"] == "monthly"
    assert all(v["status"] == "ok" for v in manifest["tables"].values())
    assert manifest["failures"] == []
    assert str(out) not in (out / "manifest.json").read_text()


def test_fig1_is_cumulative_of_index_returns(fixture_pipeline, fixture_run):
    out, _, _ = fixture_run
    fig1 = pd.read_csv(out / "fig1.csv", parse_dates=["date"]).set_index("date")
    direct = cumulative_returns(fixture_pipeline.daily_returns("DeFiX").loc[fig1.index])
    np.testing.assert_allclose(fig1["cumret_defix"].to_numpy(), direct.to_numpy(), rtol=1e-12)


def test_index_csv_and_epochs(fixture_run):
    out, _, _ = fixture_run
    index = pd.read_csv(out / "index.csv")
    assert list(index.columns) == ["date", "level", "epoch_id"]
    epochs = json.loads((out / "epochs.json").read_text())
    assert all(len(e["members"]) % 5 == 0 for e in epochs)
    assert not {"BTC", "ETH", "CRIX"} & {m["symbol"] for e in epochs for m in e["members"]}


def test_ingest_report_lists_unmatched(fixture_run):
    out, _, _ = fixture_run
    events = [json.loads(line) for line in (out / "ingest_report.jsonl").read_text().splitlines()]
    unmatched = {e["kind"]: e["unmatched_symbols"] for e in events if e["event"] == "unmatched"}
    assert unmatched == {"tvl": ["GHOSTA", "GHOSTB"], "network": ["PHANTOM"]}


def test_cumulative_all_constant_levels_zero(fixture_pipeline, monkeypatch):
    pl = fixture_pipeline
    flat = pd.Series(0.0, index=pd.date_range("2021-01-01", periods=5))
    monkeypatch.setattr(Pipeline, "daily_returns", lambda self, sym: flat)
    art = cmd_cumulative(pl)[0]
    assert (art.frame[["cumret_defix", "cumret_btc", "cumret_eth", "cumret_crix"]] == 0).all().all()


def test_constant_attention_surfaces_rank_deficiency(fixture_config):
    pl = Pipeline(fixture_config)
    pl.attention  # load, then flatten
    pl.__dict__["attention"] = pl.attention * 0 + 50.0
    art = cmd_attention(pl)[0]
    assert art.errors and all("RankDeficient" in e for e in art.errors)
    assert art.frame.empty


def test_unknown_major_token_is_noted(fixture_config):
    cfg = load_config(fixture_dir() / "defix.ini")
    cfg.major = ("UNI", "NOPE", "AAVE")
    pl = Pipeline(cfg)
    art = cmd_lagged_regressions(pl, "eth")[0]
    assert list(dict.fromkeys(art.frame["row"])) == ["DeFiX", "UNI", "AAVE"]
    assert any("NOPE" in n for n in pl.notes)


def test_cli_single_command_and_manifest_merge(fixture_copy, tmp_path):
    out = tmp_path / "out"
    cfg = str(fixture_copy / "defix.ini")
    assert main(["correlations", "--config", cfg, "--out", str(out)]) == 0
    assert main(["lagged-regressions", "--config", cfg, "--out", str(out), "--predictor", "crix"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["tables"]) == {"t2", "t6", "t5"}
    assert manifest["commands"] == ["correlations", "lagged-regressions --predictor=crix"]
    assert not list(out.glob("*.tmp"))


def test_cli_exit_codes(fixture_copy, tmp_path, capsys):
    assert main(["summary", "--config", str(tmp_path / "missing.ini")]) == 2
    # a universe with fewer than five eligible tokens cannot form an index
    ini = fixture_copy / "defix.ini"
    ini.write_text(ini.read_text().replace("min_mcap = 1000000", "min_mcap = 1e15"))
    assert main(["build-index", "--config", str(ini), "--out", str(tmp_path / "o")]) == 2
    assert "InsufficientEligible" in capsys.readouterr().err


def test_cli_partial_failure_exit_one(fixture_copy, tmp_path):
    att = fixture_copy / "attention.csv"
    lines = att.read_text().splitlines()
    body = [l.rsplit(",", 1)[0] + ",40" for l in lines[1:]]
    att.write_text("\n".join([lines[0], *body]) + "\n")
    out = tmp_path / "out"
    assert main(["attention", "--config", str(fixture_copy / "defix.ini"), "--out", str(out)]) == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["tables"]["t14"]["status"] == "failed"
    assert manifest["failures"]
    assert (out / "t14.csv").exists() and (out / "t14.txt").exists()


def test_cli_bad_input_row_context(fixture_copy, tmp_path, capsys):
    prices = fixture_copy / "prices.csv"
    lines = prices.read_text().splitlines()
    lines[3] = lines[3].replace("2020-01-01", "2020-02-30")
    prices.write_text("\n".join(lines) + "\n")
    assert main(["build-index", "--config", str(fixture_copy / "defix.ini"), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "BadDate" in err and "row 3" in err


def test_cli_fixture_command(tmp_path):
    assert main(["fixture", str(tmp_path / "fx")]) == 0
    assert sorted(p.name for p in (tmp_path / "fx").iterdir()) == sorted(FILES)
