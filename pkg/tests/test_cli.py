"""CLI parsing, config precedence, and subcommand smoke runs."""

from __future__ import annotations

import numpy as np
import pytest
import torch
import yaml

from epitown.cli import (
    _env_overrides,
    build_config,
    dispatch,
    load_config_dict,
    parse_grid,
    parse_levels,
    parse_seeds,
    realize_config,
)
from epitown.engine import CSV_HEADER
from epitown.interventions import testing_preset as preset_of
from epitown.world import ConfigError

TINY_YAML = """
population:
  size: 200
  locations:
    homes: 66
    groceries: 2
    offices: 3
    schools: 1
    hospitals: 1
    retail: 2
    salons: 2
    cemeteries: 1
horizon_days: 6
"""


@pytest.fixture()
def tiny_cfg_file(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(TINY_YAML)
    return str(p)


def test_parse_seeds():
    assert parse_seeds("30") == list(range(1, 31))
    assert parse_seeds("3,7") == [3, 7]
    assert parse_seeds(" 5 ") == [1, 2, 3, 4, 5]
    with pytest.raises(ConfigError):
        parse_seeds("0")


def test_parse_levels():
    assert parse_levels("1,none,2.5") == [1.0, None, 2.5]
    assert parse_levels("0.3") == [0.3]


def test_parse_grid():
    assert parse_grid("0.01:0.005:0.03") == [0.01, 0.015, 0.02, 0.025, 0.03]
    assert parse_grid("0.1,0.2") == [0.1, 0.2]
    with pytest.raises(ConfigError):
        parse_grid("0:0:1")


def test_load_config_dict_alias_and_errors(tmp_path):
    data = load_config_dict("town1k")
    assert data["population"]["size"] == 1000
    assert load_config_dict(None) == {}
    with pytest.raises(ConfigError):
        load_config_dict(str(tmp_path / "missing.yaml"))
    bad = tmp_path / "list.yaml"
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config_dict(str(bad))


def test_env_overrides_parse_nested_keys():
    env = {
        "PANDEMIC_POPULATION__SIZE": "250",
        "PANDEMIC_HORIZON_DAYS": "9",
        "UNRELATED": "x",
    }
    got = _env_overrides(env)
    assert got == {"population": {"size": 250}, "horizon_days": 9}


def test_config_precedence_flags_env_file(tiny_cfg_file, monkeypatch):
    assert build_config(tiny_cfg_file).horizon_days == 6  # file
    monkeypatch.setenv("PANDEMIC_HORIZON_DAYS", "9")
    assert build_config(tiny_cfg_file).horizon_days == 9  # env beats file
    cfg = build_config(tiny_cfg_file, {"horizon_days": 12})
    assert cfg.horizon_days == 12  # flag beats env
    assert cfg.population.size == 200  # untouched keys survive


def test_realize_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="population.sizee"):
        realize_config({"population": {"sizee": 100}})
    with pytest.raises(ConfigError, match="horizonn"):
        realize_config({"horizonn": 3})


def test_realize_config_testing_preset():
    cfg = realize_config({"testing": {"preset": "SICK"}})
    assert cfg.testing == preset_of("SICK")[0]


def test_dispatch_requires_subcommand():
    assert dispatch([]) == 2


def test_dispatch_run_writes_csvs(tiny_cfg_file, tmp_path):
    out = tmp_path / "results"
    rc = dispatch(
        ["run", "--config", tiny_cfg_file, "--seeds", "1,2", "--out", str(out)]
    )
    assert rc == 0
    for name in ("seed_1.csv", "seed_2.csv", "summary.csv", "tidy.csv"):
        assert (out / name).exists(), name
    lines = (out / "seed_1.csv").read_text().splitlines()
    assert lines[0].startswith("# epitown")
    assert lines[1] == CSV_HEADER
    assert len(lines) == 2 + 6  # metadata + header + horizon days


def test_dispatch_unknown_config_key_exits_2(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("population:\n  siz: 100\n")
    assert dispatch(["run", "--config", str(bad), "--seeds", "1"]) == 2


def test_dispatch_sweep(tiny_cfg_file, tmp_path):
    out = tmp_path / "sweep"
    rc = dispatch(
        [
            "sweep",
            "--config", tiny_cfg_file,
            "--axis", "contact-rate",
            "--levels", "1.0,0.5",
            "--seeds", "1",
            "--out", str(out),
        ]
    )
    assert rc == 0
    assert (out / "sweep_tidy.csv").exists()
    assert (out / "sweep_summary.csv").exists()
    tidy = (out / "sweep_tidy.csv").read_text()
    assert "contact-rate=1.0" in tidy and "contact-rate=0.5" in tidy


def test_dispatch_calibrate(tiny_cfg_file, capsys):
    rc = dispatch(
        [
            "calibrate",
            "--config", tiny_cfg_file,
            "--grid", "0.02,0.03",
            "--seeds", "1",
        ]
    )
    assert rc == 0
    msg = capsys.readouterr().out
    assert "chosen spread-rate mean:" in msg


def test_dispatch_testing_matrix(tiny_cfg_file, tmp_path):
    out = tmp_path / "testing"
    rc = dispatch(
        [
            "testing-matrix",
            "--config", tiny_cfg_file,
            "--presets", "NONE,SICK",
            "--seeds", "1",
            "--out", str(out),
        ]
    )
    assert rc == 0
    summary = (out / "testing_summary.csv").read_text()
    assert "NONE," in summary and "SICK," in summary


def test_dispatch_connectivity(tiny_cfg_file, tmp_path):
    out = tmp_path / "conn.csv"
    rc = dispatch(
        [
            "connectivity",
            "--config", tiny_cfg_file,
            "--stages", "0",
            "--days", "7",
            "--seed", "1",
            "--out", str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "stage,day,components,edges"
    assert len(lines) == 1 + 7


def test_dispatch_eval_with_tiny_checkpoint(tiny_cfg_file, tmp_path, capsys):
    from epitown.sac import SacAgent, SacHyperparams

    agent = SacAgent(
        obs_dim=5, cobs_dim=7, n_actions=3,
        hyper=SacHyperparams(hidden=16, depth=1),
    )
    ck_path = tmp_path / "tiny.ckpt"
    torch.save(agent.checkpoint(steps=1, extra={"action_periods": [1]}), ck_path)
    rc = dispatch(
        [
            "eval",
            "--checkpoint", str(ck_path),
            "--config", tiny_cfg_file,
            "--seeds", "1,2",
            "--action-period", "1",
            "--benchmarks", "random,s0",
        ]
    )
    assert rc == 0
    msg = capsys.readouterr().out
    assert "learned:" in msg and "random:" in msg and "s0:" in msg


def test_dispatch_run_rejects_unknown_policy(tiny_cfg_file, tmp_path):
    rc = dispatch(
        [
            "run",
            "--config", tiny_cfg_file,
            "--policy", "atlantis",
            "--seeds", "1",
            "--out", str(tmp_path / "x"),
        ]
    )
    assert rc == 2  # KeyError from the policy factory maps to usage error
