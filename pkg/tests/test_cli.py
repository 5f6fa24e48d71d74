import csv
import json
import subprocess
import sys

import pytest

from wreathwalk.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RESOURCE,
    EXPERIMENTS,
    ConfigError,
    config_hash,
    main,
    recipe_path,
    resolve_config,
)

CLASSICAL = {
    "measure": {"kind": "standard_generator", "lamp_group": "Z2",
                "base": {"kind": "lattice", "d": 3}},
    "params": {"n_grid": [2, 4], "horizon_factor": 20},
    "seed0": 0,
    "runs": 12,
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_classical_csv_columns(tmp_path):
    out = tmp_path / "out"
    assert main(["harness-classical", "--config", _write(tmp_path, CLASSICAL),
                 "--out", str(out), "--workers", "1"]) == EXIT_OK
    rows = list(csv.DictReader((out / "results.csv").open()))
    header = list(rows[0])
    assert header[:4] == ["n", "capture_freq", "capture_se", "log_size_per_n"]
    assert header[-1] == "config_hash"
    assert [r["n"] for r in rows] == ["2", "4"]
    report = json.loads((out / "report.json").read_text())
    assert report["config_hash"] == rows[0]["config_hash"]


def test_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, CLASSICAL)
    outs = []
    for k, workers in enumerate(("1", "2", "1")):
        out = tmp_path / f"run{k}"
        assert main(["harness-classical", "--config", cfg, "--out", str(out),
                     "--workers", workers]) == EXIT_OK
        outs.append([(out / f).read_bytes() for f in ("results.csv", "report.json", "config.json")])
    assert outs[0] == outs[1] == outs[2]


def test_defaults_materialized():
    cfg = {"measure": {"kind": "standard_generator"}}
    resolved = resolve_config(cfg, "heatkernel")
    assert resolved["measure"]["lamp_group"] == "Z2"
    assert resolved["measure"]["base"] == {"kind": "lattice", "d": 3}
    assert resolved["params"]["fit_from"] == 2
    assert resolved["seeds"] == [0]
    assert resolved["output"] == {"csv": "results.csv", "report": "report.json",
                                  "config": "config.json"}


def test_config_echo_round_trips(tmp_path):
    out = tmp_path / "out"
    main(["harness-classical", "--config", _write(tmp_path, CLASSICAL), "--out", str(out),
          "--workers", "1"])
    echo = json.loads((out / "config.json").read_text())
    assert config_hash(echo["config"]) == echo["config_hash"]
    again = resolve_config(echo["config"], "harness-classical")
    assert again == echo["config"]


def test_misspelled_param_names_the_key(tmp_path, capsys):
    cfg = dict(CLASSICAL, params={"n_grid": [2], "horzon": 10})
    assert main(["harness-classical", "--config", _write(tmp_path, cfg), "--out",
                 str(tmp_path / "o")]) == EXIT_CONFIG
    assert "horzon" in capsys.readouterr().err
    assert not (tmp_path / "o" / "results.csv").exists()


def test_unknown_top_level_key(tmp_path, capsys):
    cfg = dict(CLASSICAL, mesure={})
    assert main(["harness-classical", "--config", _write(tmp_path, cfg), "--out",
                 str(tmp_path / "o")]) == EXIT_CONFIG
    assert "mesure" in capsys.readouterr().err


def test_invalid_values_exit_2(tmp_path):
    bad = [
        dict(CLASSICAL, measure={"kind": "standard_generator", "lamp_group": "Z9x"}),
        dict(CLASSICAL, runs=0),
        dict(CLASSICAL, experiment="harness-ball"),
        dict(CLASSICAL, measure={"kind": "standard_generator", "base": {"kind": "lattice", "d": 1}}),
    ]
    for k, cfg in enumerate(bad):
        assert main(["harness-classical", "--config", _write(tmp_path, cfg, f"b{k}.json"),
                     "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_budget_exceeded_exit_3(tmp_path, capsys):
    cfg = {"measure": {"kind": "standard_generator"},
           "params": {"n_grid": [256], "budget": 10}, "runs": 2}
    assert main(["harness-liouville", "--config", _write(tmp_path, cfg), "--out",
                 str(tmp_path / "o")]) == EXIT_RESOURCE
    assert "budget" in capsys.readouterr().err


def test_seed_flags_override(tmp_path):
    r = resolve_config(CLASSICAL, "harness-classical", seed0=5, runs=3)
    assert r["seeds"] == [5, 6, 7]
    r = resolve_config(dict(CLASSICAL, seeds=[3, 9]), "harness-classical")
    assert r["seeds"] == [3, 9]
    with pytest.raises(ConfigError):
        resolve_config(dict(CLASSICAL, seeds=[-1]), "harness-classical")


def test_workers_excluded_from_hash():
    r = resolve_config(CLASSICAL, "harness-classical")
    assert "workers" not in json.dumps(r)


@pytest.mark.parametrize("path", sorted(recipe_path("x").parent.glob("*.json")), ids=lambda p: p.stem)
def test_recipes_resolve(path):
    raw = json.loads(path.read_text())
    exp = raw["experiment"]
    assert exp in EXPERIMENTS
    resolved = resolve_config(raw, exp)
    assert resolved["experiment"] == exp


def test_all_subcommands_registered():
    names = {"simulate", "entropy", "avez", "green", "cutpoints", "cutspheres", "heatkernel",
             "escape", "harness-classical", "harness-liouville", "harness-nonliouville",
             "harness-ball", "harness-tree", "metabelian"}
    assert names <= set(EXPERIMENTS)


def test_module_entry_point(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, {"params": {"d": 3, "pairs": 200, "kernel_samples": 50}})
    proc = subprocess.run([sys.executable, "-m", "wreathwalk", "metabelian", "--config", cfg,
                           "--out", str(out), "--workers", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["report"]["all_passed"]
