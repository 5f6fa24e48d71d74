"""Running experiments from JSON configs, as the ``wreathwalk`` command does.
Run: python demos/08_cli_recipes.py"""
import json
import tempfile
from pathlib import Path

from wreathwalk.cli import main, recipe_path

# %% the shipped recipes reproduce the acceptance runs
for p in sorted(recipe_path("x").parent.glob("*.json")):
    print(p.stem, "->", json.loads(p.read_text())["experiment"])

# %% a small config; unspecified parameters are filled in and echoed to config.json
cfg = {"measure": {"kind": "standard_generator", "base": {"kind": "lattice", "d": 3}},
       "params": {"n_grid": [2, 4], "horizon_factor": 20}, "runs": 20}
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "classical.json"
    path.write_text(json.dumps(cfg))
    code = main(["harness-classical", "--config", str(path), "--out", tmp, "--workers", "1"])
    print("exit", code)
    print((Path(tmp) / "results.csv").read_text())
    # a typo in a parameter name is rejected with exit status 2
    path.write_text(json.dumps(dict(cfg, params={"horzon": 3})))
    print("exit", main(["harness-classical", "--config", str(path), "--out", tmp]))
