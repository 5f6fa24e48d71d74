"""Full-scale acceptance runs, one per shipped recipe.

Each test prints a single ``criterion NN: PASS|FAIL`` line with the measured
quantities and wall time, then asserts the criterion (including its runtime
limit).  Run with ``pytest tests/test_acceptance.py -s`` to see only these.
"""
import json
import math
import os
import time

import pytest

from wreathwalk.cli import recipe_path, resolve_config, run_experiment
from wreathwalk.estimators import fit_loglog_slope

WORKERS = os.cpu_count() or 1

pytestmark = pytest.mark.slow


def _run(name):
    raw = json.loads(recipe_path(name).read_text())
    cfg = resolve_config(raw, raw["experiment"])
    start = time.perf_counter()
    res = run_experiment(cfg, WORKERS)
    return cfg, res, time.perf_counter() - start


def _report(capsys, k, ok, secs, limit, detail):
    fast = secs < limit
    status = "PASS" if ok and fast else "FAIL"
    with capsys.disabled():
        print(f"\ncriterion {k:02d}: {status} | {detail} | {secs:.1f} s (limit {limit} s)")
    assert ok, detail
    assert fast, f"runtime {secs:.1f} s exceeds {limit} s"


def test_criterion_01_group_axioms(capsys):
    cfg, res, secs = _run("criterion01_group_axioms")
    fails = sum(r["failures"] for r in res.rows)
    ok = fails == 0 and len(res.rows) == 10 and all(r["trials"] == 10 ** 4 for r in res.rows)
    _report(capsys, 1, ok, secs, 10, f"{len(res.rows)} suites x 1e4 triples, {fails} failures")


def test_criterion_02_entropy_oracle(capsys):
    cfg, res, secs = _run("criterion02_entropy_oracle")
    p = cfg["params"]
    zs = [r["z"] for r in res.rows]
    ok = (len(res.rows) == 3 and p["correction"] == "none" and p["n"] <= 4
          and p["samples"] == 10 ** 5 and all(r["atoms"] <= 20 for r in res.rows)
          and all(abs(z) <= 3 for z in zs))
    _report(capsys, 2, ok, secs, 60, "z = " + ", ".join(f"{z:+.2f}" for z in zs))


def test_criterion_03_avez_dichotomy(capsys):
    cfg, res, secs = _run("criterion03_avez_dichotomy")
    curve = {lab: [r["h_over_n"] for r in res.rows if r["label"] == lab]
             for lab in ("Z2_wr_Z1", "Z2_wr_Z3")}
    ns = [r["n"] for r in res.rows if r["label"] == "Z2_wr_Z1"]
    z1, z3 = curve["Z2_wr_Z1"], curve["Z2_wr_Z3"]
    ok = (ns == [16, 32, 64] and cfg["params"]["samples"] == 10 ** 4
          and all(a > b for a, b in zip(z1, z1[1:])) and all(b > a for a, b in zip(z1, z3)))
    detail = "Z1 " + "/".join(f"{v:.4f}" for v in z1) + ", Z3 " + "/".join(f"{v:.4f}" for v in z3)
    _report(capsys, 3, ok, secs, 600, detail)


def test_criterion_04_cutspheres(capsys):
    cfg, res, secs = _run("criterion04_cutspheres")
    rs = [r["r"] for r in res.rows]
    fit = fit_loglog_slope(rs, [r["p_hat"] for r in res.rows])
    ok = (rs == [5, 10, 20, 40] and all(r["horizon"] == 100 * r["r"] ** 2 for r in res.rows)
          and cfg["params"]["walks"] == 10 ** 5 and -1.4 <= fit["slope"] <= -0.7)
    _report(capsys, 4, ok, secs, 900, f"slope {fit['slope']:.3f}")


def test_criterion_05_escape(capsys):
    cfg, res, secs = _run("criterion05_escape")
    est = {r["d"]: r["escape_hat"] for r in res.rows}
    ok = (cfg["params"]["n"] == 400 and cfg["params"]["s"] == 2 and cfg["params"]["walks"] == 10 ** 4
          and abs(est[3] - 0.50) <= 0.07 and abs(est[4] - 0.75) <= 0.07)
    _report(capsys, 5, ok, secs, 600, f"d=3 {est[3]:.4f}, d=4 {est[4]:.4f}")


def test_criterion_06_heatkernel(capsys):
    cfg, res, secs = _run("criterion06_heatkernel")
    ts = [r["t"] for r in res.rows]
    fit = fit_loglog_slope(ts, [r["sup_p"] for r in res.rows])
    ok = (max(ts) == 256 and all(t % 2 == 0 for t in ts) and -1.7 <= fit["slope"] <= -1.3)
    _report(capsys, 6, ok, secs, 300, f"slope {fit['slope']:.3f} over {len(ts)} even times")


def test_criterion_07_classical_capture(capsys):
    cfg, res, secs = _run("criterion07_classical_capture")
    rows = res.rows
    d = 3
    freq = [r["capture_freq"] for r in rows]
    size = [r["log_size_per_n"] for r in rows]
    # the O(1/n) slack is taken with constant 1
    bound_ok = all(r["log_size_per_n"] <= 2 * d * math.log(r["n"] ** 2) / r["n"] + 1 / r["n"]
                   for r in rows)
    ok = ([r["n"] for r in rows] == [8, 16, 32] and len(cfg["seeds"]) == 1000
          and all(f >= 0.05 for f in freq) and bound_ok
          and all(a > b for a, b in zip(size, size[1:])))
    detail = ("capture " + "/".join(f"{f:.3f}" for f in freq)
              + ", log|Q|/n " + "/".join(f"{s:.3f}" for s in size))
    _report(capsys, 7, ok, secs, 1800, detail)


def test_criterion_08_nonliouville(capsys):
    cfg, res, secs = _run("criterion08_nonliouville")
    (row,) = res.rows
    fa, fs = row["freq_A"], row["freq_support_given_D"]
    ok = (row["n"] == 200 and cfg["params"]["eps"] == 0.1 and len(cfg["seeds"]) == 1000
          and fa >= 0.95 and fs is not None and fs >= 0.9)
    _report(capsys, 8, ok, secs, 1200, f"freq A_n {fa:.3f}, support | D_n {fs}")


def test_criterion_09_green_metric(capsys):
    cfg, res, secs = _run("criterion09_green_metric")
    diffs = {r["word_length"]: abs(r["zeta_hat"] - r["word_length"] * math.log(3)) for r in res.rows}
    ok = (sorted(diffs) == [1, 2] and cfg["params"]["samples"] == 10 ** 6
          and cfg["params"]["n_cap"] == 1000 and all(v <= 0.05 for v in diffs.values()))
    _report(capsys, 9, ok, secs, 600, ", ".join(f"|x|={k}: {v:.4f}" for k, v in sorted(diffs.items())))


def test_criterion_10_metabelian_kernel(capsys):
    cfg, res, secs = _run("criterion10_metabelian_kernel")
    by = {r["check"]: r for r in res.rows}
    ok = (by["homomorphism"]["trials"] == 10 ** 4 and by["second_derived_kernel"]["trials"] == 10 ** 3
          and all(r["failures"] == 0 for r in res.rows) and len(by) == 3)
    _report(capsys, 10, ok, secs, 60, ", ".join(f"{k} {v['failures']}/{v['trials']}" for k, v in by.items()))


def test_criterion_11_heavy_tail_census(capsys):
    cfg, res, secs = _run("criterion11_heavy_tail_census")
    (summary,) = res.report["census"].values()
    s = summary["100000->1000000"]
    inc, same = s["site0_increase_freq"], s["difference_unchanged_freq"]
    ok = (cfg["measure"]["params"]["cap"] == 1000 and s["runs"] == 200
          and inc >= 0.5 and same >= 0.8)
    _report(capsys, 11, ok, secs, 1800, f"origin increases {inc:.3f}, difference unchanged {same:.3f}")


def test_criterion_12_binomial(capsys):
    cfg, res, secs = _run("criterion12_binomial")
    (row,) = res.rows
    expected = sum(n // 3 for n in range(3, 61))
    ok = row["failures"] == 0 and row["trials"] == expected
    _report(capsys, 12, ok, secs, 1, f"{row['trials']} (n, k) pairs, {row['failures']} failures")
