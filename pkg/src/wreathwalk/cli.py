"""Experiment runner: one JSON config in, a results CSV, a JSON report and the
resolved config out.

Config layout (unknown keys are rejected at every level that has a schema)::

    {
      "experiment": "harness-classical",        # optional; must match the subcommand
      "measure": {"kind": ..., "lamp_group": ..., "base": {...}, "params": {...}},
      "measures": {"label": <measure>, ...},    # instead of "measure", where allowed
      "kernel": {"d": 3, "lamp_group": "Z2", "atoms": [...]},   # harness-tree only
      "params": {...},                          # experiment parameters, defaults filled in
      "seeds": [0, 1, 2] | "seed0": 0, "runs": 10,
      "output": {"csv": "results.csv", "report": "report.json", "config": "config.json"}
    }

Exit status: 0 on success, 2 on an invalid config, 3 when a resource cap or
budget is exceeded.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import __version__
from .estimators import (
    avez_curve,
    cov_norm_start,
    cutpoint_times,
    cutsphere_probability,
    escape_probability,
    exact_entropy,
    fit_loglog_slope,
    green_metric,
    heat_kernel_curve,
    heat_kernel_sup,
    plugin_entropy,
    sample_elements,
)
from .groups import (
    EnumerationCapError,
    FreeGroup,
    GroupError,
    Heisenberg,
    Lattice,
    axiom_suite,
    binomial_tail_bound_holds,
    lamp_group,
)
from .harness import (
    HarnessBudgetError,
    HarnessError,
    ball_pipeline,
    capture_classical,
    liouville_pipeline,
    nearest_neighbor_tree_kernel,
    nonliouville_pipeline,
    tree_kernel,
    tree_sava_harness,
)
from .measures import MeasureError, StepDistribution, build_measure
from .metabelian import (
    MetabelianError,
    generator,
    meta_identity,
    meta_inv,
    meta_mul,
    meta_walk_limit,
    random_word,
    word_commutator,
    word_image,
    word_image_fold,
)
from .walk import ResourceCapError, ball_census_counts, lamp_flip_census, run_batch, simulate


class ConfigError(ValueError):
    """The experiment config is invalid."""


EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE = 0, 2, 3

DEFAULT_OUTPUT = {"csv": "results.csv", "report": "report.json", "config": "config.json"}
SEED_STRIDE = 1_000_003


@dataclass
class Result:
    columns: list
    rows: list
    report: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Experiment:
    defaults: dict
    runner: Callable
    subject: str = "measure"          # "measure", "measures", "kernel" or "none"
    runs: int = 1


def _sub_seed(seed: int, i: int) -> int:
    return seed * SEED_STRIDE + i


def _fnum(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _fnum(obj)
    return obj


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(_fnum(v))
    if isinstance(v, (list, tuple)):
        return json.dumps(_clean(v), separators=(",", ":"))
    return str(v)


# ---------------------------------------------------------------------------
# runners (each takes the resolved config, the seed list and a worker count)


def _labelled(cfg: dict) -> list:
    if "measures" in cfg:
        return [(label, build_measure(spec)) for label, spec in cfg["measures"].items()]
    return [("", build_measure(cfg["measure"]))]


def _harness_result(rep) -> Result:
    return Result(rep.columns, rep.rows, rep.to_json())


def run_simulate(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows, summary = [], {}
    for label, mu in _labelled(cfg):
        if p["census_sites"]:
            rows_l = _census_rows(mu, p, seeds, workers)
            for r in rows_l:
                r["label"] = label
            rows += rows_l
            summary[label] = _census_summary(rows_l, p)
            continue
        for seed in seeds:
            t = simulate(mu, p["n"], seed)
            rows.append({"label": label, "seed": seed, "n": p["n"],
                         "word_length": int(t.word_lengths()[-1]),
                         "lamp_events": int(len(t.ev_time)),
                         "ball_events": int(len(t.ball_time)),
                         "final_support": (len(t.final_config()) if not t.has_ball_atoms else None)})
    cols = ["label", "seed"] + [c for c in rows[0] if c not in ("label", "seed")] if rows else []
    return Result(cols, rows, {"census": summary} if summary else {})


def _census_seed(seed, mu, checks, sites):
    if mu.arrays.ball_radius.max() >= 0:
        res = ball_census_counts(mu, checks, seed, sites)
        counts, diff = res["counts"], res["difference"]
    else:
        t = simulate(mu, max(checks), seed)
        single = lamp_flip_census(t, sites, "single")
        counts = {N: single.counts_at(N) for N in checks}
        diff = ({N: lamp_flip_census(t, sites[:2], "difference").counts_at(N)[0] for N in checks}
                if len(sites) >= 2 else {})
    rows = []
    for N in checks:
        row = {"seed": seed, "N": N}
        for i, c in enumerate(counts[N]):
            row[f"count_site{i}"] = int(c)
        row["count_difference"] = int(diff[N]) if N in diff else None
        rows.append(row)
    return rows


def _census_rows(mu: StepDistribution, p: dict, seeds, workers: int = 1) -> list:
    checks = sorted(int(c) for c in p["census_checks"])
    sites = [tuple(int(c) for c in s) for s in p["census_sites"]]
    per_seed = run_batch(_census_seed, seeds, workers, (mu, checks, sites))
    return [r for rows in per_seed for r in rows]


def _census_summary(rows: list, p: dict) -> dict:
    checks = sorted(int(c) for c in p["census_checks"])
    by_seed: dict = {}
    for r in rows:
        by_seed.setdefault(r["seed"], {})[r["N"]] = r
    out = {}
    for a, b in zip(checks, checks[1:]):
        inc = [s[b]["count_site0"] > s[a]["count_site0"] for s in by_seed.values()]
        same = [s[b]["count_difference"] == s[a]["count_difference"] for s in by_seed.values()
                if s[a]["count_difference"] is not None]
        out[f"{a}->{b}"] = {"site0_increase_freq": sum(inc) / len(inc),
                            "difference_unchanged_freq": sum(same) / len(same) if same else None,
                            "runs": len(inc)}
    return out


def run_entropy(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows = []
    for label, mu in _labelled(cfg):
        exact = exact_entropy(mu, p["n"], p["what"]) if p["exact"] else None
        for seed in seeds:
            xs = sample_elements(mu, p["n"], p["samples"], seed, p["what"])
            rep = plugin_entropy(xs, p["correction"])
            z = None if exact is None or not rep.stderr else (rep.estimate - exact) / rep.stderr
            rows.append({"label": label, "seed": seed, "n": p["n"], "estimate": rep.estimate,
                         "stderr": rep.stderr, "exact": exact, "z": z,
                         "distinct": rep.params["distinct"], "atoms": len(mu)})
    within = [abs(r["z"]) <= 3 for r in rows if r["z"] is not None]
    return Result(list(rows[0]), rows, {"all_within_3se": all(within) if within else None})


def run_avez(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows, report = [], {}
    for label, mu in _labelled(cfg):
        for seed in seeds:
            curve = avez_curve(mu, p["n_grid"], p["samples"], seed, p["what"], p["correction"])
            vals = [h for _, h, _ in curve]
            for n, h, rep in curve:
                rows.append({"label": label, "seed": seed, "n": n, "h_over_n": h,
                             "stderr_over_n": rep.stderr / n, "distinct": rep.params["distinct"],
                             "flags": ";".join(rep.flags)})
            report[f"{label}/{seed}"] = {
                "strictly_decreasing": all(b < a for a, b in zip(vals, vals[1:])),
                "h_over_n": vals}
    return Result(list(rows[0]), rows, {"curves": report})


def _parse_point(model, obj):
    if isinstance(model, FreeGroup) and isinstance(obj, str):
        return model.parse(obj)
    return model.point_from_json(obj)


def run_green(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows = []
    for label, mu in _labelled(cfg):
        base = mu.projection()
        model = mu.model
        for seed in seeds:
            for i, obj in enumerate(p["points"]):
                x = _parse_point(model, obj)
                rep = green_metric(model, base, x, "mc", p["n_cap"], p["samples"], _sub_seed(seed, i))
                try:
                    exact = green_metric(model, base, x, "analytic_tree").estimate
                except ValueError:
                    exact = None
                rows.append({"label": label, "seed": seed, "point": json.dumps(model.point_to_json(x)),
                             "word_length": model.word_length(x), "n_cap": p["n_cap"],
                             "zeta_hat": rep.estimate, "stderr": rep.stderr,
                             "hits": rep.params["hits"], "analytic": exact,
                             "abs_diff": None if exact is None else abs(rep.estimate - exact)})
    return Result(list(rows[0]), rows)


def run_cutpoints(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows = []
    for label, mu in _labelled(cfg):
        for seed in seeds:
            t = simulate(mu, p["n"], seed)
            cp = cutpoint_times(t, p["future_window"])
            rows.append({"label": label, "seed": seed, "n": p["n"], "cutpoints": int(len(cp)),
                         "first": int(cp[0]) if len(cp) else None,
                         "last_before_window": int(cp[cp <= p["n"] - p["future_window"]].max())
                         if np.any(cp <= p["n"] - p["future_window"]) else None})
    return Result(list(rows[0]), rows)


def run_cutspheres(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows, fits = [], {}
    for label, mu in _labelled(cfg):
        base = mu.projection()
        for seed in seeds:
            ps = []
            for i, r in enumerate(p["radii"]):
                H = p["horizon_factor"] * r * r
                rep = cutsphere_probability(base, r, H, p["walks"], _sub_seed(seed, i))
                ps.append(rep.estimate)
                rows.append({"label": label, "seed": seed, "r": r, "horizon": H,
                             "p_hat": rep.estimate, "stderr": rep.stderr})
            fits[f"{label}/{seed}"] = fit_loglog_slope(p["radii"], ps) if min(ps) > 0 else None
    return Result(list(rows[0]), rows, {"fits": fits})


def run_heatkernel(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows, fits = [], {}
    for label, mu in _labelled(cfg):
        base = mu.projection()
        # the exact law does not depend on the seed
        for seed in (seeds[:1] if p["samples"] is None else seeds):
            vals = []
            exact = heat_kernel_curve(base, p["times"]) if p["samples"] is None else None
            for t in p["times"]:
                if exact is None:
                    rep = heat_kernel_sup(base, t, p["samples"], _sub_seed(seed, t))
                    est, se, how = rep.estimate, rep.stderr, rep.method
                else:
                    est, se, how = exact[t], 0.0, "exact"
                vals.append(est)
                rows.append({"label": label, "seed": seed, "t": t, "sup_p": est,
                             "stderr": se, "method": how})
            fit_t = [t for t in p["times"] if t >= p["fit_from"]]
            fit_v = [v for t, v in zip(p["times"], vals) if t >= p["fit_from"]]
            fits[f"{label}/{seed}"] = fit_loglog_slope(fit_t, fit_v)
    return Result(list(rows[0]), rows, {"fits": fits})


def run_escape(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows = []
    for label, mu in _labelled(cfg):
        base = mu.projection()
        if not isinstance(mu.model, Lattice):
            raise ConfigError("escape: measure base must be a lattice")
        d = mu.model.d
        scale = p["s"] * math.sqrt(p["n"])
        radius = p["radius_factor"] * scale
        start = cov_norm_start(base, p["start_factor"] * scale)
        for seed in seeds:
            rep = escape_probability(base, start, radius, p["metric"], p["horizon"], p["walks"], seed)
            ratio = radius / (p["start_factor"] * scale)
            rows.append({"label": label, "seed": seed, "d": d, "radius": radius,
                         "start": list(start), "escape_hat": rep.estimate, "stderr": rep.stderr,
                         "target": 1 - ratio ** (d - 2)})
    return Result(list(rows[0]), rows)


def run_harness_classical(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    mu = build_measure(cfg["measure"])
    return _harness_result(capture_classical(mu, p["n_grid"], p["horizon_factor"], seeds, workers))


def run_harness_liouville(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    mu = build_measure(cfg["measure"])
    return _harness_result(liouville_pipeline(mu, p["eps"], p["t0"], p["rho"], p["n_grid"], seeds,
                                              p["future_factor"], p["budget"], p["heat_terms"], workers))


def run_harness_nonliouville(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    mu = build_measure(cfg["measure"])
    return _harness_result(nonliouville_pipeline(mu, p["eps"], p["n_grid"], seeds, p["speed"],
                                                 p["horizon_factor"], p["speed_walks"], workers))


def run_harness_ball(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    mu = build_measure(cfg["measure"])
    return _harness_result(ball_pipeline(mu, p["eps"], p["s"], p["n_grid"], seeds, p["horizon_factor"],
                                         p["escape_walks"], p["escape_horizon"], workers))


def run_harness_tree(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    spec = cfg["kernel"]
    kernel = (nearest_neighbor_tree_kernel(spec.get("d", 3), spec.get("lamp_group", "Z2"))
              if spec.get("atoms") == "nearest_neighbor" else tree_kernel(spec))
    rep = tree_sava_harness(kernel, p["n_grid"], seeds, p["horizon_factor"], p["construction"],
                            p["alpha_walks"], p["alpha_horizon"], p["diag_N"], p["diag_walks"],
                            p["t_max"], workers)
    return _harness_result(rep)


def run_metabelian(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    d = p["d"]
    if p["mode"] == "walk_limit":
        edges = p["edges"] if isinstance(p["edges"], int) else [(tuple(s), i) for s, i in p["edges"]]
        traces = meta_walk_limit(d, p["n"], seeds, edges, p["N_max"], p["step"])
        rows = []
        for seed, run in zip(seeds, traces):
            for tr in run:
                rows.append({"seed": seed, "edge": json.dumps([list(tr.edge[0]), tr.edge[1]]),
                             "final": tr.final, "changes": len(tr.times),
                             "last_change": tr.last_change, "stable": tr.stable})
        stab = {}
        for r in rows:
            stab.setdefault(r["edge"], []).append(r["stable"])
        return Result(list(rows[0]), rows,
                      {"stability_frequency": {e: sum(v) / len(v) for e, v in stab.items()}})
    if p["mode"] == "kernel_suite":
        rows = _metabelian_suite(d, p, seeds[0])
        return Result(list(rows[0]), rows, {"all_passed": all(r["failures"] == 0 for r in rows)})
    raise ConfigError(f"params.mode: unknown metabelian mode {p['mode']!r}")


def _metabelian_suite(d: int, p: dict, seed: int) -> list:
    rng = np.random.default_rng(seed)
    L = p["word_length"]
    fails = 0
    for _ in range(p["pairs"]):
        u, v = random_word(d, L, rng), random_word(d, L, rng)
        if word_image(d, u + v) != meta_mul(word_image(d, u), word_image(d, v)):
            fails += 1
        elif word_image_fold(d, u) != word_image(d, u):
            fails += 1
    rows = [{"check": "homomorphism", "trials": p["pairs"], "failures": fails}]
    fails = 0
    for _ in range(p["kernel_samples"]):
        # a commutator of commutators lies in the second derived subgroup
        w = [random_word(d, max(1, L // 4), rng) for _ in range(4)]
        c = word_commutator(word_commutator(w[0], w[1], d), word_commutator(w[2], w[3], d), d)
        if word_image(d, c) != meta_identity(d):
            fails += 1
    rows.append({"check": "second_derived_kernel", "trials": p["kernel_samples"], "failures": fails})
    sq = word_image(d, word_commutator("a1", "a2", d))
    expected = meta_mul(meta_mul(generator(d, 1), generator(d, 2)),
                        meta_mul(meta_inv(generator(d, 1)), meta_inv(generator(d, 2))))
    ok = (sq == expected and sq.endpoint == (0,) * d and len(sq.chain) == 4
          and all(abs(c) == 1 for c in sq.chain.values()))
    rows.append({"check": "unit_square_commutator", "trials": 1, "failures": 0 if ok else 1})
    return rows


def run_selfcheck(cfg, seeds, workers) -> Result:
    p = cfg["params"]
    rows = []
    for name in p["checks"]:
        if name == "group_axioms":
            for m in (Lattice(1), Lattice(2), Lattice(3), Heisenberg(), FreeGroup(2)):
                for lamps in (None, "Z2"):
                    res = axiom_suite(m, None if lamps is None else lamp_group(lamps),
                                      p["triples"], seeds[0])
                    rows.append({"check": "group_axioms", "group": repr(m) if lamps is None
                                 else f"{lamps} wr {m!r}", "trials": res["triples"],
                                 "failures": sum(res["failures"].values())})
        elif name == "binomial":
            pairs = [(n, k) for n in range(3, p["binomial_n_max"] + 1) for k in range(1, n // 3 + 1)]
            bad = sum(not binomial_tail_bound_holds(n, k) for n, k in pairs)
            rows.append({"check": "binomial", "group": "", "trials": len(pairs), "failures": bad})
        else:
            raise ConfigError(f"params.checks: unknown check {name!r}")
    return Result(list(rows[0]), rows, {"all_passed": all(r["failures"] == 0 for r in rows)})


EXPERIMENTS: dict[str, Experiment] = {
    "simulate": Experiment({"n": 1000, "census_sites": None, "census_checks": None}, run_simulate,
                           "measures"),
    "entropy": Experiment({"n": 4, "samples": 100_000, "correction": "none", "what": "full",
                           "exact": True}, run_entropy, "measures"),
    "avez": Experiment({"n_grid": [16, 32, 64], "samples": 10_000, "correction": "none",
                        "what": "full"}, run_avez, "measures"),
    "green": Experiment({"points": ["a", "ab"], "n_cap": 1000, "samples": 100_000}, run_green,
                        "measures"),
    "cutpoints": Experiment({"n": 100_000, "future_window": 10_000}, run_cutpoints, "measures"),
    "cutspheres": Experiment({"radii": [5, 10, 20, 40], "horizon_factor": 100, "walks": 100_000},
                             run_cutspheres, "measures"),
    "heatkernel": Experiment({"times": list(range(2, 257, 2)), "samples": None, "fit_from": 2},
                             run_heatkernel, "measures"),
    "escape": Experiment({"n": 400, "s": 2.0, "radius_factor": 1.0, "start_factor": 2.0,
                          "metric": "cov", "horizon": 10 ** 8, "walks": 10_000}, run_escape,
                         "measures"),
    "harness-classical": Experiment({"n_grid": [8, 16, 32], "horizon_factor": 100},
                                    run_harness_classical, "measure", 1000),
    "harness-liouville": Experiment({"eps": 0.5, "t0": 16, "rho": 1, "n_grid": [256, 512, 1024],
                                     "future_factor": 8, "budget": 10 ** 7, "heat_terms": 24},
                                    run_harness_liouville, "measure", 50),
    "harness-nonliouville": Experiment({"eps": 0.1, "n_grid": [200], "speed": None,
                                        "horizon_factor": 10, "speed_walks": 10_000},
                                       run_harness_nonliouville, "measure", 1000),
    "harness-ball": Experiment({"eps": 0.25, "s": 2.0, "n_grid": [100, 400], "horizon_factor": 20,
                                "escape_walks": 0, "escape_horizon": 10 ** 7},
                               run_harness_ball, "measure", 200),
    "harness-tree": Experiment({"n_grid": [2, 4, 8], "horizon_factor": 200, "construction": "auto",
                                "alpha_walks": 10_000, "alpha_horizon": 10_000, "diag_N": 10 ** 4,
                                "diag_walks": 500, "t_max": None}, run_harness_tree, "kernel", 200),
    "metabelian": Experiment({"d": 2, "mode": "kernel_suite", "n": 10 ** 5, "N_max": None,
                              "edges": 1, "step": None, "pairs": 10_000, "word_length": 20,
                              "kernel_samples": 1000}, run_metabelian, "none"),
    "selfcheck": Experiment({"checks": ["group_axioms", "binomial"], "triples": 10_000,
                             "binomial_n_max": 60}, run_selfcheck, "none"),
}


# ---------------------------------------------------------------------------
# config resolution


def _materialize_measure(spec, where: str) -> dict:
    if not isinstance(spec, Mapping):
        raise ConfigError(f"{where}: measure spec must be an object")
    out = {"kind": spec.get("kind"), "lamp_group": spec.get("lamp_group", "Z2"),
           "base": spec.get("base", {"kind": "lattice", "d": 3}), "params": spec.get("params", {})}
    extra = set(spec) - set(out)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")
    try:
        build_measure(out)
    except (MeasureError, GroupError, KeyError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return out


def resolve_config(raw: Mapping, experiment: str, seed0: int | None = None,
                   runs: int | None = None) -> dict:
    """Validate ``raw`` and return the config with every default filled in."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if not isinstance(raw, Mapping):
        raise ConfigError("config must be a JSON object")
    exp = EXPERIMENTS[experiment]
    allowed = {"experiment", "params", "seeds", "seed0", "runs", "output"}
    allowed |= {"measure": {"measure"}, "measures": {"measure", "measures"},
                "kernel": {"kernel"}, "none": set()}[exp.subject]
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r}")
    if raw.get("experiment", experiment) != experiment:
        raise ConfigError(f"experiment: config is for {raw['experiment']!r}, not {experiment!r}")
    out: dict = {"experiment": experiment}

    if exp.subject in ("measure", "measures"):
        if "measure" in raw and "measures" in raw:
            raise ConfigError("give either 'measure' or 'measures', not both")
        if "measures" in raw:
            if not isinstance(raw["measures"], Mapping) or not raw["measures"]:
                raise ConfigError("measures: expected a non-empty object of labelled specs")
            out["measures"] = {str(k): _materialize_measure(v, f"measures.{k}")
                               for k, v in raw["measures"].items()}
        elif "measure" in raw:
            out["measure"] = _materialize_measure(raw["measure"], "measure")
        else:
            raise ConfigError("missing required key 'measure'")
    elif exp.subject == "kernel":
        if "kernel" not in raw:
            raise ConfigError("missing required key 'kernel'")
        k = dict(raw["kernel"])
        k.setdefault("d", 3)
        k.setdefault("lamp_group", "Z2")
        try:
            if k.get("atoms") != "nearest_neighbor":
                tree_kernel(k)
        except (HarnessError, GroupError, KeyError, TypeError) as exc:
            raise ConfigError(f"kernel: {exc}") from exc
        out["kernel"] = k

    params = copy.deepcopy(exp.defaults)
    given = raw.get("params", {})
    if not isinstance(given, Mapping):
        raise ConfigError("params must be an object")
    for key, val in given.items():
        if key not in params:
            raise ConfigError(f"unknown key {key!r} in params")
        params[key] = val
    out["params"] = params

    if seed0 is not None or runs is not None or "seeds" not in raw:
        s0 = raw.get("seed0", 0) if seed0 is None else seed0
        n = raw.get("runs", exp.runs) if runs is None else runs
        if not isinstance(s0, int) or not isinstance(n, int) or n < 1 or s0 < 0:
            raise ConfigError("seed0 must be an integer >= 0 and runs an integer >= 1")
        seeds = list(range(s0, s0 + n))
    else:
        seeds = raw["seeds"]
        if (not isinstance(seeds, list) or not seeds
                or not all(isinstance(s, int) and s >= 0 for s in seeds)):
            raise ConfigError("seeds must be a non-empty list of integers >= 0")
    out["seeds"] = list(seeds)

    output = dict(DEFAULT_OUTPUT)
    for key, val in dict(raw.get("output", {})).items():
        if key not in output:
            raise ConfigError(f"unknown key {key!r} in output")
        output[key] = str(val)
    out["output"] = output
    return json.loads(json.dumps(_clean(out)))


def config_hash(resolved: Mapping) -> str:
    blob = json.dumps({"config": resolved, "version": __version__}, sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# running and writing


def run_experiment(resolved: Mapping, workers: int = 1) -> Result:
    exp = EXPERIMENTS[resolved["experiment"]]
    return exp.runner(resolved, resolved["seeds"], max(1, int(workers)))


def csv_text(result: Result, digest: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(result.columns) + ["config_hash"]
    w.writerow(cols)
    for r in result.rows:
        w.writerow([_cell(r.get(c)) for c in result.columns] + [digest])
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_outputs(resolved: Mapping, result: Result, out_dir) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(resolved)
    names = resolved["output"]
    paths = {k: out_dir / v for k, v in names.items()}
    paths["csv"].write_text(csv_text(result, digest), encoding="utf-8", newline="\n")
    paths["report"].write_text(_dump({"config_hash": digest, "version": __version__,
                                      "experiment": resolved["experiment"],
                                      "columns": result.columns, "rows": result.rows,
                                      "report": result.report}), encoding="utf-8", newline="\n")
    paths["config"].write_text(_dump({"config_hash": digest, "version": __version__,
                                      "config": resolved}), encoding="utf-8", newline="\n")
    return paths


def recipe_path(name: str) -> Path:
    return Path(__file__).parent / "recipes" / (name if name.endswith(".json") else name + ".json")


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists() and recipe_path(path).exists():
        p = recipe_path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wreathwalk", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="JSON config file, or the name of a shipped recipe")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--seed0", type=int)
        sp.add_argument("--runs", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _load_config(args.config)
        resolved = resolve_config(raw, args.experiment, args.seed0, args.runs)
        result = run_experiment(resolved, args.workers)
    except (ResourceCapError, EnumerationCapError, HarnessBudgetError) as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, MeasureError, GroupError, HarnessError, MetabelianError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    paths = write_outputs(resolved, result, args.out)
    for p in paths.values():
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
