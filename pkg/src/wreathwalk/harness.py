"""Capture sets ``Q_n`` and empirical measurement of their two hypotheses.

Every construction is checked along simulated trajectories: the measured
capture frequency estimates ``P[X_hat_n in Q_n]`` (or ``P[exists m >= n ...]``
in the enhanced form) and the log-cardinality bound is reported per ``n``.
The limiting lamp configuration is always approximated by ``Phi_H`` at a
finite horizon ``H``; the horizon is part of each report.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import special

from .estimators import (
    _json_float, _is_lazy_simple, escape_probability, exact_distribution, exact_lattice_law,
    cov_norm_start, entropy_of_probs, typical_set_build,
)
from .groups import (
    BaseModel, FreeGroup, Heisenberg, LampConfig, LampGroup, Lattice, Tree, TreeArena,
    log_binomial_tail, lamp_group,
)
from .measures import BallLamps, MeasureError, RngStream, StepDistribution
from .walk import BoundarySnapshot, SnapshotWindowError, Trajectory, run_batch, simulate

BIG = 2 ** 62

CONSTRUCTIONS = ("classical", "liouville", "non_liouville", "ball_2nd_moment", "tree_cone")


class HarnessError(ValueError):
    """A harness precondition is violated."""


class HarnessBudgetError(HarnessError):
    """A configured enumeration budget would be exceeded."""


# ---------------------------------------------------------------------------
# descriptors and reports


@dataclass(frozen=True)
class QnDescriptor:
    """A capture set given by a membership predicate and logged size factors.

    ``factors`` maps each enumeration step to the log of its number of
    choices; the log-cardinality bound is their sum.
    """

    construction: str
    params: dict
    snapshot: BoundarySnapshot | None
    factors: dict
    member: Callable = field(repr=False, compare=False)
    enumerate_members: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise HarnessError(f"unknown construction {self.construction!r}")

    @property
    def log_cardinality(self) -> float:
        return float(math.fsum(self.factors.values()))

    def contains(self, lamps: LampConfig, x) -> bool:
        return bool(self.member(lamps, x))

    def members(self):
        if self.enumerate_members is None:
            raise HarnessError(f"{self.construction} sets are not enumerable")
        return self.enumerate_members()


FIXED_COLUMNS = ("n", "capture_freq", "capture_se", "log_size_per_n")


@dataclass
class HarnessReport:
    construction: str
    params: dict
    rows: list
    verdicts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        for r in self.rows:
            p = r["capture_freq"]
            if p is not None and not 0.0 <= p <= 1.0:
                raise HarnessError(f"capture frequency {p} outside [0, 1]")
            if not math.isfinite(r["log_size_per_n"]):
                raise HarnessError("log-size bound must be finite")

    def row(self, n: int) -> dict:
        for r in self.rows:
            if r["n"] == n:
                return r
        raise KeyError(n)

    @property
    def columns(self) -> list:
        extra = sorted({k for r in self.rows for k in r} - set(FIXED_COLUMNS))
        return list(FIXED_COLUMNS) + extra

    def to_json(self) -> dict:
        return {
            "construction": self.construction,
            "params": self.params,
            "rows": [{k: _json_value(v) for k, v in r.items()} for r in self.rows],
            "verdicts": self.verdicts,
            "notes": self.notes,
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_csv_cell(r.get(c)) for c in cols])
        return buf.getvalue()


def _json_value(v):
    if isinstance(v, float):
        return _json_float(v)
    if isinstance(v, (np.floating,)):
        return _json_float(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _freq(flags) -> tuple[float | None, float | None]:
    flags = [bool(f) for f in flags if f is not None]
    if not flags:
        return None, None
    p = sum(flags) / len(flags)
    return p, math.sqrt(p * (1 - p) / len(flags))


def _cond_freq(ev, given) -> float | None:
    sel = [bool(e) for e, g in zip(ev, given) if g]
    return sum(sel) / len(sel) if sel else None


# ---------------------------------------------------------------------------
# event sweeps shared by the cone/shell constructions


def _lit_max(score: Sequence[int], old: Sequence[int], new: Sequence[int]) -> np.ndarray:
    """``out[j]`` = largest score of a lit site after the first ``j`` events
    (``-1`` if none).  Events with negative score are ignored."""
    E = len(score)
    out = np.full(E + 1, -1, dtype=np.int64)
    if E == 0:
        return out
    cnt = [0] * (max(max(score), 0) + 1)
    cur = -1
    for j in range(E):
        sc = score[j]
        if sc >= 0:
            was, now = old[j] != 0, new[j] != 0
            if was != now:
                if now:
                    cnt[sc] += 1
                    if sc > cur:
                        cur = sc
                else:
                    cnt[sc] -= 1
                    if sc == cur and cnt[sc] == 0:
                        while cur >= 0 and cnt[cur] == 0:
                            cur -= 1
        out[j + 1] = cur
    return out


def _mismatch_min(sid: Sequence[int], score: Sequence[int], old: Sequence[int],
                  new: Sequence[int]) -> np.ndarray:
    """``out[j]`` = smallest score of a site whose value after ``j`` events
    differs from its final value (``BIG`` if none)."""
    E = len(score)
    out = np.full(E + 1, BIG, dtype=np.int64)
    if E == 0:
        return out
    final: dict = {}
    for j in range(E):
        final[sid[j]] = new[j]
    top = max(max(score), 0) + 1
    cnt = [0] * (top + 1)
    mis: dict = {}
    cur = top
    for j in range(E - 1, -1, -1):
        sc = score[j]
        if sc >= 0:
            s = sid[j]
            was = mis.get(s, False)
            now = old[j] != final[s]
            if was != now:
                mis[s] = now
                if now:
                    cnt[sc] += 1
                    if sc < cur:
                        cur = sc
                else:
                    cnt[sc] -= 1
                    if sc == cur and cnt[sc] == 0:
                        while cur < top and cnt[cur] == 0:
                            cur += 1
        out[j] = cur if cur < top else BIG
    return out


def _site_keys(sites: np.ndarray) -> np.ndarray:
    """Injective integer keys for integer points."""
    if len(sites) == 0:
        return np.zeros(0, dtype=np.int64)
    lo = sites.min(axis=0)
    span = sites.max(axis=0) - lo + 1
    key = np.zeros(len(sites), dtype=np.int64)
    for i in range(sites.shape[1]):
        key = key * int(span[i]) + (sites[:, i] - lo[i])
    return key


def _event_sites(t: Trajectory) -> np.ndarray:
    d = t.model.d
    if not t.ev_site:
        return np.zeros((0, d), dtype=np.int64)
    return np.array(t.ev_site, dtype=np.int64).reshape(-1, d)


# ---------------------------------------------------------------------------
# classical construction (shells n <= |x| <= n^2)


def _require_lattice(model: BaseModel, dmin: int = 1) -> Lattice:
    if not isinstance(model, Lattice):
        raise HarnessError("this construction needs a lattice base Z^d")
    if model.d < dmin:
        raise HarnessError(f"this construction needs d >= {dmin}, got d = {model.d}")
    return model


def lattice_snapshot(t: Trajectory, radius: int, horizon: int | None = None) -> BoundarySnapshot:
    """``Phi_H`` on the word-metric ball of ``radius`` for local lattice walks.

    Stable iff no lamp in the window changed during ``(H/2, H]``.
    """
    H = t.n if horizon is None else horizon
    if t.n < H:
        raise SnapshotWindowError(f"trajectory length {t.n} < horizon {H}")
    if t.has_ball_atoms:
        raise HarnessError("lattice_snapshot handles explicit lamp events only")
    sites = _event_sites(t)
    keep = (t.ev_time <= H) & (np.abs(sites).sum(axis=1) <= radius)
    state: dict = {}
    last = None
    for j in np.nonzero(keep)[0].tolist():
        s = t.ev_site[j]
        if t.ev_new[j]:
            state[s] = int(t.ev_new[j])
        else:
            state.pop(s, None)
        last = int(t.ev_time[j])
    return BoundarySnapshot(radius, H, LampConfig(state), last is None or last <= H / 2, last)


def qn_classical(snapshot: BoundarySnapshot, n: int, model: Lattice) -> QnDescriptor:
    """Pairs ``(phi, x)`` with ``n <= |x| <= n^2``, ``phi = Phi_inf`` strictly
    inside the ``|x|``-sphere and ``id`` on and outside it."""
    _require_lattice(model)
    if n < 1:
        raise HarnessError("n must be >= 1")
    if snapshot.radius < n * n:
        raise SnapshotWindowError(f"snapshot radius {snapshot.radius} < n^2 = {n * n}")
    inner = {z: v for z, v in snapshot.lamps.items()}
    count = model.ball_size(n * n) - model.ball_size(n - 1)

    def member(lamps, x) -> bool:
        r = model.word_length(x)
        if not n <= r <= n * n:
            return False
        for z, v in lamps.items():
            if model.word_length(z) >= r or inner.get(z, 0) != v:
                return False
        for z, v in inner.items():
            if model.word_length(z) < r and lamps.get(z, 0) != v:
                return False
        return True

    def members():
        for x in model.ball(n * n):
            r = model.word_length(x)
            if r >= n:
                phi = LampConfig({z: v for z, v in inner.items() if model.word_length(z) < r})
                yield phi, x

    return QnDescriptor("classical", {"n": n, "d": model.d}, snapshot,
                        {"positions": math.log(count), "lamps": 0.0}, member, members)


def classical_capture_times(t: Trajectory, n: int, search_end: int) -> np.ndarray:
    """Times ``m in [n, search_end]`` with ``X_hat_m in Q_n(Phi_H)``, where
    ``H`` is the trajectory length."""
    model = _require_lattice(t.model)
    if t.has_ball_atoms:
        raise HarnessError("classical capture needs explicit lamp events")
    search_end = min(search_end, t.n)
    sites = _event_sites(t)
    norms = np.abs(sites).sum(axis=1).tolist()
    keys = _site_keys(sites).tolist()
    old, new = t.ev_old.tolist(), t.ev_new.tolist()
    max_lit = _lit_max(norms, old, new)
    min_mis = _mismatch_min(keys, norms, old, new)
    if search_end < n:
        return np.zeros(0, dtype=np.int64)
    ms = np.arange(n, search_end + 1)
    r = np.abs(t.positions[ms]).sum(axis=1)
    j = np.searchsorted(t.ev_time, ms, side="right")
    ok = (r >= n) & (r <= n * n) & (max_lit[j] < r) & (min_mis[j] >= r)
    del model
    return ms[ok]


def _classical_seed(seed, mu, n_grid, horizon_factor, H):
    t = simulate(mu, H, seed)
    snap = lattice_snapshot(t, max(n_grid), H)
    out = {}
    for n in n_grid:
        times = classical_capture_times(t, n, horizon_factor * n * n)
        out[n] = (len(times) > 0, int(times[0]) if len(times) else None)
    return out, snap.stable


def _check_centred(mu: StepDistribution) -> None:
    mean = mu.projection().mean()
    if any(Fraction(m) != 0 for m in mean):
        raise HarnessError(f"projection has non-zero mean {tuple(str(m) for m in mean)}")


def capture_classical(mu: StepDistribution, n_grid: Sequence[int], horizon_factor: int = 100,
                      seeds: Iterable[int] = range(100), workers: int = 1) -> HarnessReport:
    """Frequency of ``exists m in [n, horizon_factor n^2] : X_hat_m in Q_n``."""
    model = _require_lattice(mu.model, 3)
    _check_centred(mu)
    if not mu.is_standard():
        raise HarnessError("classical capture needs standard generators")
    n_grid = sorted(int(n) for n in n_grid)
    seeds = list(seeds)
    H = horizon_factor * n_grid[-1] ** 2
    res = run_batch(_classical_seed, seeds, workers, (mu, n_grid, horizon_factor, H))
    rows = []
    for n in n_grid:
        hits = [r[0][n][0] for r in res]
        p, se = _freq(hits)
        times = [r[0][n][1] for r in res if r[0][n][1] is not None]
        count = model.ball_size(n * n) - model.ball_size(n - 1)
        rows.append({
            "n": n, "capture_freq": p, "capture_se": se,
            "log_size_per_n": math.log(count) / n,
            "log_size_reference": 2 * model.d * math.log(n * n) / n,
            "median_capture_time": float(np.median(times)) if times else None,
        })
    stable, _ = _freq([r[1] for r in res])
    sizes = [r["log_size_per_n"] for r in rows]
    verdicts = {
        "capture_positive": all(r["capture_freq"] > 0 for r in rows),
        "size_decreasing": all(a > b for a, b in zip(sizes, sizes[1:])),
    }
    params = {"n_grid": n_grid, "horizon_factor": horizon_factor, "horizon": H,
              "seeds": len(seeds), "snapshot_stable_freq_radius_nmax": stable}
    return HarnessReport("classical", params, rows, verdicts,
                         ["limit lamps approximated by Phi_H at the stated horizon"])


# ---------------------------------------------------------------------------
# Liouville base: block typical sets and the exceptional set W


def _base_law(mu: StepDistribution) -> dict:
    law: dict = {}
    for a, p in zip(mu.atoms, mu.probs):
        law[a.pos] = law.get(a.pos, 0.0) + float(p)
    return law


def _u_law(model: BaseModel, law: Mapping, rho: int) -> dict:
    out: dict = {}
    for y, p in law.items():
        key = y if model.word_length(y) > rho else "*"
        out[key] = out.get(key, 0.0) + p
    return out


def _heat_constant(mu: StepDistribution, D: float, j_max: int) -> float:
    """``max_{j <= j_max} j^{D/2} sup_x p_j(o, x)`` from exact laws."""
    model = mu.model
    best = 0.0
    if isinstance(model, Lattice):
        base = mu.projection()
        for j in range(1, j_max + 1):
            law, _ = exact_lattice_law(base, j)
            best = max(best, float(law.max()) * j ** (D / 2))
        return best
    for j in range(1, j_max + 1):
        law = exact_distribution(mu, j, "projection")
        best = max(best, max(law.values()) * j ** (D / 2))
    return best


def _block_sets_lattice(P: np.ndarray, moves: np.ndarray, big: np.ndarray, t0: int, rho: int,
                        s_n: int):
    """Centres and l1 radii describing ``M_i`` as unions of balls."""
    d = P.shape[1]
    steps = np.where(big[:, None], moves, 0)[: s_n * t0].reshape(s_n, t0, d)
    small = (~big[: s_n * t0]).reshape(s_n, t0).astype(np.int64)
    J = np.cumsum(steps, axis=1)
    C = rho * np.cumsum(small, axis=1)
    starts = P[0: s_n * t0: t0]                     # x_{i-1}
    centres = starts[:, None, :] + J                 # (s_n, t0, d)
    return centres, C


def _in_blocks_lattice(Z: np.ndarray, centres: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """``out[i, z]``: is ``Z[z]`` in ``M_i``?"""
    s_n = centres.shape[0]
    out = np.zeros((s_n, len(Z)), dtype=bool)
    if len(Z) == 0:
        return out
    for i in range(s_n):
        c, r = centres[i], radii[i]
        lo = (c - r[:, None]).min(axis=0)
        hi = (c + r[:, None]).max(axis=0)
        cand = np.nonzero(np.all((Z >= lo) & (Z <= hi), axis=1))[0]
        if len(cand) == 0:
            continue
        dist = np.abs(Z[cand][:, None, :] - c[None, :, :]).sum(axis=2)
        out[i, cand] = np.any(dist <= r[None, :], axis=1)
    return out


def _block_sets_generic(model: BaseModel, traj: Trajectory, big: np.ndarray, t0: int, rho: int,
                        s_n: int, cap: int) -> list:
    ball = model.ball(rho)
    sets = []
    for i in range(1, s_n + 1):
        x = traj.position((i - 1) * t0)
        cur = {model.identity}
        M: set = set()
        for k in range((i - 1) * t0 + 1, i * t0 + 1):
            y = traj.increment(k).pos
            Z = [y] if big[k - 1] else ball
            cur = {model.mul(a, z) for a in cur for z in Z}
            if len(cur) > cap:
                raise HarnessBudgetError("block set exceeds the configured budget")
            M.update(model.mul(x, a) for a in cur)
        sets.append(M)
    return sets


def _liouville_seed(seed, mu, n, t0, rho, H, S_set, U_set, lamp_log, generic_cap):
    model = mu.model
    t = simulate(mu, H, seed)
    s_n = n // t0
    big = np.array([model.word_length(mu.atoms[i].pos) > rho for i in t.idx.tolist()])
    # (i) and (ii)
    u_seq = [mu.atoms[i].pos if big[k] else "*" for k, i in enumerate(t.idx[:n].tolist())]
    U_ok = U_set.contains(u_seq)
    xs = [t.position(j * t0) for j in range(s_n + 1)]
    blocks = [model.mul(model.inv(xs[j - 1]), xs[j]) for j in range(1, s_n + 1)]
    S_ok = S_set.contains(blocks)
    Phi_n = t.lamp_config_at(n)
    Phi_H = t.final_config()
    dis = [z for z in set(Phi_n) | set(Phi_H) if Phi_n.get(z, 0) != Phi_H.get(z, 0)]
    supp = list(Phi_n)
    if isinstance(model, Lattice):
        P = t.positions
        centres, radii = _block_sets_lattice(P, mu.arrays.moves[t.idx], big, t0, rho, s_n)
        future = np.unique(P[n + 1:], axis=0)
        in_W = _in_blocks_lattice(future, centres, radii).any(axis=1)
        Zd = np.array(dis, dtype=np.int64).reshape(-1, model.d)
        Zs = np.array(supp, dtype=np.int64).reshape(-1, model.d)
        dis_in = _in_blocks_lattice(Zd, centres, radii)
        supp_in = _in_blocks_lattice(Zs, centres, radii)
        m_sizes = None
    else:
        sets = _block_sets_generic(model, t, big, t0, rho, s_n, generic_cap)
        future = {t.position(m) for m in range(n + 1, H + 1)}
        in_W = np.array([bool(S & future) for S in sets])
        dis_in = np.array([[z in S for z in dis] for S in sets], dtype=bool).reshape(s_n, len(dis))
        supp_in = np.array([[z in S for z in supp] for S in sets], dtype=bool).reshape(s_n, len(supp))
        m_sizes = [len(S) for S in sets]
    W_size = int(in_W.sum())
    W_ok = W_size <= n ** 0.75
    # (iv): disagreements only inside W-blocks; lit lamps only inside the union
    in_nonW = dis_in[~in_W].any(axis=0) if len(dis) else np.zeros(0, bool)
    clause1 = not in_nonW.any()
    in_union = supp_in.any(axis=0) if len(supp) else np.zeros(0, bool)
    clause2 = bool(in_union.all())
    # structural check: each queried site falls in exactly one part of the partition
    all_in = dis_in.any(axis=0) if len(dis) else np.zeros(0, bool)
    part_nonW = in_nonW
    part_free = all_in & ~in_nonW
    part_out = ~all_in
    if len(dis) and not np.all(part_nonW.astype(int) + part_free + part_out == 1):
        raise AssertionError("partition of sites is not exact")
    member = bool(U_ok and S_ok and W_ok and clause1 and clause2)
    return {"U": U_ok, "S": S_ok, "W_size": W_size, "W_ok": W_ok, "iv": clause1 and clause2,
            "member": member, "m_sizes": m_sizes,
            "realized_lamp_log": float(sum(lamp_log(i, m_sizes) for i in np.nonzero(in_W)[0]))}


def liouville_pipeline(mu: StepDistribution, eps: float, t0: int, rho: int,
                       n_grid: Sequence[int] | int, seeds: Iterable[int] = range(100),
                       future_factor: int = 8, budget: int = 10 ** 7, heat_terms: int = 24,
                       workers: int = 1) -> HarnessReport:
    """Membership of ``X_hat_n`` in the block/typical-set construction for a
    Liouville base, with the exceptional set ``W`` read off the trajectory's
    future up to ``n (1 + future_factor)``."""
    model = mu.model
    if isinstance(model, Lattice):
        if model.d < 3:
            raise HarnessError("the base needs at least cubic growth (Z^d with d >= 3)")
        growth = model.d
    elif isinstance(model, Heisenberg):
        growth = 4
    else:
        raise HarnessError("liouville_pipeline needs a lattice or Heisenberg base")
    if not mu.is_standard():
        raise HarnessError("liouville_pipeline needs standard generators")
    if eps <= 0 or rho <= 0 or t0 < 1:
        raise HarnessError("need eps > 0, rho > 0 and t0 >= 1")
    n_grid = [n_grid] if isinstance(n_grid, int) else sorted(int(n) for n in n_grid)
    for n in n_grid:
        if n % t0:
            raise HarnessError(f"t0 = {t0} does not divide n = {n}")
    V_rho = model.ball_size(rho)
    if isinstance(model, Lattice):
        m_bound = t0 * model.ball_size(rho * t0)
    else:
        m_bound = t0 * V_rho ** t0
    if m_bound > budget:
        raise HarnessBudgetError(f"block-set bound {m_bound} exceeds budget {budget}")
    law_t0 = exact_distribution(mu, t0, "projection")
    H_t0 = entropy_of_probs(list(law_t0.values()))
    if H_t0 >= eps * t0:
        raise HarnessError(f"H(X_t0) = {H_t0:.3f} >= eps t0 = {eps * t0:.3f}; increase t0")
    u_law = _u_law(model, _base_law(mu), rho)
    H_u = entropy_of_probs(list(u_law.values()))
    if H_u >= eps:
        raise HarnessError(f"H(u_rho(Y_1)) = {H_u:.3f} >= eps; increase rho")
    log_L = math.log(mu.L.order)
    c_hat = _heat_constant(mu, growth, heat_terms if isinstance(model, Lattice) else min(heat_terms, 6))
    seeds = list(seeds)
    rows = []
    for n in n_grid:
        s_n = n // t0
        S_set = typical_set_build(law_t0, s_n, (eps * t0 - H_t0) / 2)
        U_set = typical_set_build(u_law, n, (eps - H_u) / 2 if H_u > 0 else eps / 2)
        H = n * (1 + future_factor)
        w_max = int(math.floor(n ** 0.75))
        factors = {
            "S": S_set.log_size_bound(),
            "U": U_set.log_size_bound(),
            "W": log_binomial_tail(s_n, w_max),
            "lamps": min(w_max, s_n) * m_bound * log_L,
        }

        def lamp_log(i, sizes, _b=m_bound):
            return (sizes[i] if sizes is not None else _b) * log_L

        res = run_batch(_liouville_seed, seeds, workers,
                        (mu, n, t0, rho, H, S_set, U_set, lamp_log, budget))
        p, se = _freq([r["member"] for r in res])
        EW = float(np.mean([r["W_size"] for r in res]))
        tails = [special.zeta(growth / 2, n - i * t0 + 1) for i in range(1, s_n + 1)]
        W_budget = float(sum(min(1.0, m_bound * c_hat * tl) for tl in tails))
        rows.append({
            "n": n, "capture_freq": p, "capture_se": se,
            "log_size_per_n": sum(factors.values()) / n,
            "log_S_U_per_n": (factors["S"] + factors["U"]) / n,
            "freq_S": _freq([r["S"] for r in res])[0],
            "freq_U": _freq([r["U"] for r in res])[0],
            "freq_W_small": _freq([r["W_ok"] for r in res])[0],
            "freq_iv": _freq([r["iv"] for r in res])[0],
            "mean_W": EW, "W_budget": W_budget,
            "realized_lamp_log_per_n": float(np.mean([r["realized_lamp_log"] for r in res])) / n,
            **{f"log_{k}": v for k, v in factors.items()},
        })
    last = rows[-1]
    verdicts = {
        "S_U_below_2eps": all(r["log_S_U_per_n"] < 2 * eps for r in rows),
        "size_below_3eps_at_largest_n": last["log_size_per_n"] < 3 * eps,
        "membership_majority_at_largest_n": last["capture_freq"] > 0.5,
        "W_within_3x_budget": all(r["mean_W"] <= 3 * r["W_budget"] for r in rows),
    }
    params = {"eps": eps, "t0": t0, "rho": rho, "n_grid": n_grid, "future_factor": future_factor,
              "seeds": len(seeds), "H_X_t0": H_t0, "H_u": H_u, "block_bound": m_bound,
              "heat_constant": c_hat, "growth_degree": growth}
    notes = ["W is computed from visits up to n (1 + future_factor)",
             "lamp factor uses the per-block bound; o(n) only asymptotically"]
    return HarnessReport("liouville", params, rows, verdicts, notes)


# ---------------------------------------------------------------------------
# non-Liouville free base


def free_speed(mu: StepDistribution, n: int, walks: int = 10_000, seed: int = 0) -> float:
    """Monte Carlo ``E|X_n| / n`` for a (lazy) simple projection on ``F_k``."""
    model = mu.model
    hold = _is_lazy_simple(model, mu.projection())
    if hold is None:
        raise HarnessError("speed estimate needs a (lazy) simple projection")
    k = 2 * model.k
    down = (1 - hold) / k
    probs = np.array([down, hold, 1 - hold - down])
    rng = RngStream(seed).gen
    D = np.zeros(walks, dtype=np.int64)
    steps = np.array([-1, 0, 1])
    for _ in range(n):
        s = steps[np.searchsorted(np.cumsum(probs), rng.random(walks), side="right").clip(0, 2)]
        s = np.where(D == 0, np.where(s == 0, 0, 1), s)
        D += s
    return float(D.mean() / n)


def _nonliouville_seed(seed, mu, n, m, r_W, H, U_set, eps):
    L = mu.L
    t = simulate(mu, H, seed)
    wl = t.word_lengths()
    A = bool(wl[: n + 1].max() <= r_W)
    D = bool(len(wl) <= n + m + 1 or wl[n + m + 1:].min() > r_W)
    Phi_n = t.lamp_config_at(n)
    Phi_H = t.final_config()
    in_W = {z for z in Phi_H if len(z) <= r_W}
    support_ok = len(in_W) <= n + 3 * eps * n
    x = t.position(n)
    iii = x in in_W
    U = [int(i) for i in t.idx[n: n + m]]
    U_ok = U_set.contains(U)
    # psi from the increments of U started at x
    psi: dict = {}
    z = x
    model = mu.model
    for i in U:
        a = mu.atoms[i]
        for s, v in a.lamps.items():
            site = model.mul(z, s)
            psi[site] = L.mul(psi.get(site, 0), v)
        z = model.mul(z, a.pos)
    ok_iv = True
    for site in set(Phi_n) | set(Phi_H) | set(psi):
        if len(site) <= r_W:
            guess = L.mul(Phi_H.get(site, 0), L.inv(psi.get(site, 0)))
        else:
            guess = 0
        if Phi_n.get(site, 0) != guess:
            ok_iv = False
            break
    return {"A": A, "D": D, "support": support_ok, "iii": iii, "U": U_ok, "iv": ok_iv,
            "member": bool(U_ok and support_ok and iii and ok_iv), "W_supp": len(in_W)}


def nonliouville_pipeline(mu: StepDistribution, eps: float, n_grid: Sequence[int] | int,
                          seeds: Iterable[int] = range(100), speed: float | None = None,
                          horizon_factor: int = 10, speed_walks: int = 10_000,
                          workers: int = 1) -> HarnessReport:
    """Events ``A_n``, ``D_n``, the support count and membership for the
    free-base construction with ``W = {rho(x) <= n h' (1 + eps)}``."""
    model = mu.model
    if isinstance(model, (Lattice, Heisenberg)):
        raise HarnessError("lattice and Heisenberg bases are Liouville; use liouville_pipeline")
    if not isinstance(model, FreeGroup):
        raise HarnessError("nonliouville_pipeline needs a free base")
    if not mu.is_standard():
        raise HarnessError("nonliouville_pipeline needs standard generators")
    if _is_lazy_simple(model, mu.projection()) is None:
        raise HarnessError("analytic Green metric needs a (lazy) simple projection")
    if not 0 < eps < 1 / 3:
        raise HarnessError("need 0 < eps < 1/3")
    n_grid = [n_grid] if isinstance(n_grid, int) else sorted(int(n) for n in n_grid)
    seeds = list(seeds)
    lg = math.log(2 * model.k - 1)
    H1 = mu.entropy()
    rows = []
    speeds = {}
    for n in n_grid:
        v = speed if speed is not None else free_speed(mu, n, speed_walks, seed=10 ** 9 + n)
        speeds[n] = v
        h_prime = v * lg
        r_W = int(math.floor(n * h_prime * (1 + eps) / lg + 1e-9))
        m = int(math.floor(3 * eps * n))
        U_set = typical_set_build({i: float(p) for i, p in enumerate(mu.probs)}, m, H1 / 2)
        H = horizon_factor * n
        res = run_batch(_nonliouville_seed, seeds, workers, (mu, n, m, r_W, H, U_set, eps))
        p, se = _freq([r["member"] for r in res])
        factors = {"U": U_set.log_size_bound(), "positions": math.log(n + 3 * eps * n)}
        rows.append({
            "n": n, "capture_freq": p, "capture_se": se,
            "log_size_per_n": sum(factors.values()) / n,
            "budget_formula_per_n": (6 * eps * n * H1 + math.log(2 * n)) / n,
            "W_radius": r_W, "h_prime": h_prime,
            "freq_A": _freq([r["A"] for r in res])[0],
            "freq_D": _freq([r["D"] for r in res])[0],
            "freq_support": _freq([r["support"] for r in res])[0],
            "freq_support_given_D": _cond_freq([r["support"] for r in res], [r["D"] for r in res]),
            "freq_x_in_supp": _freq([r["iii"] for r in res])[0],
            "freq_U": _freq([r["U"] for r in res])[0],
            "freq_iv": _freq([r["iv"] for r in res])[0],
            **{f"log_{k}": v for k, v in factors.items()},
        })
    verdicts = {
        "size_below_6eps_H": all(r["log_size_per_n"] < 6 * eps * H1 + 1e-12 + math.log(2 * r["n"]) / r["n"]
                                 for r in rows),
        "capture_positive": all((r["capture_freq"] or 0) > 0 for r in rows),
    }
    params = {"eps": eps, "n_grid": n_grid, "horizon_factor": horizon_factor, "seeds": len(seeds),
              "speed": {str(k): v for k, v in speeds.items()}, "entropy_step": H1,
              "speed_source": "supplied" if speed is not None else "monte_carlo"}
    notes = ["W is the word ball of radius n * speed * (1 + eps) (exact Green metric on the tree)",
             "D_n and the support count are evaluated up to the horizon"]
    return HarnessReport("non_liouville", params, rows, verdicts, notes)


# ---------------------------------------------------------------------------
# lattice base with finite second moment: covariance balls


def count_ellipsoid(Q: np.ndarray, R: float) -> int:
    """Number of ``z in Z^d`` with ``z^T Q z <= R^2`` (``Q`` positive definite)."""
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[0]
    R2 = R * R
    a = Q[-1, -1]
    if d == 1:
        return 2 * int(math.floor(math.sqrt(R2 / a) + 1e-9)) + 1
    Qi = np.linalg.inv(Q)
    bounds = [int(math.floor(R * math.sqrt(Qi[i, i]) + 1e-9)) for i in range(d - 1)]
    axes = [np.arange(-b, b + 1) for b in bounds]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d - 1).astype(float)
    b = X @ Q[-1, :-1]
    c = np.einsum("ij,jk,ik->i", X, Q[:-1, :-1], X)
    disc = b * b - a * (c - R2)
    ok = disc >= -1e-9
    root = np.sqrt(np.maximum(disc[ok], 0.0))
    lo = np.ceil((-b[ok] - root) / a - 1e-9)
    hi = np.floor((-b[ok] + root) / a + 1e-9)
    return int(np.maximum(hi - lo + 1, 0).sum())


def _atom_radii(mu: StepDistribution, cov: np.ndarray) -> np.ndarray:
    """Radius of each atom's lamp support in the covariance norm."""
    out = np.zeros(len(mu))
    for i, a in enumerate(mu.atoms):
        if isinstance(a.lamps, BallLamps):
            Qb = np.array(a.lamps.quad, dtype=float)
            lam = np.linalg.eigvals(np.linalg.solve(Qb, cov)).real.max()
            out[i] = a.lamps.radius * math.sqrt(lam)
        elif a.lamps:
            z = np.array(list(a.lamps), dtype=float)
            out[i] = float(np.sqrt(np.einsum("ij,jk,ik->i", z, cov, z)).max())
    return out


def _ball_seed(seed, mu, n, m, s, H, U_set, cov, rad):
    L = mu.L
    t = simulate(mu, H, seed)
    P = t.positions.astype(float)
    nrm = np.sqrt(np.einsum("ij,jk,ik->i", P, cov, P))
    R1 = s * math.sqrt(n)
    R2 = 2 * R1
    A = bool(nrm[: n + 1].max() <= R1)
    C = bool(n > 0 and rad[t.idx[:n]].max() > R1)
    sites = _event_sites(t).astype(float)
    ev_n = np.sqrt(np.einsum("ij,jk,ik->i", sites, cov, sites)) if len(sites) else np.zeros(0)
    bt = t.ball_time
    if len(bt):
        bc = t.ball_centre.astype(float)
        bc_n = np.sqrt(np.einsum("ij,jk,ik->i", bc, cov, bc))
        br = rad[t.idx[bt - 1]]
    explicit = not t.has_ball_atoms
    if explicit:
        Phi_n = t.lamp_config_at(n)
        D = all(math.sqrt(np.dot(np.dot(z, cov), z)) <= R2 for z in Phi_n)
    else:
        # no lamp changed outside B(2 s sqrt n) up to time n (implies D_n)
        early = t.ev_time <= n
        D = not np.any(early & (ev_n > R2) & (t.ev_old != t.ev_new))
        if len(bt):
            D = D and bool(np.all((bc_n + br)[bt <= n] <= R2))
    E = bool(np.sqrt(np.dot(np.dot(P[n + m] - P[n], cov), P[n + m] - P[n])) > 5 * R1)
    tail = nrm[n + m + 1:]
    F = bool(len(tail) == 0 or tail.min() > R2)
    late = t.ev_time > n + m
    G = not np.any(late & (ev_n <= R2))
    if len(bt):
        G = G and not np.any((bt > n + m) & (bc_n - br <= R2))
    member = None
    U_ok = U_set.contains([int(i) for i in t.idx[n: n + m]])
    if explicit:
        Phi_H = t.final_config()
        model = mu.model
        psi: dict = {}
        z = t.position(n)
        for i in t.idx[n: n + m].tolist():
            a = mu.atoms[i]
            for site, v in a.lamps.items():
                w = model.mul(z, site)
                psi[w] = L.mul(psi.get(w, 0), v)
            z = model.mul(z, a.pos)
        ok = True
        for site in set(Phi_n) | set(Phi_H) | set(psi):
            zz = np.array(site, dtype=float)
            if math.sqrt(zz @ cov @ zz) <= R2:
                guess = L.mul(Phi_H.get(site, 0), L.inv(psi.get(site, 0)))
            else:
                guess = 0
            if Phi_n.get(site, 0) != guess:
                ok = False
                break
        member = bool(U_ok and nrm[n] <= R1 and ok)
    return {"A": A, "C": C, "D": D, "E": E, "F": F, "G": G, "U": U_ok, "member": member}


def ball_pipeline(mu: StepDistribution, eps: float, s: float, n_grid: Sequence[int] | int,
                  seeds: Iterable[int] = range(100), horizon_factor: int = 20,
                  escape_walks: int = 0, escape_horizon: int = 10 ** 7,
                  workers: int = 1) -> HarnessReport:
    """Events ``A_n .. G_n`` and membership for the covariance-ball construction."""
    model = _require_lattice(mu.model, 3)
    _check_centred(mu)
    if not 0 < eps < 1:
        raise HarnessError("need 0 < eps < 1")
    n_grid = [n_grid] if isinstance(n_grid, int) else sorted(int(n) for n in n_grid)
    seeds = list(seeds)
    cov = np.array([[float(c) for c in row] for row in mu.projection().covariance()])
    rad = _atom_radii(mu, cov)
    rad2 = float(np.dot(mu.probs, rad ** 2))
    try:
        rad2_full = float(mu.projection_stats().lamp_radius_moment(2))
    except (MeasureError, ValueError):
        rad2_full = None
    H1 = mu.entropy()
    d = model.d
    rows = []
    for n in n_grid:
        m = int(math.floor(eps * n))
        U_set = typical_set_build({i: float(p) for i, p in enumerate(mu.probs)}, m, H1 / 2)
        H = max(horizon_factor * n, n + m + 1)
        res = run_batch(_ball_seed, seeds, workers, (mu, n, m, s, H, U_set, cov, rad))
        R1 = s * math.sqrt(n)
        pos = count_ellipsoid(cov, R1)
        factors = {"U": U_set.log_size_bound(), "positions": math.log(pos)}
        p, se = _freq([r["member"] for r in res])
        ev = {k: [r[k] for r in res] for k in "ACDEFG"}
        ADE = [a and dd and e for a, dd, e in zip(ev["A"], ev["D"], ev["E"])]
        row = {
            "n": n, "capture_freq": p, "capture_se": se,
            "log_size_per_n": sum(factors.values()) / n,
            "budget_formula_per_n": (2 * eps * n * H1 + d / 2 * math.log(n)) / n,
            **{f"freq_{k}": _freq(v)[0] for k, v in ev.items()},
            "freq_AD": _freq([a and dd for a, dd in zip(ev["A"], ev["D"])])[0],
            "count_ADE": int(sum(ADE)),
            "freq_F_given_ADE": _cond_freq(ev["F"], ADE),
            "freq_U": _freq([r["U"] for r in res])[0],
            "chebyshev_C_bound": rad2 / s ** 2,
            **{f"log_{k}": v for k, v in factors.items()},
        }
        if escape_walks:
            base = mu.projection()
            start = cov_norm_start(base, 4 * R1)
            rep = escape_probability(base, start, 2 * R1, "cov", escape_horizon, escape_walks,
                                     seed=seeds[0] + 7 * n)
            row["escape_from_4s_to_2s"] = rep.estimate
        rows.append(row)
    verdicts = {
        "A_minus_C_above_half": all(r["freq_A"] - r["freq_C"] > 0.5 for r in rows),
        "capture_positive": all((r["capture_freq"] or 0) > 0 for r in rows),
    }
    params = {"eps": eps, "s": s, "n_grid": n_grid, "horizon_factor": horizon_factor,
              "seeds": len(seeds), "entropy_step": H1, "rad2_truncated": rad2,
              "rad2_untruncated": rad2_full, "target_F": 1 - 2.0 ** (2 - d), "cap": mu.cap}
    notes = ["F_n and G_n are evaluated up to the horizon",
             "E_n is rare at desk-scale n; escape_from_4s_to_2s starts on the boundary instead"]
    if any(isinstance(a.lamps, BallLamps) for a in mu.atoms):
        notes.append("ball atoms: D_n and G_n use ball-overlap tests; membership not evaluated")
    return HarnessReport("ball_2nd_moment", params, rows, verdicts, notes)


# ---------------------------------------------------------------------------
# trees with a fixed end


MAX_TREE_RANGE = 64


@dataclass(frozen=True)
class TreeAtom:
    """Change the lamp ``lamp_up`` levels above the walker by ``lamp_value``,
    then move up ``move_up`` levels and down ``move_down`` levels to a
    uniformly chosen descendant."""

    p: Fraction
    lamp_up: int = 0
    lamp_value: int = 0
    move_up: int = 0
    move_down: int = 0

    @property
    def reach(self) -> int:
        return max(self.move_up + self.move_down, self.lamp_up if self.lamp_value else 0)


@dataclass(frozen=True)
class TreeKernel:
    """Affine-invariant lamplighter chain on ``L wr T_d``."""

    d: int
    L: LampGroup
    atoms: tuple

    def __post_init__(self):
        if self.d < 3:
            raise HarnessError("tree degree must be >= 3")
        total = sum(a.p for a in self.atoms)
        if total != 1:
            raise HarnessError(f"kernel probabilities sum to {total}")
        for a in self.atoms:
            for v in (a.lamp_up, a.move_up, a.move_down):
                if not isinstance(v, int) or v < 0:
                    raise HarnessError("unbounded-range kernel: steps must be finite integers >= 0")
            if a.p < 0:
                raise HarnessError("negative kernel probability")
            self.L.check(a.lamp_value)
        if self.range > MAX_TREE_RANGE:
            raise HarnessError(f"unbounded-range kernel: range {self.range} > {MAX_TREE_RANGE}")
        if self.drift != 0:
            raise HarnessError(f"drifting kernel: E[d_xi(X_1)] = {self.drift}")
        if all(a.move_up == 0 and a.move_down == 0 for a in self.atoms if a.p > 0):
            raise HarnessError("the projected walk is constant")

    @property
    def range(self) -> int:
        return max(a.reach for a in self.atoms if a.p > 0)

    @property
    def drift(self) -> Fraction:
        return sum(a.p * (a.move_down - a.move_up) for a in self.atoms)

    @property
    def probs(self) -> np.ndarray:
        return np.array([float(a.p) for a in self.atoms])

    @property
    def nearest_neighbor(self) -> bool:
        return all(a.move_up + a.move_down <= 1 and (a.lamp_value == 0 or a.lamp_up == 0)
                   for a in self.atoms if a.p > 0)

    def to_json(self) -> dict:
        return {"d": self.d, "lamp_group": self.L.name,
                "atoms": [{"p": str(a.p), "lamp_up": a.lamp_up, "lamp_value": a.lamp_value,
                           "move_up": a.move_up, "move_down": a.move_down} for a in self.atoms]}


def tree_kernel(spec: Mapping) -> TreeKernel:
    allowed = {"d", "lamp_group", "atoms"}
    extra = set(spec) - allowed
    if extra:
        raise HarnessError(f"unknown tree kernel key(s): {sorted(extra)}")
    atoms = []
    for row in spec.get("atoms", []):
        bad = set(row) - {"p", "lamp_up", "lamp_value", "move_up", "move_down"}
        if bad:
            raise HarnessError(f"unknown tree atom key(s): {sorted(bad)}")
        vals = {}
        for k in ("lamp_up", "lamp_value", "move_up", "move_down"):
            v = row.get(k, 0)
            if isinstance(v, float) and math.isinf(v) or v in ("inf", None):
                raise HarnessError("unbounded-range kernel: infinite step")
            vals[k] = int(v)
        atoms.append(TreeAtom(Fraction(str(row["p"])), **vals))
    if not atoms:
        raise HarnessError("tree kernel needs atoms")
    return TreeKernel(int(spec.get("d", 3)), lamp_group(spec.get("lamp_group", "Z2")), tuple(atoms))


def nearest_neighbor_tree_kernel(d: int = 3, lamp: str = "Z2") -> TreeKernel:
    third = Fraction(1, 3)
    return TreeKernel(d, lamp_group(lamp), (TreeAtom(third, 0, 1, 0, 0), TreeAtom(third, 0, 0, 1, 0),
                                            TreeAtom(third, 0, 0, 0, 1)))


def _chain_step(kernel: TreeKernel, rng, m: np.ndarray, Lw: np.ndarray, cdf: np.ndarray,
                ups: np.ndarray, downs: np.ndarray) -> None:
    """One step of the (anchor, depth-below-anchor) chain, in place."""
    k = len(m)
    i = np.searchsorted(cdf, rng.random(k), side="right").clip(0, len(cdf) - 1)
    u, v = ups[i], downs[i]
    for j in range(int(u.max()) if k else 0):
        act = u > j
        top = act & (Lw == 0)
        m[top] += 1
        Lw[act & ~top] -= 1
    for j in range(int(v.max()) if k else 0):
        act = v > j
        spine = act & (Lw == 0) & (m > 0) & (rng.random(k) < 1.0 / (kernel.d - 1))
        m[spine] -= 1
        Lw[act & ~spine] += 1


def _chain_arrays(kernel: TreeKernel):
    cdf = np.cumsum(kernel.probs)
    cdf[-1] = 1.0
    ups = np.array([a.move_up for a in kernel.atoms])
    downs = np.array([a.move_down for a in kernel.atoms])
    return cdf, ups, downs


def tree_escape_alpha(kernel: TreeKernel, walks: int = 10_000, horizon: int = 10_000,
                      seed: int = 0) -> tuple[float, float]:
    """``P_o[X_j != o for all 1 <= j <= horizon]`` and its standard error."""
    rng = RngStream(seed).gen
    cdf, ups, downs = _chain_arrays(kernel)
    m = np.zeros(walks, dtype=np.int64)
    Lw = np.zeros(walks, dtype=np.int64)
    alive = np.ones(walks, dtype=bool)
    idx = np.arange(walks)
    for _ in range(horizon):
        if not len(idx):
            break
        mm, ll = m[idx], Lw[idx]
        _chain_step(kernel, rng, mm, ll, cdf, ups, downs)
        m[idx], Lw[idx] = mm, ll
        back = (mm == 0) & (ll == 0)
        alive[idx[back]] = False
        idx = idx[~back]
    p = float(alive.mean())
    return p, math.sqrt(p * (1 - p) / walks)


def tree_end_convergence(kernel: TreeKernel, N: int = 10 ** 4, factor: int = 10, walks: int = 1000,
                         seed: int = 0) -> float:
    """Fraction of walks that stay outside the cone ``C_1`` during ``[N, factor N]``."""
    rng = RngStream(seed).gen
    cdf, ups, downs = _chain_arrays(kernel)
    m = np.zeros(walks, dtype=np.int64)
    Lw = np.zeros(walks, dtype=np.int64)
    ok = np.ones(walks, dtype=bool)
    for step in range(1, factor * N + 1):
        _chain_step(kernel, rng, m, Lw, cdf, ups, downs)
        if step >= N:
            ok &= m > 1
    return float(ok.mean())


def tree_t_max(kernel: TreeKernel, walks: int = 2000, horizon: int = 2000, seed: int = 0) -> int:
    """Smallest ``t`` with ``P_x[X_s not in K_0 for all s >= t] > 1/2`` for
    every ``x`` in the ball ``K_0`` of radius ``R`` about ``o`` (estimated,
    horizon-truncated)."""
    R = kernel.range
    tree = Tree(kernel.d)
    starts = sorted({(m, len(w)) for m, w in tree.ball_around(tree.identity, R)})
    cdf, ups, downs = _chain_arrays(kernel)
    rng = RngStream(seed).gen
    t_max = 0
    for m0, l0 in starts:
        m = np.full(walks, m0, dtype=np.int64)
        Lw = np.full(walks, l0, dtype=np.int64)
        last = np.zeros(walks, dtype=np.int64)
        for step in range(1, horizon + 1):
            _chain_step(kernel, rng, m, Lw, cdf, ups, downs)
            last[m + Lw <= R] = step
        t_x = int(np.sort(last)[walks // 2]) + 1
        t_max = max(t_max, t_x)
    return t_max


@dataclass
class TreeRun:
    pos: np.ndarray
    ev_time: np.ndarray
    ev_node: list
    ev_old: list
    ev_new: list
    anchor: np.ndarray
    level: np.ndarray
    spine: list


def tree_run(kernel: TreeKernel, H: int, seed: int) -> TreeRun:
    rng = RngStream(seed)
    cdf = np.cumsum(kernel.probs)
    cdf[-1] = 1.0
    idx = rng.choice_index(cdf, H).tolist()
    max_down = max(a.move_down for a in kernel.atoms)
    labels = rng.gen.integers(0, kernel.d - 1, size=(H, max(max_down, 1))).tolist()
    table = kernel.L.table
    atoms = kernel.atoms
    arena = TreeArena(kernel.d)
    v = 0
    pos = [0] * (H + 1)
    state: dict = {}
    ev_t, ev_v, ev_o, ev_n = [], [], [], []
    for k in range(H):
        a = atoms[idx[k]]
        if a.lamp_value:
            s = v
            for _ in range(a.lamp_up):
                s = arena.parent(s)
            old = state.get(s, 0)
            new = int(table[old, a.lamp_value])
            if new:
                state[s] = new
            else:
                state.pop(s, None)
            ev_t.append(k + 1)
            ev_v.append(s)
            ev_o.append(old)
            ev_n.append(new)
        for _ in range(a.move_up):
            v = arena.parent(v)
        lab = labels[k]
        for j in range(a.move_down):
            v = arena.child(v, lab[j])
        pos[k + 1] = v
    return TreeRun(np.array(pos, dtype=np.int64), np.array(ev_t, dtype=np.int64), ev_v, ev_o, ev_n,
                   np.array(arena.anchor, dtype=np.int64), np.array(arena.level, dtype=np.int64),
                   list(arena.spine))


def tree_capture_times(run: TreeRun, n: int, N: int, radius_A: int | None) -> np.ndarray:
    """Times ``m >= n`` with ``X_hat_m`` in the cone construction at level ``N``.

    ``radius_A=None`` is the singleton ``{(phi_N, xi_N)}``; otherwise the
    position ranges over the ball ``A`` of that radius about ``xi_N`` and
    lamps in ``A`` are free.
    """
    anchor, level = run.anchor, run.level
    depth = level + anchor
    in_C = anchor <= N
    if radius_A is None:
        if len(run.spine) <= N:
            return np.zeros(0, dtype=np.int64)
        in_P = np.zeros(len(anchor), dtype=bool)
        in_P[run.spine[N]] = True
        free = np.zeros(len(anchor), dtype=bool)
    else:
        free = depth + np.abs(anchor - N) <= radius_A
        in_P = free
    inner = in_C & ~free
    outer = ~in_C & ~free
    nodes = run.ev_node
    lit = _lit_max([1 if outer[v] else -1 for v in nodes], run.ev_old, run.ev_new)
    mis = _mismatch_min(nodes, [0 if inner[v] else -1 for v in nodes], run.ev_old, run.ev_new)
    ms = np.arange(n, len(run.pos))
    j = np.searchsorted(run.ev_time, ms, side="right")
    ok = in_P[run.pos[ms]] & (lit[j] < 1) & (mis[j] > 0)
    return ms[ok]


def _tree_seed(seed, kernel, n_grid, H, construction, t_max):
    run = tree_run(kernel, H, seed)
    out = {}
    R = kernel.range
    for n in n_grid:
        if construction == "singleton":
            times = tree_capture_times(run, n, n, None)
        else:
            times = tree_capture_times(run, n, R * n, R * (t_max + 1))
        out[n] = len(times) > 0
    return out


def tree_sava_harness(kernel: TreeKernel, n_grid: Sequence[int], seeds: Iterable[int] = range(200),
                      horizon_factor: int = 200, construction: str = "auto",
                      alpha_walks: int = 10_000, alpha_horizon: int = 10_000,
                      diag_N: int = 10 ** 4, diag_walks: int = 500, t_max: int | None = None,
                      workers: int = 1) -> HarnessReport:
    """Capture frequencies of the cone constructions on ``L wr T_d``."""
    if construction == "auto":
        construction = "singleton" if kernel.nearest_neighbor else "bounded_range"
    if construction not in ("singleton", "bounded_range"):
        raise HarnessError(f"unknown tree construction {construction!r}")
    if construction == "singleton" and not kernel.nearest_neighbor:
        raise HarnessError("the singleton construction needs a nearest-neighbour kernel")
    n_grid = sorted(int(n) for n in n_grid)
    seeds = list(seeds)
    R = kernel.range
    if construction == "bounded_range" and t_max is None:
        t_max = tree_t_max(kernel, seed=seeds[0] + 1)
    scale = n_grid[-1] * (R if construction == "bounded_range" else 1)
    H = horizon_factor * scale * scale
    res = run_batch(_tree_seed, seeds, workers, (kernel, n_grid, H, construction, t_max))
    alpha, alpha_se = tree_escape_alpha(kernel, alpha_walks, alpha_horizon, seed=seeds[0] + 2)
    if construction == "singleton":
        factors = {"positions": 0.0, "lamps": 0.0}
    else:
        size_A = Tree(kernel.d).ball_size(R * (t_max + 1))
        factors = {"positions": math.log(size_A), "lamps": size_A * math.log(kernel.L.order)}
    log_Q = sum(factors.values())
    rows = []
    for n in n_grid:
        p, se = _freq([r[n] for r in res])
        rows.append({"n": n, "capture_freq": p, "capture_se": se, "log_size_per_n": log_Q / n,
                     "log_Q": log_Q, "alpha_hat": alpha})
    end_freq = tree_end_convergence(kernel, diag_N, 10, diag_walks, seed=seeds[0] + 3) if diag_N else None
    verdicts = {
        "size_bounded": len({r["log_Q"] for r in rows}) == 1,
        "capture_positive": all(r["capture_freq"] > 0 for r in rows),
    }
    params = {"kernel": kernel.to_json(), "n_grid": n_grid, "construction": construction,
              "horizon": H, "seeds": len(seeds), "range": R, "t_max": t_max,
              "alpha_hat": alpha, "alpha_se": alpha_se, "alpha_horizon": alpha_horizon,
              "end_convergence_N": diag_N, "end_convergence_freq": end_freq}
    notes = ["limit lamps approximated by Phi_H at the stated horizon",
             "alpha_hat is horizon-truncated (biased upward)",
             "end convergence: walk stays outside the cone C_1 during [N, 10 N]"]
    return HarnessReport("tree_cone", params, rows, verdicts, notes)
