"""Trajectories of lamplighter walks: positions, lamp histories, snapshots, censuses."""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .groups import (
    BaseModel, FreeGroup, Heisenberg, LampConfig, Lattice, WreathElem, wreath_identity,
    wreath_mul,
)
from .measures import BallLamps, RngStream, StepDistribution, build_measure, sample_indices


class ResourceCapError(RuntimeError):
    """A configured resource limit was exceeded."""


class SnapshotWindowError(ValueError):
    """A query falls outside the snapshot window, or the trajectory is too short."""


N_CHECKPOINTS = 64


# ---------------------------------------------------------------------------
# free-group positions


class FreeTrie:
    """Prefix tree of reduced words; node 0 is the empty word."""

    def __init__(self):
        self.parent = [-1]
        self.letter = [0]
        self.depth = [0]
        self.children: list[dict] = [{}]
        self._words = {0: ()}

    def step(self, v: int, c: int) -> int:
        if self.letter[v] == -c:
            return self.parent[v]
        nxt = self.children[v].get(c)
        if nxt is None:
            nxt = len(self.parent)
            self.parent.append(v)
            self.letter.append(c)
            self.depth.append(self.depth[v] + 1)
            self.children.append({})
            self.children[v][c] = nxt
        return nxt

    def walk(self, v: int, word: Sequence[int]) -> int:
        for c in word:
            v = self.step(v, c)
        return v

    def word(self, v: int) -> tuple:
        memo = self._words
        if v in memo:
            return memo[v]
        path = []
        while v not in memo:
            path.append(v)
            v = self.parent[v]
        w = memo[v]
        for u in reversed(path):
            w = w + (self.letter[u],)
            memo[u] = w
        return w

    def node(self, word: Sequence[int]) -> int:
        return self.walk(0, word)


# ---------------------------------------------------------------------------
# positions


def lattice_positions(moves: np.ndarray, idx: np.ndarray) -> np.ndarray:
    steps = moves[idx]
    out = np.zeros((len(idx) + 1, moves.shape[1]), dtype=np.int64)
    np.cumsum(steps, axis=0, out=out[1:])
    return out


def heisenberg_positions(moves: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Fold ``(x,y,z)(a,b,c) = (x+a, y+b, z+c+x b)`` with cumulative sums."""
    steps = moves[idx]
    out = np.zeros((len(idx) + 1, 3), dtype=np.int64)
    np.cumsum(steps[:, :2], axis=0, out=out[1:, :2])
    dz = steps[:, 2] + out[:-1, 0] * steps[:, 1]
    np.cumsum(dz, out=out[1:, 2])
    return out


# ---------------------------------------------------------------------------
# trajectories


class Trajectory:
    """Increments ``Y_1 .. Y_n`` (as atom indices) with derived positions and
    lamp change events.

    Lamp changes from atoms with explicit lamp functions are stored as events
    ``(time, site, old, new)``; ball-shaped lamp atoms are stored as
    ``(time, centre, radius, value)`` and resolved per queried site.
    """

    def __init__(self, mu: StepDistribution, idx: np.ndarray, seed: int | None = None,
                 max_support: int | None = None):
        self.mu = mu
        self.seed = seed
        self.idx = np.asarray(idx, dtype=np.int64)
        self.n = len(self.idx)
        self.model = mu.model
        self._trie: FreeTrie | None = None
        self._pos = None
        self._build_positions()
        self._build_lamp_events(max_support)
        self._checkpoints: list | None = None

    # -- positions

    def _build_positions(self):
        model = self.model
        if isinstance(model, Lattice):
            self._pos = lattice_positions(self.mu.arrays.moves, self.idx)
        elif isinstance(model, Heisenberg):
            self._pos = heisenberg_positions(self.mu.arrays.moves, self.idx)
        elif isinstance(model, FreeGroup):
            trie = FreeTrie()
            words = [a.pos for a in self.mu.atoms]
            ids = np.zeros(self.n + 1, dtype=np.int64)
            v = 0
            for k, i in enumerate(self.idx.tolist(), 1):
                v = trie.walk(v, words[i])
                ids[k] = v
            self._trie = trie
            self._pos = ids
        else:
            raise TypeError(f"trajectories are not supported on {model!r}")

    @property
    def positions(self) -> np.ndarray:
        """Lattice/Heisenberg: ``(n+1, dim)`` array; free group: trie node ids."""
        return self._pos

    @property
    def trie(self) -> FreeTrie | None:
        return self._trie

    def position(self, k: int):
        if not 0 <= k <= self.n:
            raise IndexError(f"time {k} outside [0, {self.n}]")
        if self._trie is not None:
            return self._trie.word(int(self._pos[k]))
        return tuple(int(c) for c in self._pos[k])

    def word_lengths(self) -> np.ndarray:
        """``|X_k|`` for ``k = 0 .. n``."""
        if isinstance(self.model, Lattice):
            return np.abs(self._pos).sum(axis=1)
        if self._trie is not None:
            depth = np.asarray(self._trie.depth)
            return depth[self._pos]
        return np.array([self.model.word_length(self.position(k)) for k in range(self.n + 1)])

    def increment(self, k: int) -> WreathElem:
        return self.mu.atoms[int(self.idx[k - 1])]

    # -- lamps

    def _site_point(self, k: int):
        return self.position(k)

    def _build_lamp_events(self, max_support):
        mu, model = self.mu, self.model
        L = mu.L
        arr = mu.arrays
        origin = arr.origin_lamp[self.idx]
        ball = arr.ball_radius[self.idx]
        times_local = np.nonzero(origin > 0)[0] + 1
        times_general = np.nonzero((origin < 0) & (ball < 0))[0] + 1
        times_ball = np.nonzero(ball >= 0)[0] + 1

        # (time, site, value) for lamp applications in time order
        apps: list = []
        if len(times_local):
            if self._trie is None:
                sites = list(map(tuple, self._pos[times_local - 1].tolist()))
            else:
                sites = [self._trie.word(int(v)) for v in self._pos[times_local - 1]]
            vals = origin[times_local - 1].tolist()
            apps = list(zip(times_local.tolist(), sites, vals))
        if len(times_general):
            extra = []
            for k in times_general.tolist():
                x = self.position(k - 1)
                for s, v in mu.atoms[int(self.idx[k - 1])].lamps.items():
                    extra.append((k, model.mul(x, s), v))
            apps = sorted(apps + extra, key=lambda e: e[0])

        state: dict = {}
        ev_t, ev_site, ev_old, ev_new = [], [], [], []
        mul = L.table
        for k, s, v in apps:
            old = state.get(s, 0)
            new = int(mul[old, v])
            if new:
                state[s] = new
            else:
                state.pop(s, None)
            ev_t.append(k)
            ev_site.append(s)
            ev_old.append(old)
            ev_new.append(new)
            if max_support is not None and len(state) > max_support:
                raise ResourceCapError(
                    f"lamp support exceeded {max_support} at time {k}")
        self.ev_time = np.array(ev_t, dtype=np.int64)
        self.ev_site = ev_site
        self.ev_old = np.array(ev_old, dtype=np.int64)
        self.ev_new = np.array(ev_new, dtype=np.int64)
        self._final_local = state
        self.ball_time = times_ball
        self.ball_radius = ball[times_ball - 1] if len(times_ball) else np.zeros(0, dtype=np.int64)
        self.ball_value = (np.array([mu.atoms[int(i)].lamps.value for i in self.idx[times_ball - 1]],
                                    dtype=np.int64) if len(times_ball) else np.zeros(0, dtype=np.int64))
        if len(times_ball):
            self.ball_centre = self._pos[times_ball - 1]
            quads = {mu.atoms[int(i)].lamps.quad for i in self.idx[times_ball - 1]}
            if len(quads) != 1:
                raise ValueError("ball atoms with different quadratic forms")
            self.ball_quad = np.array([[float(c) for c in row] for row in quads.pop()])
        else:
            self.ball_centre = np.zeros((0, 1), dtype=np.int64)
            self.ball_quad = None

    @property
    def has_ball_atoms(self) -> bool:
        return len(self.ball_time) > 0

    def _ensure_checkpoints(self):
        if self._checkpoints is not None:
            return
        step = max(1, math.ceil(self.n / N_CHECKPOINTS))
        cps = [(0, {}, 0)]
        state: dict = {}
        j = 0
        times = self.ev_time
        for t in range(step, self.n + 1, step):
            while j < len(times) and times[j] <= t:
                s, new = self.ev_site[j], int(self.ev_new[j])
                if new:
                    state[s] = new
                else:
                    state.pop(s, None)
                j += 1
            cps.append((t, dict(state), j))
        self._checkpoints = cps
        self._cp_times = [c[0] for c in cps]

    def lamp_config_at(self, k: int) -> LampConfig:
        """``Phi_k`` (lamp part of ``Y_1 ... Y_k``)."""
        if not 0 <= k <= self.n:
            raise IndexError(f"time {k} outside [0, {self.n}]")
        self._ensure_checkpoints()
        ci = bisect_right(self._cp_times, k) - 1
        t0, snap, j = self._checkpoints[ci]
        state = dict(snap)
        times = self.ev_time
        while j < len(times) and times[j] <= k:
            s, new = self.ev_site[j], int(self.ev_new[j])
            if new:
                state[s] = new
            else:
                state.pop(s, None)
            j += 1
        if self.has_ball_atoms:
            state = self._apply_balls(state, k)
        return LampConfig(state)

    def _apply_balls(self, state: dict, k: int) -> dict:
        L = self.mu.L
        if not L.abelian:
            raise NotImplementedError("ball atoms need an abelian lamp group")
        for j in range(int(np.searchsorted(self.ball_time, k, side="right"))):
            t = int(self.ball_time[j])
            lamps = self.mu.atoms[int(self.idx[t - 1])].lamps
            centre = tuple(int(c) for c in self.ball_centre[j])
            for z in lamps.materialize(self.model):
                site = tuple(a + b for a, b in zip(centre, z))
                # ball events interleave with local ones; the lamp group must be
                # abelian for this post-hoc application to be order independent
                new = L.mul(state.get(site, 0), lamps.value)
                if new:
                    state[site] = new
                else:
                    state.pop(site, None)
        return state

    def final_config(self) -> LampConfig:
        return self.lamp_config_at(self.n)

    def site_history(self, site) -> tuple[np.ndarray, np.ndarray]:
        """Times at which ``Phi(site)`` changes and the new values."""
        L = self.mu.L
        local_t = [int(t) for t, s in zip(self.ev_time, self.ev_site) if s == site]
        local_v = [int(self.ev_new[i]) for i, s in enumerate(self.ev_site) if s == site]
        if not self.has_ball_atoms:
            return np.array(local_t, dtype=np.int64), np.array(local_v, dtype=np.int64)
        hit = self.ball_hits(site)
        if not L.abelian:
            raise NotImplementedError("ball atoms need an abelian lamp group")
        # merge local applications (recovered from new/old) with ball applications
        apps = [(t, L.mul(L.inv(int(self.ev_old[i])), int(self.ev_new[i])))
                for i, (t, s) in enumerate(zip(self.ev_time, self.ev_site)) if s == site]
        apps += [(int(self.ball_time[j]), int(self.ball_value[j])) for j in np.nonzero(hit)[0]]
        apps.sort()
        val = 0
        ts, vs = [], []
        for t, a in apps:
            new = L.mul(val, a)
            if new != val:
                ts.append(t)
                vs.append(new)
            val = new
        return np.array(ts, dtype=np.int64), np.array(vs, dtype=np.int64)

    def ball_hits(self, site) -> np.ndarray:
        """Boolean mask over ball events: does the ball cover ``site``?"""
        z = np.asarray(site, dtype=float)
        diff = z[None, :] - self.ball_centre
        q = np.einsum("ij,jk,ik->i", diff, self.ball_quad, diff)
        r = self.ball_radius.astype(float)
        return q <= r * r + 1e-9

    # -- replay

    def wreath_fold(self, k: int) -> WreathElem:
        """Direct left-to-right product ``Y_1 ... Y_k`` with :func:`wreath_mul`."""
        g = wreath_identity(self.model)
        for j in range(1, k + 1):
            g = wreath_mul(self.mu.L, self.model, g, self.increment(j))
        return g


def simulate(mu: StepDistribution, n: int, seed: int, max_support: int | None = None) -> Trajectory:
    if n < 0:
        raise ValueError("n must be >= 0")
    idx = sample_indices(mu, RngStream(seed), n)
    return Trajectory(mu, idx, seed, max_support)


def lamp_config_at(t: Trajectory, n: int) -> LampConfig:
    return t.lamp_config_at(n)


# ---------------------------------------------------------------------------
# boundary snapshots


@dataclass(frozen=True)
class BoundarySnapshot:
    """Truncated approximation of the limiting lamp configuration."""

    radius: int
    horizon: int
    lamps: LampConfig
    stable: bool
    last_change: int | None

    def value(self, model: BaseModel, z) -> int:
        if model.word_length(z) > self.radius:
            raise SnapshotWindowError(f"site {z!r} outside snapshot window {self.radius}")
        return self.lamps.get(z, 0)


def final_config_snapshot(t: Trajectory, R: int, N_max: int) -> BoundarySnapshot:
    """Lamps of ``Phi_{N_max}`` on ``B(o, R)``; stable iff no lamp in the
    window changed during ``(N_max/2, N_max]``."""
    if t.n < N_max:
        raise SnapshotWindowError(f"trajectory length {t.n} < horizon {N_max}")
    model = t.model
    half = N_max / 2
    in_window = [model.word_length(s) <= R for s in t.ev_site]
    last = None
    state: dict = {}
    for i, ok in enumerate(in_window):
        tk = int(t.ev_time[i])
        if tk > N_max:
            break
        if not ok:
            continue
        last = tk
        s, new = t.ev_site[i], int(t.ev_new[i])
        if new:
            state[s] = new
        else:
            state.pop(s, None)
    if t.has_ball_atoms:
        window = _window_sites(model, R)
        state = {}
        last = None
        for z in window:
            ts, vs = t.site_history(z)
            keep = ts <= N_max
            ts, vs = ts[keep], vs[keep]
            if len(ts):
                last = max(last or 0, int(ts[-1]))
                if vs[-1]:
                    state[z] = int(vs[-1])
    stable = last is None or last <= half
    return BoundarySnapshot(R, N_max, LampConfig(state), stable, last)


def _window_sites(model: BaseModel, R: int) -> list:
    return model.ball(R)


# ---------------------------------------------------------------------------
# lamp censuses


@dataclass
class CensusReport:
    mode: str
    sites: list
    change_times: list            # one array per site (single) or one array (difference)

    def counts_at(self, N: int) -> list[int]:
        return [int(np.searchsorted(ts, N, side="right")) for ts in self.change_times]


def lamp_flip_census(t: Trajectory, sites: Sequence, mode: str = "single") -> CensusReport:
    if not isinstance(t.model, Lattice):
        raise TypeError("lamp census needs a lattice base")
    sites = [tuple(int(c) for c in s) for s in sites]
    if mode == "single":
        return CensusReport(mode, sites, [t.site_history(s)[0] for s in sites])
    if mode == "difference":
        if len(sites) != 2:
            raise ValueError("difference mode needs exactly two sites")
        L = t.mu.L
        (t1, v1), (t2, v2) = t.site_history(sites[0]), t.site_history(sites[1])
        merged = sorted([(int(a), 0, int(b)) for a, b in zip(t1, v1)]
                        + [(int(a), 1, int(b)) for a, b in zip(t2, v2)])
        cur = [0, 0]
        diff = 0
        times = []
        i = 0
        while i < len(merged):
            tk = merged[i][0]
            while i < len(merged) and merged[i][0] == tk:
                cur[merged[i][1]] = merged[i][2]
                i += 1
            new = L.mul(cur[0], L.inv(cur[1]))
            if new != diff:
                times.append(tk)
                diff = new
        return CensusReport(mode, sites, [np.array(times, dtype=np.int64)])
    raise ValueError(f"unknown census mode {mode!r}")


def ball_census_counts(mu: StepDistribution, n_checks: Sequence[int], seed: int,
                       sites: Sequence, chunk: int = 1 << 18) -> dict:
    """Streaming census for ball-lamp measures on a lattice.

    Returns per-site change counts and the change count of
    ``Phi(site0) Phi(site1)^{-1}`` at each time in ``n_checks`` without
    storing the trajectory.  Lamp group must be abelian; every atom is either
    a pure move or a ball lamp at the lamplighter.
    """
    L = mu.L
    if not L.abelian:
        raise NotImplementedError("streaming census needs an abelian lamp group")
    arr = mu.arrays
    if np.any((arr.origin_lamp != 0) & (arr.ball_radius < 0)):
        raise NotImplementedError("streaming census handles move and ball atoms only")
    rng = RngStream(seed)
    n_max = max(n_checks)
    sites = np.array(sites, dtype=float)
    quad = np.array([[float(c) for c in row] for row in
                     next(a.lamps.quad for a in mu.atoms if isinstance(a.lamps, BallLamps))])
    ball_val = np.array([a.lamps.value if isinstance(a.lamps, BallLamps) else 0 for a in mu.atoms])
    moves = arr.moves
    pos = np.zeros(moves.shape[1], dtype=np.int64)
    values = [0] * len(sites)
    diff = 0
    counts = np.zeros(len(sites), dtype=np.int64)
    dcount = 0
    checks = sorted(n_checks)
    out_counts, out_diff = {}, {}
    ci = 0
    done = 0
    while done < n_max:
        m = min(chunk, n_max - done)
        idx = sample_indices(mu, rng, m)
        steps = moves[idx]
        P = np.empty((m + 1, moves.shape[1]), dtype=np.int64)
        P[0] = pos
        np.cumsum(steps, axis=0, out=P[1:])
        P[1:] += pos
        r = arr.ball_radius[idx]
        bt = np.nonzero(r >= 0)[0]
        centres = P[bt].astype(float)          # X_{k-1} for increment k = done + bt + 1
        rr = r[bt].astype(float) ** 2
        hits = []
        for s in sites:
            diffv = s[None, :] - centres
            q = np.einsum("ij,jk,ik->i", diffv, quad, diffv)
            hits.append(q <= rr + 1e-9)
        hit_any = np.nonzero(np.logical_or.reduce(hits))[0] if len(bt) else np.zeros(0, int)
        ev_times = done + bt[hit_any] + 1
        # check points that fall inside this chunk with no events after them
        for e, j in zip(ev_times.tolist(), hit_any.tolist()):
            while ci < len(checks) and checks[ci] < e:
                out_counts[checks[ci]] = counts.tolist()
                out_diff[checks[ci]] = dcount
                ci += 1
            v = int(ball_val[idx[bt[j]]])
            for si in range(len(sites)):
                if hits[si][j]:
                    new = L.mul(values[si], v)
                    if new != values[si]:
                        counts[si] += 1
                    values[si] = new
            if len(sites) >= 2:
                nd = L.mul(values[0], L.inv(values[1]))
                if nd != diff:
                    dcount += 1
                diff = nd
        pos = P[-1].copy()
        done += m
        while ci < len(checks) and checks[ci] <= done:
            out_counts[checks[ci]] = counts.tolist()
            out_diff[checks[ci]] = dcount
            ci += 1
    return {"counts": out_counts, "difference": out_diff}


# ---------------------------------------------------------------------------
# persistence


TRAJ_FORMAT = "wreathwalk-traj/1"


def save_trajectory(t: Trajectory, path) -> None:
    model = t.model
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"format": TRAJ_FORMAT, "measure": t.mu.spec, "seed": t.seed},
                            sort_keys=True) + "\n")
        for k in range(1, t.n + 1):
            a = t.increment(k)
            rec = {"k": k, "move": model.point_to_json(a.pos)}
            if isinstance(a.lamps, BallLamps):
                rec["lamp_ops"] = []
                rec["lamp_ball"] = [a.lamps.radius, a.lamps.value]
            else:
                rec["lamp_ops"] = [[model.point_to_json(s), v] for s, v in a.lamps.items()]
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_trajectory(path, verify_seed: bool = True) -> Trajectory:
    """Rebuild a trajectory from its JSON-lines file.

    Increments are matched back to the measure's atoms; with
    ``verify_seed`` the sequence is also compared against a replay from the
    stored seed.
    """
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != TRAJ_FORMAT:
            raise ValueError(f"unsupported trajectory format {header.get('format')!r}")
        mu = build_measure(header["measure"])
        model = mu.model
        lookup = {}
        for i, a in enumerate(mu.atoms):
            if isinstance(a.lamps, BallLamps):
                key = ("ball", a.lamps.radius, a.lamps.value, a.pos)
            else:
                key = (a.lamps, a.pos)
            lookup[key] = i
        idx = []
        for line in fh:
            rec = json.loads(line)
            if rec["k"] != len(idx) + 1:
                raise ValueError(f"increment index {rec['k']} out of sequence")
            pos = model.point_from_json(rec["move"])
            if "lamp_ball" in rec:
                key = ("ball", rec["lamp_ball"][0], rec["lamp_ball"][1], pos)
            else:
                key = (LampConfig({model.point_from_json(s): v for s, v in rec["lamp_ops"]}), pos)
            if key not in lookup:
                raise ValueError(f"increment {rec['k']} is not an atom of the measure")
            idx.append(lookup[key])
    t = Trajectory(mu, np.array(idx, dtype=np.int64), header.get("seed"))
    if verify_seed and header.get("seed") is not None:
        ref = sample_indices(mu, RngStream(header["seed"]), t.n)
        if not np.array_equal(ref, t.idx):
            raise ValueError("stored increments do not match the replay from the seed")
    return t


# ---------------------------------------------------------------------------
# batches


def run_batch(fn: Callable, seeds: Iterable[int], workers: int = 1, args: tuple = ()) -> list:
    """``[fn(seed, *args) for seed in seeds]`` with results in seed order.

    With ``workers > 1`` the calls run in a process pool; the reduction order
    is always the seed order, so results do not depend on scheduling.
    """
    seeds = list(seeds)
    if workers <= 1 or len(seeds) < 2:
        return [fn(s, *args) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(fn, s, *args) for s in seeds]
        return [f.result() for f in futs]
