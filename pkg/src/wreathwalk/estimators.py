"""Estimators: entropy, typical sets, Green metric, heat kernel, escape, cutpoints, cut-spheres."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from . import _lattice
from .groups import BaseModel, EnumerationCapError, FreeGroup, Lattice, WreathElem, wreath_identity, wreath_mul
from .measures import BaseMeasure, RngStream, StepDistribution, sample_indices
from .walk import Trajectory


@dataclass
class EstimateReport:
    estimate: float
    n_samples: int
    stderr: float | None
    method: str
    params: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    notes: str = ""

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("sample count must be positive")

    def to_json(self) -> dict:
        d = asdict(self)
        d["estimate"] = _json_float(self.estimate)
        d["stderr"] = _json_float(self.stderr)
        return d


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def frequency_report(hits: int, n: int, method: str, params: Mapping, notes: str = "") -> EstimateReport:
    p = hits / n
    return EstimateReport(p, n, math.sqrt(max(p * (1 - p), 0.0) / n), method, dict(params), [], notes)


# ---------------------------------------------------------------------------
# entropy


def entropy_of_probs(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def _counts(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        arr = samples.reshape(len(samples), -1) if samples.ndim > 1 else samples
        _, c = np.unique(arr, axis=0, return_counts=True) if arr.ndim > 1 else np.unique(arr, return_counts=True)
        return c
    return np.array(list(Counter(samples).values()))


def plugin_entropy(samples, correction: str = "none", saturation: float = 0.9) -> EstimateReport:
    """Plug-in entropy (nats) of the empirical distribution.

    ``correction="miller_madow"`` adds ``(K - 1) / (2N)``.  The standard error
    is the delta-method value ``sqrt(Var(-log p_hat) / N)``.  When the
    number of distinct values ``K`` reaches ``saturation * N`` the report is
    flagged ``undersampled``.
    """
    counts = _counts(samples)
    N = int(counts.sum())
    if N == 0:
        raise ValueError("need at least one sample")
    K = len(counts)
    p = counts / N
    logp = np.log(p)
    H = float(-np.sum(p * logp))
    var = float(np.sum(p * logp ** 2) - H ** 2)
    if correction == "miller_madow":
        H += (K - 1) / (2 * N)
    elif correction != "none":
        raise ValueError(f"unknown correction {correction!r}")
    flags = ["undersampled"] if K >= saturation * N and N > 1 else []
    return EstimateReport(H, N, math.sqrt(max(var, 0.0) / N), f"plugin/{correction}",
                          {"distinct": K}, flags)


def element_key(model: BaseModel, g: WreathElem) -> tuple:
    return (g.pos, frozenset(g.lamps.items()))


def exact_distribution(mu: StepDistribution, n: int, what: str = "full", cap: int = 2_000_000) -> dict:
    """Exact law of ``X_n`` by direct convolution (keys as in :func:`sample_elements`)."""
    model, L = mu.model, mu.L
    if what == "projection":
        dist = {model.identity: 1.0}
        for _ in range(n):
            nxt: dict = {}
            for x, p in dist.items():
                for a, q in zip(mu.atoms, mu.probs):
                    y = model.mul(x, a.pos)
                    nxt[y] = nxt.get(y, 0.0) + p * q
            dist = nxt
            if len(dist) > cap:
                raise EnumerationCapError("exact distribution exceeds cap")
        return dist
    dist = {wreath_identity(model): 1.0}
    for _ in range(n):
        nxt = {}
        for g, p in dist.items():
            for a, q in zip(mu.atoms, mu.probs):
                h = wreath_mul(L, model, g, a)
                nxt[h] = nxt.get(h, 0.0) + p * q
        dist = nxt
        if len(dist) > cap:
            raise EnumerationCapError("exact distribution exceeds cap")
    return {element_key(model, g): p for g, p in dist.items()}


def exact_entropy(mu: StepDistribution, n: int, what: str = "full") -> float:
    return entropy_of_probs(list(exact_distribution(mu, n, what).values()))


def sample_elements(mu: StepDistribution, n: int, n_samples: int, seed: int,
                    what: str = "full") -> list:
    """Independent samples of ``X_n`` (full element keys or base points)."""
    rng = RngStream(seed)
    idx = sample_indices(mu, rng, n * n_samples).reshape(n_samples, n)
    model, L = mu.model, mu.L
    if what == "projection" and isinstance(model, Lattice):
        moves = mu.arrays.moves
        pos = moves[idx].sum(axis=1) if n else np.zeros((n_samples, model.d), dtype=np.int64)
        return list(map(tuple, pos.tolist()))
    atoms = mu.atoms
    arr = mu.arrays
    table = L.table
    out = []
    fast = arr.local and isinstance(model, Lattice)
    moves = [tuple(int(c) for c in a.pos) for a in atoms]
    origin = arr.origin_lamp.tolist()
    for row in idx.tolist():
        if fast:
            x = (0,) * model.d
            lamps: dict = {}
            for i in row:
                s = origin[i]
                if s:
                    v = int(table[lamps.get(x, 0), s])
                    if v:
                        lamps[x] = v
                    else:
                        del lamps[x]
                m = moves[i]
                if any(m):
                    x = tuple(a + b for a, b in zip(x, m))
        else:
            g = wreath_identity(model)
            for i in row:
                g = wreath_mul(L, model, g, atoms[i])
            x, lamps = g.pos, dict(g.lamps)
        out.append(x if what == "projection" else (x, frozenset(lamps.items())))
    return out


def avez_curve(mu: StepDistribution, n_grid: Sequence[int], samples_per_n: int, seed: int,
               what: str = "full", correction: str = "none") -> list:
    """``[(n, H_hat(X_n)/n, report), ...]`` with independent samples per grid point."""
    if list(n_grid) != sorted(n_grid):
        raise ValueError("grid must be ascending")
    out = []
    for j, n in enumerate(n_grid):
        xs = sample_elements(mu, n, samples_per_n, seed + 7919 * j, what)
        rep = plugin_entropy(xs, correction)
        rep.params.update({"n": n, "what": what})
        if rep.params["distinct"] == rep.n_samples:
            rep.flags.append("vacuous")
        out.append((n, rep.estimate / n, rep))
    return out


# ---------------------------------------------------------------------------
# typical sets


@dataclass
class TypicalSet:
    """``{(b_1..b_n) : sum -log pi(b_i) <= n (H + eps)}`` for an i.i.d. block law."""

    probs: dict
    n_blocks: int
    eps: float
    H: float
    observed: set = field(default_factory=set)
    coverage: float | None = None

    @property
    def threshold(self) -> float:
        return self.n_blocks * (self.H + self.eps)

    def log_prob(self, seq) -> float:
        total = 0.0
        for b in seq:
            p = self.probs.get(b)
            if not p:
                return -math.inf
            total += math.log(p)
        return total

    def contains(self, seq) -> bool:
        if len(seq) != self.n_blocks:
            return False
        return -self.log_prob(seq) <= self.threshold + 1e-9

    def log_size_bound(self) -> float:
        """Every member has probability at least ``exp(-threshold)``, and there
        are at most ``K^n`` sequences over a ``K``-letter support."""
        return min(self.threshold, self.n_blocks * math.log(len(self.probs)))


def typical_set_build(block_law: Mapping, n_blocks: int, eps: float, samples: int = 0,
                      seed: int = 0) -> TypicalSet:
    """Typical set for ``n_blocks`` i.i.d. draws from ``block_law`` (value -> prob).

    With ``samples > 0`` the set of observed typical sequences and the
    empirical coverage are recorded as well.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    probs = {k: float(v) for k, v in block_law.items() if v > 0}
    H = entropy_of_probs(list(probs.values()))
    ts = TypicalSet(probs, n_blocks, eps, H)
    if samples:
        keys = list(probs)
        p = np.array([probs[k] for k in keys])
        cdf = np.cumsum(p)
        cdf[-1] = 1.0
        rng = RngStream(seed)
        draws = rng.choice_index(cdf, (samples, n_blocks))
        nlp = -np.log(p)[draws].sum(axis=1)
        inside = nlp <= ts.threshold + 1e-9
        ts.coverage = float(inside.mean())
        for row in draws[inside][:1000]:
            ts.observed.add(tuple(keys[i] for i in row))
    return ts


# ---------------------------------------------------------------------------
# Green metric


def _is_lazy_simple(model: FreeGroup, base: BaseMeasure) -> float | None:
    """Holding probability if ``base`` is (lazy) simple random walk, else None."""
    gens = set(model.generators)
    hold = 0.0
    w = None
    for p, q in zip(base.points, base.weights):
        if p == model.identity:
            hold = float(q)
        elif p in gens:
            if w is None:
                w = q
            elif q != w:
                return None
        else:
            return None
    if w is None or len([p for p in base.points if p in gens]) != len(gens):
        return None
    return hold


def green_metric(model: BaseModel, base: BaseMeasure, x, mode: str = "mc",
                 n_cap: int | Sequence[int] = 1000, samples: int = 10_000,
                 seed: int = 0) -> EstimateReport | list:
    """``zeta_n(x) = -log P[tau_x <= n]`` by Monte Carlo, or the exact
    ``rho(x) = |x| log(2k - 1)`` for simple random walk on ``F_k``.

    With a list of caps the Monte Carlo estimates share their trajectories,
    so they are non-increasing in ``n`` by construction.
    """
    if mode == "analytic_tree":
        if not isinstance(model, FreeGroup) or _is_lazy_simple(model, base) is None:
            raise ValueError("analytic Green metric needs (lazy) simple random walk on a free group")
        return EstimateReport(model.word_length(x) * math.log(2 * model.k - 1), 1, 0.0,
                              "analytic_tree", {"x": list(x)})
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    caps = [n_cap] if isinstance(n_cap, (int, np.integer)) else list(n_cap)
    times = hitting_times(model, base, x, max(caps), samples, seed)
    reports = []
    for c in caps:
        hits = int(np.sum((times >= 0) & (times <= c)))
        est = math.inf if hits == 0 else -math.log(hits / samples)
        se = None if hits == 0 else math.sqrt((1 - hits / samples) / hits)
        flags = ["no_hits"] if hits == 0 else []
        reports.append(EstimateReport(est, samples, se, "mc", {"n_cap": c, "hits": hits}, flags,
                                      "estimates zeta_n; upper bound for rho"))
    return reports[0] if isinstance(n_cap, (int, np.integer)) else reports


def hitting_times(model: BaseModel, base: BaseMeasure, x, n_cap: int | None, samples: int,
                  seed: int) -> np.ndarray:
    """First time the base walk started at ``o`` visits ``x`` (``-1`` if not by ``n_cap``)."""
    rng = RngStream(seed).gen
    if x == model.identity:
        return np.zeros(samples, dtype=np.int64)
    if isinstance(model, FreeGroup):
        hold = _is_lazy_simple(model, base)
        if hold is not None:
            return _lattice.tree_distance_hits(rng, 2 * model.k, hold, model.word_length(x), 0,
                                               n_cap, samples)
        return _generic_hits(model, base, x, n_cap, samples, rng)
    if isinstance(model, Lattice):
        return _lattice_hits(base, np.array(x), n_cap, samples, rng)
    return _generic_hits(model, base, x, n_cap, samples, rng)


def _lattice_hits(base: BaseMeasure, x: np.ndarray, n_cap: int, samples: int, rng) -> np.ndarray:
    moves = base.moves
    probs = base.probs
    s = float(_lattice.l1(moves).max())
    X = np.zeros((samples, len(x)), dtype=np.int64)
    t = np.zeros(samples, dtype=np.int64)
    res = np.full(samples, -1, dtype=np.int64)
    active = np.arange(samples)
    while len(active):
        gap = _lattice.l1(X[active] - x).astype(float)
        # a jump of k < gap / s steps cannot visit x, except that single
        # steps are taken one at a time and checked
        k = np.minimum(_lattice.safe_steps(gap, s), n_cap - t[active])
        X[active] += _lattice.jump(rng, k, probs, moves)
        t[active] += k
        hit = np.all(X[active] == x, axis=1)
        res[active[hit]] = t[active[hit]]
        active = active[(~hit) & (t[active] < n_cap)]
    return res


def _generic_hits(model, base, x, n_cap, samples, rng) -> np.ndarray:
    if n_cap is None:
        raise ValueError("generic hitting times need a finite cap")
    res = np.full(samples, -1, dtype=np.int64)
    for i in range(samples):
        idx = np.minimum(np.searchsorted(base.cdf, rng.random(n_cap), side="right"),
                         len(base.points) - 1)
        y = model.identity
        for t, j in enumerate(idx.tolist(), 1):
            y = model.mul(y, base.points[j])
            if y == x:
                res[i] = t
                break
    return res


# ---------------------------------------------------------------------------
# heat kernel


def _lattice_laws(base: BaseMeasure, t_max: int):
    """Yield ``(t, law)`` for ``t = 0..t_max``; ``law`` is dense on ``[-t*s, t*s]^d``."""
    moves = base.moves
    s = int(np.abs(moves).max())
    d = moves.shape[1]
    law = np.ones((1,) * d)
    yield 0, law
    for t in range(1, t_max + 1):
        if float(2 * s * t + 1) ** d > 5e7:
            raise EnumerationCapError("exact heat kernel grid too large; use Monte Carlo")
        nxt = np.zeros(tuple(n + 2 * s for n in law.shape))
        for m, p in zip(moves, base.probs):
            sl = tuple(slice(s + int(c), s + int(c) + n) for c, n in zip(m, law.shape))
            nxt[sl] += p * law
        law = nxt
        yield t, law


def exact_lattice_law(base: BaseMeasure, t: int) -> tuple[np.ndarray, int]:
    """Dense array of ``p_t(o, .)`` on the box ``[-t*s, t*s]^d`` and its offset."""
    for k, law in _lattice_laws(base, t):
        if k == t:
            return law, (law.shape[0] - 1) // 2


def is_symmetric(base: BaseMeasure) -> bool:
    probs = {tuple(int(c) for c in m): p for m, p in zip(base.moves, base.probs)}
    return all(abs(p - probs.get(tuple(-c for c in m), 0.0)) <= 1e-15 for m, p in probs.items())


def heat_kernel_curve(base: BaseMeasure, times: Sequence[int]) -> dict:
    """Exact ``sup_x p_t(o, x)`` for each ``t`` in ``times`` in one pass.

    For a symmetric walk and even ``t`` the supremum is the return
    probability ``p_t(o, o) = sum_y p_{t/2}(o, y)^2`` (Cauchy-Schwarz), which
    only needs the law at half the time.  Other times use the maximum of the
    full law.
    """
    times = sorted(set(int(t) for t in times))
    if not times or times[0] < 1:
        raise ValueError("times must be >= 1")
    sym = is_symmetric(base)
    need = {}
    for t in times:
        if sym and t % 2 == 0:
            need.setdefault(t // 2, []).append(("square", t))
        else:
            need.setdefault(t, []).append(("max", t))
    out = {}
    for k, law in _lattice_laws(base, max(need)):
        for how, t in need.get(k, []):
            out[t] = float(np.sum(law * law)) if how == "square" else float(law.max())
    return out


def heat_kernel_sup(base: BaseMeasure, t: int, samples: int | None = None, seed: int = 0,
                    chunk: int = 1_000_000) -> EstimateReport:
    """``sup_x p_t(o, x)``.

    ``samples=None`` gives the exact value (direct convolution for lattice
    walks; ``t = 1`` is the largest atom).  Otherwise the estimate is the
    largest empirical frequency of ``X_t`` over visited sites.  That maximum of
    noisy frequencies is biased upward by roughly a few standard errors when
    many sites share the peak value.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if samples is None:
        if t == 1:
            return EstimateReport(float(base.probs.max()), 1, 0.0, "exact", {"t": t})
        return EstimateReport(heat_kernel_curve(base, [t])[t], 1, 0.0, "exact", {"t": t})
    rng = RngStream(seed).gen
    moves = base.moves
    d = moves.shape[1]
    s = int(np.abs(moves).max())
    width = 2 * s * t + 1
    keys = []
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        disp = rng.multinomial(t, base.probs, size=m) @ moves
        key = np.zeros(m, dtype=np.int64)
        for i in range(d):
            key = key * width + (disp[:, i] + s * t)
        keys.append(key)
        done += m
    _, counts = np.unique(np.concatenate(keys), return_counts=True)
    p = counts.max() / samples
    return EstimateReport(float(p), samples, math.sqrt(p * (1 - p) / samples), "mc_max_frequency",
                          {"t": t, "sites": int(len(counts))}, [],
                          "max of empirical frequencies; biased upward when many sites tie")


def fit_loglog_slope(xs, ys) -> dict:
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    return {"slope": float(coef[0]), "intercept": float(coef[1]), "residuals": resid.tolist()}


# ---------------------------------------------------------------------------
# escape


def escape_probability(base: BaseMeasure, start, radius: float, metric: str = "word",
                       horizon: int | None = 10**6, walks: int = 10_000, seed: int = 0) -> EstimateReport:
    """Fraction of walks from ``start`` that avoid ``{z : |z| <= radius}`` up
    to ``horizon``.

    ``metric`` is ``"word"`` or ``"cov"`` (``<Cov z, z>^{1/2}``, lattice
    only).  The truncated estimate is biased upward by the chance of a first
    entry after the horizon.
    """
    model = base.model
    rng = RngStream(seed).gen
    params = {"start": list(start), "radius": radius, "metric": metric, "horizon": horizon}
    if isinstance(model, FreeGroup):
        if metric != "word":
            raise ValueError("free groups support the word metric only")
        hold = _is_lazy_simple(model, base)
        if hold is None:
            raise ValueError("escape on free groups implemented for (lazy) simple random walk")
        D = model.word_length(tuple(start))
        if D <= radius:
            raise ValueError("start lies inside the forbidden ball")
        times = _lattice.tree_distance_hits(rng, 2 * model.k, hold, D, int(radius), horizon, walks)
        esc = int(np.sum(times < 0))
        note = "horizon-truncated; biased upward" if horizon else "followed until return chance < 2^-60"
        return frequency_report(esc, walks, "tree_distance_chain", params, note)
    if not isinstance(model, Lattice):
        raise TypeError("escape probability implemented for lattices and free groups")
    if horizon is None:
        raise ValueError("lattice escape needs a finite horizon")
    if metric == "word":
        norm = _lattice.l1
    elif metric == "cov":
        cov = np.array([[float(c) for c in row] for row in base.covariance()])
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("covariance is singular")
        norm = _lattice.quad_norm(cov)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    if float(norm(np.asarray(start, float))) <= radius:
        raise ValueError("start lies inside the forbidden ball")
    alive = _lattice.escape_survival(rng, base.probs, base.moves, start, radius, norm, horizon, walks)
    return frequency_report(int(alive.sum()), walks, "jump_walk", params,
                            "horizon-truncated; biased upward")


def cov_norm_start(base: BaseMeasure, target: float) -> tuple:
    """Lattice point on the first axis with covariance norm at least ``target``."""
    cov = np.array([[float(c) for c in row] for row in base.covariance()])
    d = cov.shape[0]
    a = math.sqrt(cov[0, 0])
    x = math.ceil(target / a)
    return (x,) + (0,) * (d - 1)


# ---------------------------------------------------------------------------
# cutpoints and cut-spheres


def _first_visit(pos: np.ndarray) -> np.ndarray:
    arr = pos if pos.ndim == 2 else pos[:, None]
    _, first, inv = np.unique(arr, axis=0, return_index=True, return_inverse=True)
    return first[inv.ravel()]


def cutpoint_times(t: Trajectory | np.ndarray, future_window: int) -> np.ndarray:
    """Times ``n`` with ``{X_0..X_n}`` disjoint from ``{X_{n+1}..X_{n+w}}``.

    The future window is truncated at the end of the trajectory, so times
    within ``w`` of the end are judged on a shorter future (biased toward
    being cutpoints).
    """
    pos = t.positions if isinstance(t, Trajectory) else np.asarray(t)
    T = len(pos) - 1
    f = _first_visit(pos).astype(np.int64)
    # g[n] = min f[k] over k in (n, n + w]; the empty window at n = T gives T + 1
    big = T + 1
    shifted = np.concatenate([f[1:], np.full(future_window, big, dtype=np.int64)])
    w = max(int(future_window), 1)
    g = ndimage.minimum_filter1d(shifted, size=w, origin=-(w // 2), mode="nearest")[:T + 1]
    n = np.arange(T + 1)
    return np.nonzero(g > n)[0]


def _pref_suf(norms: np.ndarray):
    prefmax = np.maximum.accumulate(norms)
    sufmin = np.minimum.accumulate(norms[::-1])[::-1]
    return prefmax, sufmin


def cutsphere_event(t: Trajectory | np.ndarray, r: float, horizon: int | None = None) -> bool:
    """``cut_r``: some ``1 <= m <= horizon`` has ``|X_k| < r`` for all ``k < m``
    and ``|X_j| > r`` for all ``m < j <= horizon``.

    The future quantifier is truncated at ``horizon``, which can only make
    the event easier to satisfy.
    """
    norms = t.word_lengths() if isinstance(t, Trajectory) else np.asarray(t)
    H = len(norms) - 1 if horizon is None else horizon
    if H > len(norms) - 1:
        raise ValueError("horizon exceeds trajectory length")
    norms = norms[:H + 1].astype(float)
    prefmax, sufmin = _pref_suf(norms)
    before = prefmax[:-1]                           # max over k < m for m = 1..H
    after = np.append(sufmin[2:], np.inf)           # min over j > m for m = 1..H
    return bool(np.any((before < r) & (after > r)))


def cut_radii(norms: np.ndarray, r_lo: int, r_hi: int) -> np.ndarray:
    """Indicator of ``cut_r`` for integer ``r`` in ``[r_lo, r_hi]`` on one trajectory."""
    norms = np.asarray(norms, dtype=np.int64)
    prefmax, sufmin = _pref_suf(norms)
    lo = prefmax[:-1]                               # need r > lo
    hi = np.append(sufmin[2:], np.iinfo(np.int64).max)   # need r < hi
    mark = np.zeros(r_hi - r_lo + 2, dtype=np.int64)
    a = np.maximum(lo + 1, r_lo)
    b = np.minimum(hi - 1, r_hi)
    ok = a <= b
    np.add.at(mark, a[ok] - r_lo, 1)
    np.add.at(mark, b[ok] - r_lo + 1, -1)
    return np.cumsum(mark)[:-1] > 0


def cutsphere_probability(base: BaseMeasure, r: int, horizon: int, walks: int, seed: int) -> EstimateReport:
    """``P(cut_r)`` with the future truncated at ``horizon``; biased upward."""
    if not isinstance(base.model, Lattice):
        raise TypeError("cut-sphere sampler needs a lattice base")
    rng = RngStream(seed).gen
    ind = _lattice.cutsphere_indicators(rng, base.probs, base.moves, r, horizon, walks)
    return frequency_report(int(ind.sum()), walks, "jump_walk", {"r": r, "horizon": horizon},
                            "future quantifier truncated at the horizon; biased upward")


def second_moment_bound(indicator_rows: np.ndarray) -> EstimateReport:
    """``E[S]^2 / E[S^2]`` for ``S`` the row sums of cut indicators."""
    S = np.asarray(indicator_rows, dtype=float).sum(axis=1)
    m2 = float(np.mean(S ** 2))
    val = 0.0 if m2 == 0 else float(np.mean(S)) ** 2 / m2
    return EstimateReport(val, len(S), None, "second_moment", {"mean_S": float(np.mean(S))})
