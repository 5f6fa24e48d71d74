"""Vectorized kernels for walks on Z^d and on regular trees.

Long horizons are handled by exact jumps: when a walk is certainly unable to
cross a boundary within ``k`` steps, the sum of the next ``k`` increments is
drawn in one go from the multinomial law of the step counts.  The walk is only
observed at jump endpoints, which is exact for events that cannot happen
inside a jump.
"""
from __future__ import annotations

import math

import numpy as np


def jump(rng: np.random.Generator, k: np.ndarray, probs: np.ndarray, moves: np.ndarray) -> np.ndarray:
    """Displacement of ``k[i]`` independent steps for each walk ``i``."""
    counts = rng.multinomial(k, probs)
    return counts @ moves


def step_norm_bound(moves: np.ndarray, norm) -> float:
    return float(max(norm(moves.astype(float))))


def l1(x: np.ndarray) -> np.ndarray:
    return np.abs(x).sum(axis=-1)


def quad_norm(Q: np.ndarray):
    def norm(x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, Q, x))
    return norm


def safe_steps(gap: np.ndarray, s: float) -> np.ndarray:
    """Largest ``k`` with ``k * s < gap`` (at least 1; a single step is
    always taken and then checked)."""
    k = np.ceil(gap / s - 1e-12).astype(np.int64) - 1
    return np.maximum(k, 1)


def escape_survival(rng, probs, moves, start, R, norm, horizon, n_walks, chunk=20000):
    """Indicator per walk that ``norm(X_t) > R`` for all ``t <= horizon``."""
    s = step_norm_bound(moves, norm)
    out = np.empty(n_walks, dtype=bool)
    for lo in range(0, n_walks, chunk):
        m = min(chunk, n_walks - lo)
        X = np.tile(np.asarray(start, dtype=np.int64), (m, 1))
        t = np.zeros(m, dtype=np.int64)
        alive = np.ones(m, dtype=bool)
        active = np.arange(m)
        while len(active):
            gap = norm(X[active]) - R
            k = np.minimum(safe_steps(gap, s), horizon - t[active])
            X[active] += jump(rng, k, probs, moves)
            t[active] += k
            hit = norm(X[active]) <= R
            alive[active[hit]] = False
            keep = (~hit) & (t[active] < horizon)
            active = active[keep]
        out[lo:lo + m] = alive
    return out


def cutsphere_indicators(rng, probs, moves, r, horizon, n_walks, chunk=20000):
    """``cut_r`` indicator per walk with the future quantifier truncated at
    ``horizon`` (word metric = l1 norm)."""
    s = float(l1(moves).max())
    out = np.zeros(n_walks, dtype=bool)
    d = moves.shape[1]
    for lo in range(0, n_walks, chunk):
        m = min(chunk, n_walks - lo)
        X = np.zeros((m, d), dtype=np.int64)
        t = np.zeros(m, dtype=np.int64)
        res = np.zeros(m, dtype=bool)
        # phase 1: reach |X| >= r
        active = np.arange(m)
        while len(active):
            gap = r - l1(X[active])
            k = np.minimum(safe_steps(gap.astype(float), s), horizon - t[active])
            X[active] += jump(rng, k, probs, moves)
            t[active] += k
            reached = l1(X[active]) >= r
            active = active[(~reached) & (t[active] < horizon)]
        outside = l1(X) >= r
        # phase 2: stay strictly outside radius r up to the horizon
        res[outside] = True
        active = np.nonzero(outside & (t < horizon))[0]
        # the first post-crossing step must itself be checked
        while len(active):
            gap = l1(X[active]) - r
            k = np.minimum(safe_steps(gap.astype(float), s), horizon - t[active])
            X[active] += jump(rng, k, probs, moves)
            t[active] += k
            bad = l1(X[active]) <= r
            res[active[bad]] = False
            active = active[(~bad) & (t[active] < horizon)]
        out[lo:lo + m] = res
    return out


def tree_distance_hits(rng, k_regular: int, hold: float, start: int, target: int,
                       n_cap: int | None, n_walks: int, chunk: int = 200000) -> np.ndarray:
    """Hitting times of distance ``<= target`` for the distance-from-a-vertex
    chain of (lazy) simple random walk on the ``k_regular``-regular tree.

    From distance ``D > 0`` the chain moves to ``D - 1`` with probability
    ``(1-hold)/k``, stays with probability ``hold`` and otherwise moves to
    ``D + 1``; from ``0`` it moves to ``1`` unless it holds.  Returns the
    hitting time per walk, or ``-1`` if the target is not reached by
    ``n_cap`` (``None`` means the walk is followed until the hitting
    probability from its current distance is below ``2**-60``).
    """
    down = (1.0 - hold) / k_regular
    up = 1.0 - hold - down
    probs = np.array([down, hold, up])
    steps = np.array([-1, 0, 1])
    ratio = down / up
    out = np.full(n_walks, -1, dtype=np.int64)
    if start <= target:
        out[:] = 0
        return out
    # beyond this gap the chance of ever returning is negligible
    give_up = target + int(math.ceil(60 * math.log(2) / -math.log(ratio))) + 1
    for lo in range(0, n_walks, chunk):
        m = min(chunk, n_walks - lo)
        D = np.full(m, start, dtype=np.int64)
        t = np.zeros(m, dtype=np.int64)
        active = np.arange(m)
        res = np.full(m, -1, dtype=np.int64)
        while len(active):
            gap = D[active] - target
            k = np.maximum(gap - 1, 1)
            if n_cap is not None:
                k = np.minimum(k, n_cap - t[active])
            cnt = rng.multinomial(k, probs)
            D[active] += cnt @ steps
            t[active] += k
            hit = D[active] <= target
            res[active[hit]] = t[active[hit]]
            alive = ~hit
            if n_cap is not None:
                alive &= t[active] < n_cap
            else:
                alive &= D[active] < give_up
            active = active[alive]
        out[lo:lo + m] = res
    return out
