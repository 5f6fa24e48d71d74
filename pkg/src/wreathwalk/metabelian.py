"""Free metabelian groups as finite integer 1-chains on the Cayley graph of Z^d.

An element is ``theta_x + f``: a 1-chain whose boundary is ``x - o``.  The
product translates the right factor's chain to the left factor's endpoint.
Edges are ``(site, direction)`` with directions ``1..d`` pointing along the
positive coordinate axes.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .measures import RngStream


class MetabelianError(ValueError):
    pass


def _add(p: tuple, q: tuple) -> tuple:
    return tuple(a + b for a, b in zip(p, q))


class EdgeChain(Mapping):
    """Finitely supported map ``(site, direction) -> int`` without zeros."""

    __slots__ = ("_data", "_hash")

    def __init__(self, data: Mapping | Iterable = ()):
        items = data.items() if isinstance(data, Mapping) else data
        out: dict = {}
        for (site, i), c in items:
            key = (tuple(int(a) for a in site), int(i))
            v = out.get(key, 0) + int(c)
            if v:
                out[key] = v
            else:
                out.pop(key, None)
        self._data = out
        self._hash = None

    @classmethod
    def _trusted(cls, data: dict) -> "EdgeChain":
        e = cls.__new__(cls)
        e._data = data
        e._hash = None
        return e

    def __getitem__(self, k):
        return self._data[k]

    def get(self, k, default=0):
        return self._data.get(k, default)

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __eq__(self, other):
        if isinstance(other, EdgeChain):
            return self._data == other._data
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __repr__(self):
        return f"EdgeChain({dict(sorted(self._data.items()))})"

    def __add__(self, other: "EdgeChain") -> "EdgeChain":
        out = dict(self._data)
        for k, c in other._data.items():
            v = out.get(k, 0) + c
            if v:
                out[k] = v
            else:
                del out[k]
        return EdgeChain._trusted(out)

    def __neg__(self) -> "EdgeChain":
        return EdgeChain._trusted({k: -c for k, c in self._data.items()})

    def __sub__(self, other: "EdgeChain") -> "EdgeChain":
        return self + (-other)

    def translate(self, x: tuple) -> "EdgeChain":
        return EdgeChain._trusted({(_add(s, x), i): c for (s, i), c in self._data.items()})

    def boundary(self) -> dict:
        """The 0-chain ``sum c (head - tail)``."""
        out: dict = {}
        for (s, i), c in self._data.items():
            head = s[: i - 1] + (s[i - 1] + 1,) + s[i:]
            for p, v in ((head, c), (s, -c)):
                w = out.get(p, 0) + v
                if w:
                    out[p] = w
                else:
                    out.pop(p, None)
        return out

    def to_json(self) -> list:
        return [[list(s), i, c] for (s, i), c in sorted(self._data.items())]

    @classmethod
    def from_json(cls, rows) -> "EdgeChain":
        return cls(((tuple(s), i), c) for s, i, c in rows)


ZERO_CHAIN = EdgeChain()


def point_chain(d: int, x: tuple) -> dict:
    """The 0-chain ``x - o``."""
    o = (0,) * d
    return {} if tuple(x) == o else {tuple(x): 1, o: -1}


@dataclass(frozen=True)
class MetabelianElem:
    chain: EdgeChain
    endpoint: tuple

    def __post_init__(self):
        d = len(self.endpoint)
        for s, i in self.chain:
            if len(s) != d or not 1 <= i <= d:
                raise MetabelianError(f"edge {(s, i)!r} does not fit dimension {d}")
        if self.chain.boundary() != point_chain(d, self.endpoint):
            raise MetabelianError("chain boundary is not endpoint - origin")

    @property
    def d(self) -> int:
        return len(self.endpoint)

    @property
    def cycle_part(self) -> EdgeChain:
        return self.chain - theta_path(self.d, self.endpoint)

    def to_json(self) -> dict:
        return {"chain": self.chain.to_json(), "endpoint": list(self.endpoint)}

    @classmethod
    def from_json(cls, obj) -> "MetabelianElem":
        return cls(EdgeChain.from_json(obj["chain"]), tuple(obj["endpoint"]))


def theta_path(d: int, x: Sequence[int], order: Sequence[int] | None = None) -> EdgeChain:
    """Staircase path chain from ``o`` to ``x``: coordinates in ``order``
    (default ``1, 2, .., d``)."""
    x = tuple(int(a) for a in x)
    if len(x) != d:
        raise MetabelianError(f"point {x!r} is not in Z^{d}")
    order = list(range(1, d + 1)) if order is None else list(order)
    if sorted(order) != list(range(1, d + 1)):
        raise MetabelianError("order must be a permutation of 1..d")
    cur = [0] * d
    out: dict = {}
    for i in order:
        k = x[i - 1]
        step = 1 if k > 0 else -1
        for _ in range(abs(k)):
            if step > 0:
                out[(tuple(cur), i)] = out.get((tuple(cur), i), 0) + 1
                cur[i - 1] += 1
            else:
                cur[i - 1] -= 1
                out[(tuple(cur), i)] = out.get((tuple(cur), i), 0) - 1
    return EdgeChain(out)


def meta_identity(d: int) -> MetabelianElem:
    return MetabelianElem(ZERO_CHAIN, (0,) * d)


def meta_mul(a: MetabelianElem, b: MetabelianElem) -> MetabelianElem:
    if a.d != b.d:
        raise MetabelianError("dimension mismatch")
    return MetabelianElem(a.chain + b.chain.translate(a.endpoint), _add(a.endpoint, b.endpoint))


def meta_inv(g: MetabelianElem) -> MetabelianElem:
    neg = tuple(-c for c in g.endpoint)
    return MetabelianElem(-g.chain.translate(neg), neg)


def generator(d: int, i: int, inverse: bool = False) -> MetabelianElem:
    if not 1 <= i <= d:
        raise MetabelianError(f"generator index {i} outside 1..{d}")
    e = tuple(1 if j == i - 1 else 0 for j in range(d))
    g = MetabelianElem(theta_path(d, e), e)
    return meta_inv(g) if inverse else g


_LETTER = re.compile(r"([aA])(\d+)")


def parse_word(d: int, w: str) -> list[tuple[int, bool]]:
    """``"a1A2"`` -> ``[(1, False), (2, True)]`` (capitals are inverses)."""
    out = []
    pos = 0
    w = w.replace(" ", "")
    while pos < len(w):
        m = _LETTER.match(w, pos)
        if not m:
            raise MetabelianError(f"invalid letter at position {pos} in {w!r}")
        i = int(m.group(2))
        if not 1 <= i <= d:
            raise MetabelianError(f"invalid letter {m.group(0)!r} for d = {d}")
        out.append((i, m.group(1) == "A"))
        pos = m.end()
    return out


def format_word(letters: Sequence[tuple[int, bool]]) -> str:
    return "".join(("A" if inv else "a") + str(i) for i, inv in letters)


def word_inverse(w: str, d: int) -> str:
    return format_word([(i, not inv) for i, inv in reversed(parse_word(d, w))])


def word_commutator(u: str, v: str, d: int) -> str:
    """``[u, v] = u v u^-1 v^-1``."""
    return u + v + word_inverse(u, d) + word_inverse(v, d)


def word_image(d: int, w: str) -> MetabelianElem:
    """Image of a word over ``a1..ad`` / ``A1..Ad`` in the chain model.

    Folds left to right by appending one signed edge at the current endpoint.
    """
    cur = [0] * d
    out: dict = {}
    for i, inv in parse_word(d, w):
        if inv:
            cur[i - 1] -= 1
            key = (tuple(cur), i)
            out[key] = out.get(key, 0) - 1
        else:
            key = (tuple(cur), i)
            out[key] = out.get(key, 0) + 1
            cur[i - 1] += 1
    return MetabelianElem(EdgeChain(out), tuple(cur))


def word_image_fold(d: int, w: str) -> MetabelianElem:
    """Same as :func:`word_image` through repeated :func:`meta_mul`."""
    g = meta_identity(d)
    for i, inv in parse_word(d, w):
        g = meta_mul(g, generator(d, i, inv))
    return g


def random_word(d: int, length: int, rng: np.random.Generator) -> str:
    idx = rng.integers(1, d + 1, size=length)
    inv = rng.random(length) < 0.5
    return format_word(list(zip(idx.tolist(), inv.tolist())))


# ---------------------------------------------------------------------------
# walks and edgewise limits


@dataclass
class EdgeTrace:
    edge: tuple
    times: list
    values: list
    final: int
    last_change: int | None
    stable: bool

    def to_json(self) -> dict:
        s, i = self.edge
        return {"edge": [list(s), i], "times": self.times, "values": self.values,
                "final": self.final, "last_change": self.last_change, "stable": self.stable}


def letter_law(d: int, spec: Mapping | None = None) -> tuple[list, np.ndarray]:
    """Letters ``(i, inverse)`` (``i = 0`` means hold) and probabilities.

    ``spec``: ``{"weights": {"a1": w, "A1": w, ...}, "hold": h}``; the
    default is the symmetric walk on the ``2d`` generator images.
    """
    spec = dict(spec or {})
    bad = set(spec) - {"weights", "hold"}
    if bad:
        raise MetabelianError(f"unknown step key(s): {sorted(bad)}")
    hold = float(spec.get("hold", 0.0))
    weights = spec.get("weights")
    letters, probs = [], []
    if weights is None:
        for i in range(1, d + 1):
            for inv in (False, True):
                letters.append((i, inv))
                probs.append((1 - hold) / (2 * d))
    else:
        for name, w in weights.items():
            (letter,) = parse_word(d, name)
            letters.append(letter)
            probs.append(float(w))
    if hold:
        letters.append((0, False))
        probs.append(hold)
    p = np.array(probs)
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
        raise MetabelianError("step probabilities must be non-negative and sum to 1")
    return letters, p


def walk_edges(d: int, letters: list, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per step: traversed edge site, direction (0 for holds), sign, and positions."""
    dirs = np.array([i for i, _ in letters])[idx]
    sign = np.array([-1 if inv else 1 for _, inv in letters])[idx]
    sign = np.where(dirs == 0, 0, sign)
    steps = np.zeros((len(idx), d), dtype=np.int64)
    rows = np.nonzero(dirs)[0]
    steps[rows, dirs[rows] - 1] = sign[rows]
    pos = np.vstack([np.zeros((1, d), dtype=np.int64), np.cumsum(steps, axis=0)])
    site = np.where((sign < 0)[:, None], pos[1:], pos[:-1])
    return site, dirs, sign, pos


def meta_walk(d: int, n: int, seed: int, spec: Mapping | None = None) -> MetabelianElem:
    """``X_n`` of the walk driven by generator images."""
    letters, p = letter_law(d, spec)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    idx = RngStream(seed).choice_index(cdf, n)
    site, dirs, sign, pos = walk_edges(d, letters, idx)
    out: dict = {}
    for s, i, c in zip(map(tuple, site.tolist()), dirs.tolist(), sign.tolist()):
        if i:
            out[(s, i)] = out.get((s, i), 0) + c
    return MetabelianElem(EdgeChain(out), tuple(int(a) for a in pos[-1]))


def window_edges(d: int, radius: int) -> list:
    """Edges with both endpoints in the l1 ball of ``radius``."""
    from .groups import Lattice
    out = []
    for s in Lattice(d).ball(radius):
        for i in range(1, d + 1):
            head = s[: i - 1] + (s[i - 1] + 1,) + s[i:]
            if sum(abs(a) for a in head) <= radius:
                out.append((s, i))
    return sorted(out)


def meta_walk_limit(d: int, n: int, seeds: Iterable[int], edges: Sequence | int = 0,
                    N_max: int | None = None, spec: Mapping | None = None) -> list:
    """Per seed, the coefficient trace of each monitored edge up to ``N_max``.

    ``edges`` is a list of ``(site, direction)`` or an l1 radius.  An edge is
    stable if its coefficient did not change during ``(N_max/2, N_max]``.
    """
    N_max = n if N_max is None else N_max
    if N_max > n:
        raise MetabelianError(f"trajectory length {n} < N_max = {N_max}")
    if isinstance(edges, int):
        edges = window_edges(d, edges)
    edges = [(tuple(s), int(i)) for s, i in edges]
    letters, p = letter_law(d, spec)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    out = []
    for seed in seeds:
        idx = RngStream(seed).choice_index(cdf, N_max)
        site, dirs, sign, _ = walk_edges(d, letters, idx)
        traces = []
        for s, i in edges:
            hit = np.nonzero((dirs == i) & np.all(site == np.array(s), axis=1))[0]
            vals = np.cumsum(sign[hit]).tolist()
            times = (hit + 1).tolist()
            last = times[-1] if times else None
            traces.append(EdgeTrace((s, i), times, vals, vals[-1] if vals else 0, last,
                                    last is None or last <= N_max / 2))
        out.append(traces)
    return out


def stability_frequency(traces: list, edge_index: int = 0) -> float:
    flags = [run[edge_index].stable for run in traces]
    return sum(flags) / len(flags) if flags else math.nan
