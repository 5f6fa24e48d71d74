"""Base groups, finite lamp groups and wreath-product elements.

Points of the base groups are plain hashable tuples in canonical form:

* lattice ``Z^d``: integer d-tuples;
* discrete Heisenberg group: integer triples ``(x, y, z)`` with the law
  ``(x, y, z)(x', y', z') = (x + x', y + y', z + z' + x y')``;
* free group ``F_k``: reduced words, letters ``±1 .. ±k`` (``-i`` is the
  inverse of generator ``i``);
* regular tree ``T_d`` with a distinguished end: ``(anchor, word)`` where the
  vertex is reached from the spine vertex ``xi_anchor`` by descending along
  child labels ``word``.  Label 0 of a spine vertex ``xi_m`` (``m > 0``) is
  the spine child ``xi_{m-1}``, so canonical words never start with 0 unless
  ``anchor == 0``.

Lamp groups are finite groups given by multiplication tables, relabelled so
that the identity has index 0.  A :class:`LampConfig` never stores 0.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np


class GroupError(ValueError):
    """Invalid element or incompatible operands."""


class EnumerationCapError(RuntimeError):
    """Enumeration would exceed the configured cap."""


DEFAULT_ENUMERATION_CAP = 2_000_000


# ---------------------------------------------------------------------------
# base models


class BaseModel:
    kind: str = ""

    @property
    def identity(self):
        raise NotImplementedError

    @property
    def generators(self) -> tuple:
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def validate(self, a) -> None:
        raise NotImplementedError

    def word_length(self, a) -> int:
        raise NotImplementedError

    def neighbors(self, a) -> list:
        return [self.mul(a, g) for g in self.generators]

    def ball(self, r: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list:
        """All points at word distance at most ``r`` from the identity (BFS)."""
        if r < 0:
            return []
        seen = {self.identity: 0}
        frontier = [self.identity]
        for depth in range(1, r + 1):
            nxt = []
            for x in frontier:
                for y in self.neighbors(x):
                    if y not in seen:
                        seen[y] = depth
                        nxt.append(y)
                        if len(seen) > cap:
                            raise EnumerationCapError(
                                f"ball of radius {r} in {self!r} exceeds cap {cap}")
            frontier = nxt
        return list(seen)

    def ball_size(self, r: int) -> int:
        return len(self.ball(r))

    def to_json(self) -> dict:
        raise NotImplementedError

    def point_to_json(self, a):
        return list(a)

    def point_from_json(self, obj):
        p = tuple(obj)
        self.validate(p)
        return p

    def __eq__(self, other):
        return type(self) is type(other) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.to_json().items()))))


class Lattice(BaseModel):
    """``Z^d`` with the standard generators; word length is the l1 norm."""

    kind = "lattice"

    def __init__(self, d: int):
        if int(d) < 1:
            raise GroupError("lattice dimension must be >= 1")
        self.d = int(d)
        gens = []
        for i in range(self.d):
            for sgn in (1, -1):
                e = [0] * self.d
                e[i] = sgn
                gens.append(tuple(e))
        self._gens = tuple(gens)

    def __repr__(self):
        return f"Lattice({self.d})"

    @property
    def identity(self):
        return (0,) * self.d

    @property
    def generators(self):
        return self._gens

    def validate(self, a):
        if not (isinstance(a, tuple) and len(a) == self.d
                and all(isinstance(c, (int, np.integer)) for c in a)):
            raise GroupError(f"{a!r} is not a point of Z^{self.d}")

    def mul(self, a, b):
        if len(a) != self.d or len(b) != self.d:
            raise GroupError("mismatched lattice dimensions")
        return tuple(int(x + y) for x, y in zip(a, b))

    def inv(self, a):
        return tuple(-int(x) for x in a)

    def word_length(self, a):
        return int(sum(abs(int(x)) for x in a))

    def ball(self, r, cap=DEFAULT_ENUMERATION_CAP):
        if r < 0:
            return []
        if self.ball_size(r) > cap:
            raise EnumerationCapError(f"ball of radius {r} in Z^{self.d} exceeds cap {cap}")
        return list(_l1_ball(self.d, r))

    def ball_size(self, r):
        """Closed form ``sum_k 2^k C(d,k) C(r,k)``."""
        if r < 0:
            return 0
        return sum(2 ** k * math.comb(self.d, k) * math.comb(r, k)
                   for k in range(min(self.d, r) + 1))

    def to_json(self):
        return {"kind": "lattice", "d": self.d}


def _l1_ball(d: int, r: int) -> Iterator[tuple]:
    if d == 1:
        for x in range(-r, r + 1):
            yield (x,)
        return
    for x in range(-r, r + 1):
        for rest in _l1_ball(d - 1, r - abs(x)):
            yield (x,) + rest


class Heisenberg(BaseModel):
    """Discrete Heisenberg group, generators ``a = (1,0,0)``, ``b = (0,1,0)``."""

    kind = "heisenberg"
    _gens = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))

    def __init__(self):
        self._dist: dict = {(0, 0, 0): 0}
        self._frontier = [(0, 0, 0)]
        self._radius = 0

    def __repr__(self):
        return "Heisenberg()"

    @property
    def identity(self):
        return (0, 0, 0)

    @property
    def generators(self):
        return self._gens

    def validate(self, a):
        if not (isinstance(a, tuple) and len(a) == 3
                and all(isinstance(c, (int, np.integer)) for c in a)):
            raise GroupError(f"{a!r} is not a Heisenberg point")

    def mul(self, a, b):
        if len(a) != 3 or len(b) != 3:
            raise GroupError("mismatched Heisenberg operands")
        return (int(a[0] + b[0]), int(a[1] + b[1]), int(a[2] + b[2] + a[0] * b[1]))

    def inv(self, a):
        x, y, z = a
        return (-int(x), -int(y), int(x * y - z))

    def _grow(self):
        nxt = []
        self._radius += 1
        for x in self._frontier:
            for g in self._gens:
                y = self.mul(x, g)
                if y not in self._dist:
                    self._dist[y] = self._radius
                    nxt.append(y)
        self._frontier = nxt

    def word_length(self, a, cap: int = DEFAULT_ENUMERATION_CAP):
        a = tuple(int(c) for c in a)
        while a not in self._dist:
            if len(self._dist) > cap:
                raise EnumerationCapError("Heisenberg word length search exceeded cap")
            self._grow()
        return self._dist[a]

    def ball(self, r, cap=DEFAULT_ENUMERATION_CAP):
        while self._radius < r:
            if len(self._dist) > cap:
                raise EnumerationCapError("Heisenberg ball exceeds cap")
            self._grow()
        pts = [p for p, k in self._dist.items() if k <= r]
        if len(pts) > cap:
            raise EnumerationCapError("Heisenberg ball exceeds cap")
        return pts

    def to_json(self):
        return {"kind": "heisenberg"}


class FreeGroup(BaseModel):
    """Free group on ``k`` generators; points are reduced words."""

    kind = "free"

    def __init__(self, k: int):
        if int(k) < 2:
            raise GroupError("free group rank must be >= 2")
        self.k = int(k)
        self._gens = tuple((s * i,) for i in range(1, self.k + 1) for s in (1, -1))

    def __repr__(self):
        return f"FreeGroup({self.k})"

    @property
    def identity(self):
        return ()

    @property
    def generators(self):
        return self._gens

    def validate(self, a):
        if not isinstance(a, tuple):
            raise GroupError(f"{a!r} is not a word")
        for i, c in enumerate(a):
            if not isinstance(c, (int, np.integer)) or c == 0 or abs(c) > self.k:
                raise GroupError(f"invalid letter {c!r} in {a!r}")
            if i and a[i - 1] == -c:
                raise GroupError(f"word {a!r} is not reduced")

    def reduce(self, letters: Iterable[int]) -> tuple:
        out: list = []
        for c in letters:
            if out and out[-1] == -c:
                out.pop()
            else:
                out.append(int(c))
        return tuple(out)

    def mul(self, a, b):
        i = 0
        n = min(len(a), len(b))
        while i < n and a[len(a) - 1 - i] == -b[i]:
            i += 1
        return tuple(a[:len(a) - i]) + tuple(b[i:])

    def inv(self, a):
        return tuple(-c for c in reversed(a))

    def word_length(self, a):
        return len(a)

    def ball_size(self, r):
        if r < 0:
            return 0
        k2 = 2 * self.k
        return 1 + sum(k2 * (k2 - 1) ** (j - 1) for j in range(1, r + 1))

    def ball(self, r, cap=DEFAULT_ENUMERATION_CAP):
        if self.ball_size(r) > cap:
            raise EnumerationCapError(f"ball of radius {r} in F_{self.k} exceeds cap {cap}")
        return super().ball(r, cap)

    def parse(self, text: str) -> tuple:
        """Parse ``"a b B"``-style words: lowercase letters a.. are generators,
        uppercase their inverses."""
        letters = []
        for ch in text.replace(" ", ""):
            i = ord(ch.lower()) - ord("a") + 1
            if not 1 <= i <= self.k:
                raise GroupError(f"invalid letter {ch!r}")
            letters.append(i if ch.islower() else -i)
        return self.reduce(letters)

    def to_json(self):
        return {"kind": "free", "k": self.k}


class Tree(BaseModel):
    """Regular tree ``T_d`` with a distinguished end ``xi``.

    Not a group: :meth:`mul` and :meth:`inv` raise.  Provides graph distance,
    neighbours, balls and the horodistance geometry.
    """

    kind = "tree"

    def __init__(self, d: int):
        if int(d) < 3:
            raise GroupError("tree degree must be >= 3")
        self.d = int(d)

    def __repr__(self):
        return f"Tree({self.d})"

    @property
    def identity(self):
        return (0, ())

    @property
    def generators(self):
        raise GroupError("a tree with a fixed end has no group generators")

    def validate(self, a):
        if not (isinstance(a, tuple) and len(a) == 2 and isinstance(a[1], tuple)):
            raise GroupError(f"{a!r} is not a tree vertex")
        m, w = a
        if m < 0:
            raise GroupError("anchor must be >= 0")
        if any(not 0 <= c < self.d - 1 for c in w):
            raise GroupError(f"child labels must lie in [0, {self.d - 2}]")
        if m > 0 and w and w[0] == 0:
            raise GroupError(f"{a!r} is not canonical")

    def mul(self, a, b):
        raise GroupError("tree vertices do not form a group")

    def inv(self, a):
        raise GroupError("tree vertices do not form a group")

    def level(self, a) -> int:
        return len(a[1]) - a[0]

    def parent(self, a):
        m, w = a
        if w:
            return (m, w[:-1])
        return (m + 1, ())

    def child(self, a, j: int):
        m, w = a
        if not 0 <= j < self.d - 1:
            raise GroupError("child label out of range")
        if m > 0 and not w and j == 0:
            return (m - 1, ())
        return (m, w + (j,))

    def children(self, a) -> list:
        return [self.child(a, j) for j in range(self.d - 1)]

    def neighbors(self, a):
        return [self.parent(a)] + self.children(a)

    def ancestor_at(self, a, level: int):
        k = self.level(a)
        if level > k:
            raise GroupError(f"level {level} is below the vertex level {k}")
        x = a
        for _ in range(k - level):
            x = self.parent(x)
        return x

    def spine(self, n: int):
        """``xi_n``: the ancestor of ``o`` at horodistance ``-n``."""
        return (n, ())

    def in_cone(self, a, n: int) -> bool:
        return a[0] <= n

    def distance(self, a, b) -> int:
        if a[0] != b[0]:
            return len(a[1]) + len(b[1]) + abs(a[0] - b[0])
        i = 0
        while i < min(len(a[1]), len(b[1])) and a[1][i] == b[1][i]:
            i += 1
        return len(a[1]) + len(b[1]) - 2 * i

    def word_length(self, a):
        return a[0] + len(a[1])

    def ball_around(self, centre, r: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list:
        seen = {centre}
        frontier = [centre]
        for _ in range(r):
            nxt = []
            for x in frontier:
                for y in self.neighbors(x):
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            if len(seen) > cap:
                raise EnumerationCapError("tree ball exceeds cap")
            frontier = nxt
        return list(seen)

    def ball_size(self, r):
        if r < 0:
            return 0
        return 1 + sum(self.d * (self.d - 1) ** (j - 1) for j in range(1, r + 1))

    def point_to_json(self, a):
        return [a[0], list(a[1])]

    def point_from_json(self, obj):
        p = (int(obj[0]), tuple(int(c) for c in obj[1]))
        self.validate(p)
        return p

    def to_json(self):
        return {"kind": "tree", "d": self.d}


def model_from_json(obj: Mapping) -> BaseModel:
    kind = obj.get("kind")
    if kind == "lattice":
        return Lattice(obj["d"])
    if kind == "heisenberg":
        return Heisenberg()
    if kind == "free":
        return FreeGroup(obj["k"])
    if kind == "tree":
        return Tree(obj["d"])
    raise GroupError(f"unknown base model kind {kind!r}")


def base_mul(model: BaseModel, a, b):
    model.validate(a)
    model.validate(b)
    return model.mul(a, b)


def base_inv(model: BaseModel, a):
    model.validate(a)
    return model.inv(a)


def word_length(model: BaseModel, a) -> int:
    model.validate(a)
    return model.word_length(a)


def ball_enumerate(model: BaseModel, r: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list:
    return model.ball(r, cap)


# ---------------------------------------------------------------------------
# tree geometry


@dataclass(frozen=True)
class TreeGeometry:
    model: Tree
    vertex: tuple
    horodistance: int
    parent: tuple

    def ancestor_at(self, level: int):
        return self.model.ancestor_at(self.vertex, level)

    def in_cone(self, n: int) -> bool:
        return self.model.in_cone(self.vertex, n)


def tree_geometry(model: Tree, x) -> TreeGeometry:
    if not isinstance(model, Tree):
        raise GroupError("tree_geometry needs a tree model")
    model.validate(x)
    return TreeGeometry(model, x, model.level(x), model.parent(x))


class TreeArena:
    """Integer-indexed vertices of ``T_d`` created on demand.

    Moves are O(1); :meth:`vertex` converts back to canonical coordinates.
    Node 0 is ``o``.
    """

    def __init__(self, d: int):
        self.d = d
        self.parent_of: list[int] = [-1]
        self.label: list[int] = [-1]
        self.level: list[int] = [0]
        self.anchor: list[int] = [0]
        self.children: list[dict] = [{}]
        self.spine: list[int] = [0]

    def _new(self, parent: int, label: int, level: int, anchor: int) -> int:
        i = len(self.parent_of)
        self.parent_of.append(parent)
        self.label.append(label)
        self.level.append(level)
        self.anchor.append(anchor)
        self.children.append({})
        return i

    def parent(self, v: int) -> int:
        p = self.parent_of[v]
        if p >= 0:
            return p
        # v is the current top of the spine
        m = len(self.spine)
        top = self._new(-1, -1, -m, m)
        self.parent_of[v] = top
        self.label[v] = 0
        self.children[top][0] = v
        self.spine.append(top)
        return top

    def child(self, v: int, j: int) -> int:
        c = self.children[v].get(j)
        if c is None:
            a = self.anchor[v]
            c = self._new(v, j, self.level[v] + 1, a)
            self.children[v][j] = c
        return c

    def vertex(self, v: int) -> tuple:
        word = []
        m = self.anchor[v]
        while self.level[v] != -m or v != self.spine[m]:
            word.append(self.label[v])
            v = self.parent_of[v]
        return (m, tuple(reversed(word)))

    def node(self, x: tuple) -> int:
        m, w = x
        while len(self.spine) <= m:
            self.parent(self.spine[-1])
        v = self.spine[m]
        for j in w:
            v = self.child(v, j)
        return v


# ---------------------------------------------------------------------------
# lamp groups


class LampGroup:
    """Finite group given by a multiplication table with identity index 0."""

    def __init__(self, table, name: str | None = None, *, validate: bool = True):
        t = np.asarray(table, dtype=np.int64)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 1:
            raise GroupError("lamp table must be square")
        n = t.shape[0]
        if t.min() < 0 or t.max() >= n:
            raise GroupError("lamp table entries out of range")
        ident = [e for e in range(n) if all(t[e, a] == a and t[a, e] == a for a in range(n))]
        if not ident:
            raise GroupError("lamp table has no two-sided identity")
        e = ident[0]
        if e != 0:
            perm = list(range(n))
            perm[0], perm[e] = perm[e], perm[0]
            relabel = np.argsort(perm)
            t = relabel[t[np.ix_(perm, perm)]]
        self.table = t
        self.table.setflags(write=False)
        self.order = n
        self.identity = 0
        self.name = name or f"L{n}"
        inv = np.full(n, -1, dtype=np.int64)
        for a in range(n):
            hits = np.nonzero(t[a] == 0)[0]
            if len(hits) != 1 or t[hits[0], a] != 0:
                raise GroupError(f"lamp element {a} has no two-sided inverse")
            inv[a] = hits[0]
        self.inverse = inv
        self.inverse.setflags(write=False)
        if validate:
            lhs = t[t, :]                      # (ab)c as lhs[a, b, c]
            rhs = t[:, t]                      # a(bc) as rhs[a, b, c]
            if not np.array_equal(lhs, rhs):
                raise GroupError("lamp table is not associative")
        self.abelian = bool(np.array_equal(t, t.T))

    @classmethod
    def cyclic(cls, m: int) -> "LampGroup":
        a = np.arange(m)
        return cls((a[:, None] + a[None, :]) % m, name=f"Z{m}")

    @classmethod
    def symmetric(cls, n: int) -> "LampGroup":
        perms = list(itertools.permutations(range(n)))
        index = {p: i for i, p in enumerate(perms)}
        table = [[index[tuple(p[q[i]] for i in range(n))] for q in perms] for p in perms]
        return cls(table, name=f"S{n}")

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        return int(self.inverse[a])

    def check(self, a) -> None:
        if not (isinstance(a, (int, np.integer)) and 0 <= a < self.order):
            raise GroupError(f"lamp index {a!r} out of range for {self.name}")

    def __repr__(self):
        return f"LampGroup({self.name})"

    def __eq__(self, other):
        return isinstance(other, LampGroup) and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash(self.table.tobytes())


_NAMED_LAMPS = {"Z2": lambda: LampGroup.cyclic(2), "Z3": lambda: LampGroup.cyclic(3),
                "S3": lambda: LampGroup.symmetric(3)}


def lamp_group(name_or_table) -> LampGroup:
    if isinstance(name_or_table, LampGroup):
        return name_or_table
    if isinstance(name_or_table, str):
        if name_or_table in _NAMED_LAMPS:
            return _NAMED_LAMPS[name_or_table]()
        if name_or_table.startswith("Z") and name_or_table[1:].isdigit():
            return LampGroup.cyclic(int(name_or_table[1:]))
        raise GroupError(f"unknown lamp group {name_or_table!r}")
    return LampGroup(name_or_table)


# ---------------------------------------------------------------------------
# lamp configurations and wreath elements


class LampConfig(Mapping):
    """Finitely supported lamp configuration; absent sites hold the identity."""

    __slots__ = ("_data", "_hash")

    def __init__(self, data: Mapping | Iterable = ()):
        items = data.items() if isinstance(data, Mapping) else data
        self._data = {k: int(v) for k, v in items if int(v) != 0}
        self._hash = None

    @classmethod
    def _trusted(cls, data: dict) -> "LampConfig":
        obj = cls.__new__(cls)
        obj._data = data
        obj._hash = None
        return obj

    def __getitem__(self, site):
        return self._data[site]

    def get(self, site, default=0):
        return self._data.get(site, default)

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    @property
    def support(self) -> frozenset:
        return frozenset(self._data)

    def __eq__(self, other):
        if isinstance(other, LampConfig):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == {k: v for k, v in other.items() if v != 0}
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __repr__(self):
        return f"LampConfig({self._data!r})"

    def translate(self, model: BaseModel, x) -> "LampConfig":
        """``(x Phi)(z) = Phi(x^{-1} z)``: the value at ``s`` moves to ``x s``."""
        return LampConfig._trusted({model.mul(x, s): v for s, v in self._data.items()})

    def pointwise(self, L: LampGroup, other: "LampConfig") -> "LampConfig":
        out = dict(self._data)
        for s, v in other._data.items():
            w = L.mul(out.get(s, 0), v)
            if w:
                out[s] = w
            else:
                out.pop(s, None)
        return LampConfig._trusted(out)

    def inverse(self, L: LampGroup) -> "LampConfig":
        return LampConfig._trusted({s: L.inv(v) for s, v in self._data.items()})

    def restrict(self, keep) -> "LampConfig":
        return LampConfig._trusted({s: v for s, v in self._data.items() if keep(s)})


EMPTY_CONFIG = LampConfig()


def delta(site, s: int) -> LampConfig:
    """Configuration equal to ``s`` at ``site`` and the identity elsewhere."""
    return LampConfig({site: s})


@dataclass(frozen=True)
class WreathElem:
    lamps: LampConfig = field(default_factory=LampConfig)
    pos: tuple = ()

    def __repr__(self):
        return f"WreathElem({dict(self.lamps)!r}, {self.pos!r})"


def wreath_identity(model: BaseModel) -> WreathElem:
    return WreathElem(EMPTY_CONFIG, model.identity)


def _check_lamps(L: LampGroup, cfg) -> None:
    for v in cfg.values():
        L.check(v)


def wreath_mul(L: LampGroup, model: BaseModel, g: WreathElem, h: WreathElem) -> WreathElem:
    """``(Phi, x)(Psi, y) = (Phi * (x Psi), x y)``."""
    lamps_g = _as_config(g.lamps, model)
    lamps_h = _as_config(h.lamps, model)
    _check_lamps(L, lamps_g)
    _check_lamps(L, lamps_h)
    moved = lamps_h.translate(model, g.pos)
    return WreathElem(lamps_g.pointwise(L, moved), model.mul(g.pos, h.pos))


def wreath_inv(L: LampGroup, model: BaseModel, g: WreathElem) -> WreathElem:
    """``(Phi, x)^{-1} = (x^{-1} Phi^{-1}, x^{-1})``."""
    lamps = _as_config(g.lamps, model)
    _check_lamps(L, lamps)
    xi = model.inv(g.pos)
    return WreathElem(lamps.inverse(L).translate(model, xi), xi)


def _as_config(lamps, model) -> LampConfig:
    if isinstance(lamps, LampConfig):
        return lamps
    materialize = getattr(lamps, "materialize", None)
    if materialize is not None:
        return materialize(model)
    return LampConfig(lamps)


def binomial_tail_bound_holds(n: int, k: int) -> bool:
    """Exact check of ``sum_{j<=k} C(n, j) <= 2 (n e / k)^k`` for ``1 <= k <= n/3``.

    ``e`` is irrational, so the right side is compared through rational
    lower bounds of ``e^k`` (truncated exponential series), which is
    conservative: ``True`` certifies the inequality.
    """
    if not (1 <= k and 3 * k <= n):
        raise ValueError("need 1 <= k <= n/3")
    from fractions import Fraction
    lhs = sum(math.comb(n, j) for j in range(k + 1))
    # e^k >= sum_{i<=N} k^i / i!  (all terms positive)
    ek = Fraction(0)
    term = Fraction(1)
    for i in range(0, 4 * k + 40):
        ek += term
        term = term * k / (i + 1)
    rhs_lower = 2 * Fraction(n, k) ** k * ek
    return lhs <= rhs_lower


def log_binomial_tail(n: int, k: int) -> float:
    """``log sum_{j<=k} C(n, j)`` computed exactly then logged."""
    k = max(0, min(k, n))
    return math.log(sum(math.comb(n, j) for j in range(k + 1)))


# ---------------------------------------------------------------------------
# random elements and the axiom suite


def random_point(model: BaseModel, rng: random.Random, scale: int = 6):
    """A random point of a group base model: uniform coordinates in
    ``[-scale, scale]``, or a random reduced word of length at most ``scale``."""
    if isinstance(model, Lattice):
        return tuple(rng.randint(-scale, scale) for _ in range(model.d))
    if isinstance(model, Heisenberg):
        return tuple(rng.randint(-scale, scale) for _ in range(3))
    if isinstance(model, FreeGroup):
        n = rng.randint(0, scale)
        return model.reduce(rng.choice((-1, 1)) * rng.randint(1, model.k) for _ in range(n))
    raise GroupError(f"{model!r} has no group law")


def random_wreath_elem(L: LampGroup, model: BaseModel, rng: random.Random,
                       scale: int = 6, support: int = 4) -> WreathElem:
    lamps = {}
    for _ in range(rng.randint(0, support)):
        v = rng.randrange(L.order)
        if v:
            lamps[random_point(model, rng, scale)] = v
    return WreathElem(LampConfig(lamps), random_point(model, rng, scale))


def axiom_suite(model: BaseModel, L: LampGroup | None = None, triples: int = 10_000,
                seed: int = 0) -> dict:
    """Associativity, identity and inverse on random triples, checked exactly.

    With ``L`` the checks run in ``L wr model``; otherwise in the base group.
    Returns counts of failures per axiom.
    """
    rng = random.Random(seed)
    if L is None:
        mul, inv, e = model.mul, model.inv, model.identity
        draw = lambda: random_point(model, rng)  # noqa: E731
    else:
        mul = lambda g, h: wreath_mul(L, model, g, h)  # noqa: E731
        inv = lambda g: wreath_inv(L, model, g)  # noqa: E731
        e = wreath_identity(model)
        draw = lambda: random_wreath_elem(L, model, rng)  # noqa: E731
    fails = {"associativity": 0, "identity": 0, "inverse": 0}
    for _ in range(triples):
        a, b, c = draw(), draw(), draw()
        if mul(mul(a, b), c) != mul(a, mul(b, c)):
            fails["associativity"] += 1
        if mul(a, e) != a or mul(e, a) != a:
            fails["identity"] += 1
        if mul(a, inv(a)) != e or mul(inv(a), a) != e:
            fails["inverse"] += 1
    return {"triples": triples, "failures": fails}
