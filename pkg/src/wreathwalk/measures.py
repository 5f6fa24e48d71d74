"""Increment measures on lamplighter groups: construction, sampling, exact statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import special

from .groups import (
    BaseModel, EMPTY_CONFIG, GroupError, Heisenberg, LampConfig, LampGroup,
    Lattice, WreathElem, lamp_group, model_from_json,
)


class MeasureError(ValueError):
    """Invalid measure description."""


PROB_TOL = 1e-12


# ---------------------------------------------------------------------------
# random streams


class RngStream:
    """Counter-based (Philox) stream; one per worker, equal seeds replay exactly."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.gen = np.random.Generator(np.random.Philox(key=self.seed))

    @classmethod
    def for_run(cls, seed0: int, index: int) -> "RngStream":
        return cls(seed0 + index)

    def random(self, size=None):
        return self.gen.random(size)

    def choice_index(self, cdf: np.ndarray, size=None):
        u = self.gen.random(size)
        idx = np.searchsorted(cdf, u, side="right")
        return np.minimum(idx, len(cdf) - 1)


# ---------------------------------------------------------------------------
# lazily described lamp functions


@dataclass(frozen=True)
class BallLamps:
    """Lamp function equal to ``value`` on the quadratic-form ball
    ``{z : z^T Q z <= radius^2}`` of a lattice and identity elsewhere."""

    radius: int
    quad: tuple                       # rational d x d matrix as nested tuples
    value: int = 1

    def contains(self, z) -> bool:
        d = len(self.quad)
        q = sum(self.quad[i][j] * z[i] * z[j] for i in range(d) for j in range(d))
        return q <= self.radius ** 2

    def euclid_bound(self) -> int:
        """Integer ``B`` with every member inside the box ``[-B, B]^d``."""
        lam = min(np.linalg.eigvalsh(np.array(self.quad, dtype=float)))
        return int(math.floor(self.radius / math.sqrt(lam) + 1e-9)) + 1

    def materialize(self, model: BaseModel, cap: int = 1_000_000) -> LampConfig:
        d = len(self.quad)
        b = self.euclid_bound()
        if (2 * b + 1) ** d > cap:
            raise GroupError(f"ball lamp of radius {self.radius} too large to materialize")
        axes = np.arange(-b, b + 1)
        grid = np.stack(np.meshgrid(*([axes] * d), indexing="ij"), -1).reshape(-1, d)
        keep = [tuple(int(c) for c in z) for z in grid if self.contains(tuple(int(c) for c in z))]
        return LampConfig({z: self.value for z in keep})

    def values(self):
        return (self.value,)

    def __len__(self):
        raise TypeError("size of a ball lamp is not materialized")


# ---------------------------------------------------------------------------
# base measures


@dataclass
class BaseMeasure:
    """Finitely supported measure on a base group."""

    model: BaseModel
    points: list
    weights: list                     # exact Fractions
    probs: np.ndarray = field(init=False)
    cdf: np.ndarray = field(init=False)

    def __post_init__(self):
        merged: dict = {}
        for p, w in zip(self.points, self.weights):
            merged[p] = merged.get(p, Fraction(0)) + Fraction(w)
        self.points = [p for p, w in merged.items() if w > 0]
        self.weights = [merged[p] for p in self.points]
        self.probs = np.array([float(w) for w in self.weights])
        if abs(self.probs.sum() - 1) > PROB_TOL:
            raise MeasureError(f"base weights sum to {self.probs.sum()}, not 1")
        self.cdf = np.cumsum(self.probs)
        self.cdf[-1] = 1.0

    @classmethod
    def simple(cls, model: BaseModel, hold: Fraction | float = 0) -> "BaseMeasure":
        hold = Fraction(hold) if not isinstance(hold, float) else Fraction(str(hold))
        gens = list(model.generators)
        w = (1 - hold) / len(gens)
        pts = gens + ([model.identity] if hold else [])
        ws = [w] * len(gens) + ([hold] if hold else [])
        return cls(model, pts, ws)

    @property
    def moves(self) -> np.ndarray:
        return np.array(self.points, dtype=np.int64)

    @property
    def max_step(self) -> int:
        return max(self.model.word_length(p) for p in self.points)

    def mean(self):
        d = len(self.points[0])
        return tuple(sum(w * p[i] for p, w in zip(self.points, self.weights)) for i in range(d))

    def covariance(self):
        d = len(self.points[0])
        m = self.mean()
        return tuple(tuple(sum(w * (p[i] - m[i]) * (p[j] - m[j])
                               for p, w in zip(self.points, self.weights))
                           for j in range(d)) for i in range(d))

    def is_simple_nearest(self) -> bool:
        return all(self.model.word_length(p) <= 1 for p in self.points)


# ---------------------------------------------------------------------------
# step distributions


KINDS = ("standard_generator", "switch_walk_switch", "second_moment_table", "heavy_tail_ball")


@dataclass
class ProjectionStats:
    mean: tuple
    covariance: tuple
    _moment: Any

    def cov_norm(self, x) -> float:
        """``<Cov x, x>^{1/2}``."""
        d = len(self.mean)
        q = sum(self.covariance[i][j] * x[i] * x[j] for i in range(d) for j in range(d))
        return math.sqrt(q)

    def lamp_radius_moment(self, a: float) -> float:
        return self._moment(a)


class StepDistribution:
    """Finitely supported increment measure on ``L wr Gamma``.

    ``atoms[i]`` is a :class:`WreathElem` whose lamp part is a
    :class:`LampConfig` or a :class:`BallLamps`.
    """

    def __init__(self, L: LampGroup, model: BaseModel, atoms: Sequence[WreathElem],
                 weights: Sequence, kind: str, spec: Mapping | None = None,
                 cap: int | None = None, exact_weights: bool = True):
        if kind not in KINDS:
            raise MeasureError(f"unknown measure kind {kind!r}")
        if len(atoms) != len(weights) or not atoms:
            raise MeasureError("need a non-empty list of atoms with matching weights")
        self.L = L
        self.model = model
        self.kind = kind
        self.spec = dict(spec) if spec else {}
        self.cap = cap
        merged: dict = {}
        order = []
        for a, w in zip(atoms, weights):
            w = _as_fraction(w) if exact_weights else w
            if w < 0:
                raise MeasureError("negative weight")
            if w == 0:
                continue
            key = (a.lamps, a.pos)
            if key not in merged:
                order.append(a)
                merged[key] = w
            else:
                merged[key] += w
        self.atoms = order
        self.weights = [merged[(a.lamps, a.pos)] for a in order]
        self.probs = np.array([float(w) for w in self.weights])
        total = float(math.fsum(self.probs))
        if abs(total - 1) > PROB_TOL:
            raise MeasureError(f"probabilities sum to {total!r}, not 1")
        self.cdf = np.cumsum(self.probs)
        self.cdf[-1] = 1.0
        for a in self.atoms:
            model.validate(a.pos)
            if isinstance(a.lamps, LampConfig):
                for s, v in a.lamps.items():
                    model.validate(s)
                    L.check(v)
            elif isinstance(a.lamps, BallLamps):
                L.check(a.lamps.value)
            else:
                raise MeasureError("atom lamps must be a LampConfig or BallLamps")
        if kind == "standard_generator":
            for a in self.atoms:
                if not _standard_shape(model, a):
                    raise MeasureError(f"atom {a!r} is neither (delta^s, o) nor (id, x)")
        if kind == "heavy_tail_ball" and cap is None:
            raise MeasureError("heavy_tail_ball needs an explicit truncation cap")
        self._entropy = None
        self._stats = None
        self._arrays = None

    # -- basic accessors

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        return f"StepDistribution({self.kind}, {self.L.name} wr {self.model!r}, {len(self)} atoms)"

    def entropy(self) -> float:
        """Shannon entropy in nats."""
        if self._entropy is None:
            p = self.probs
            self._entropy = float(-np.sum(p * np.log(p)))
        return self._entropy

    def entropy_bits(self) -> float:
        return self.entropy() / math.log(2)

    def projection(self) -> BaseMeasure:
        return BaseMeasure(self.model, [a.pos for a in self.atoms], list(self.weights))

    @property
    def arrays(self) -> "AtomArrays":
        if self._arrays is None:
            self._arrays = AtomArrays.build(self)
        return self._arrays

    def is_standard(self) -> bool:
        return all(_standard_shape(self.model, a) for a in self.atoms)

    def projection_stats(self) -> ProjectionStats:
        if not isinstance(self.model, Lattice):
            raise MeasureError("projection statistics need a lattice base")
        if self._stats is None:
            proj = self.projection()
            self._stats = ProjectionStats(proj.mean(), proj.covariance(), self._radius_moment)
        return self._stats

    def _radius_moment(self, a: float) -> float:
        if self.kind == "heavy_tail_ball":
            return heavy_tail_radius_moment(a, self.spec_params().get("d", self.model.d))
        total = 0.0
        for atom, p in zip(self.atoms, self.probs):
            rad = lamp_radius(self.model, atom.lamps)
            total += p * (rad ** a if rad else 0.0)
        return total

    def spec_params(self) -> dict:
        return dict(self.spec.get("params", {}))

    def to_json(self) -> dict:
        return self.spec


def _as_fraction(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, (int, np.integer)):
        return Fraction(int(w))
    if isinstance(w, str):
        return Fraction(w)
    if isinstance(w, (float, np.floating)):
        return Fraction(repr(float(w)))
    raise MeasureError(f"unsupported weight {w!r}")


def _standard_shape(model: BaseModel, a: WreathElem) -> bool:
    if isinstance(a.lamps, BallLamps):
        return False
    if not a.lamps:
        return True
    return a.pos == model.identity and set(a.lamps) == {model.identity}


def lamp_radius(model: BaseModel, lamps) -> int:
    if isinstance(lamps, BallLamps):
        return ball_l1_radius(len(lamps.quad), lamps)
    if not lamps:
        return 0
    return max(model.word_length(s) for s in lamps)


# ---------------------------------------------------------------------------
# atom arrays for the simulation kernels


@dataclass
class AtomArrays:
    """Per-atom numeric data used by the vectorized walk kernels.

    ``moves`` holds lattice/Heisenberg displacements; ``origin_lamp`` the lamp
    value an atom applies at its own base point (``-1`` if the atom carries a
    non-local lamp function); ``ball_radius`` the radius of ball atoms
    (``-1`` for others).
    """

    moves: np.ndarray | None
    origin_lamp: np.ndarray
    ball_radius: np.ndarray
    local: bool

    @classmethod
    def build(cls, mu: StepDistribution) -> "AtomArrays":
        model = mu.model
        moves = None
        if isinstance(model, (Lattice, Heisenberg)):
            moves = np.array([a.pos for a in mu.atoms], dtype=np.int64)
        origin = np.zeros(len(mu), dtype=np.int64)
        ball = np.full(len(mu), -1, dtype=np.int64)
        local = True
        for i, a in enumerate(mu.atoms):
            if isinstance(a.lamps, BallLamps):
                ball[i] = a.lamps.radius
                origin[i] = -1
                local = False
            elif a.lamps:
                if set(a.lamps) == {model.identity}:
                    origin[i] = a.lamps[model.identity]
                else:
                    origin[i] = -1
                    local = False
        return cls(moves, origin, ball, local)


# ---------------------------------------------------------------------------
# builders


def lamp_or_move(L: LampGroup, model: BaseModel, lamp_prob=Fraction(1, 4),
                 hold=Fraction(0), spec: Mapping | None = None) -> StepDistribution:
    """Switch the lamp at the lamplighter (uniform non-identity value) with
    probability ``lamp_prob``, hold with probability ``hold``, otherwise step
    to a uniform generator."""
    lamp_prob = _as_fraction(lamp_prob)
    hold = _as_fraction(hold)
    move_prob = 1 - lamp_prob - hold
    if lamp_prob < 0 or hold < 0 or move_prob < 0:
        raise MeasureError("lamp_prob + hold must lie in [0, 1]")
    atoms, weights = [], []
    o = model.identity
    if lamp_prob:
        for s in range(1, L.order):
            atoms.append(WreathElem(LampConfig({o: s}), o))
            weights.append(lamp_prob / (L.order - 1))
    if hold:
        atoms.append(WreathElem(EMPTY_CONFIG, o))
        weights.append(hold)
    gens = model.generators
    for g in gens:
        atoms.append(WreathElem(EMPTY_CONFIG, g))
        weights.append(move_prob / len(gens))
    spec = spec or {"kind": "standard_generator", "lamp_group": L.name, "base": model.to_json(),
                    "params": {"lamp_prob": str(lamp_prob), "hold": str(hold)}}
    return StepDistribution(L, model, atoms, weights, "standard_generator", spec)


def switch_walk_switch(L: LampGroup, model: BaseModel, spec: Mapping | None = None) -> StepDistribution:
    """``(delta^{s1}, o)(id, g)(delta^{s2}, o)`` with ``s1, s2`` uniform on L
    and ``g`` a uniform generator, all independent."""
    from .groups import delta, wreath_mul
    atoms, weights = [], []
    gens = model.generators
    w = Fraction(1, L.order ** 2 * len(gens))
    o = model.identity
    for s1 in range(L.order):
        for g in gens:
            for s2 in range(L.order):
                e = wreath_mul(L, model, WreathElem(delta(o, s1), o), WreathElem(EMPTY_CONFIG, g))
                e = wreath_mul(L, model, e, WreathElem(delta(o, s2), o))
                atoms.append(e)
                weights.append(w)
    spec = spec or {"kind": "switch_walk_switch", "lamp_group": L.name, "base": model.to_json(),
                    "params": {}}
    return StepDistribution(L, model, atoms, weights, "switch_walk_switch", spec)


def table_measure(L: LampGroup, model: BaseModel, rows: Sequence, spec: Mapping | None = None,
                  kind: str = "second_moment_table") -> StepDistribution:
    """Rows are ``(lamp pairs [[site, value], ...], move, weight)``."""
    atoms, weights = [], []
    for row in rows:
        lamps, move, w = row
        cfg = LampConfig({model.point_from_json(s): int(v) for s, v in lamps})
        atoms.append(WreathElem(cfg, model.point_from_json(move)))
        weights.append(w)
    return StepDistribution(L, model, atoms, weights, kind, spec)


def zeta3() -> float:
    return float(special.zeta(3.0, 1.0))


def heavy_tail_ball(cap: int, d: int = 3, L: LampGroup | None = None,
                    spec: Mapping | None = None) -> StepDistribution:
    """With probability 1/2 a simple-walk step on ``Z^d`` and no lamps; with
    probability ``c0 / n^3`` no move and the indicator of the covariance-norm
    ball ``B(n)`` as lamp function, ``c0 = 1 / (2 zeta(3))``.

    The family is truncated at ``n <= cap``; the lamp atoms are renormalized
    to keep total mass 1/2.  The covariance is ``I / (2d)`` whatever the cap
    (lamp atoms do not move), so ``B(n) = {z : |z|_2^2 <= 2 d n^2}``.
    """
    if cap is None or int(cap) < 1:
        raise MeasureError("heavy_tail_ball needs cap >= 1")
    cap = int(cap)
    L = L or LampGroup.cyclic(2)
    model = Lattice(d)
    gens = model.generators
    atoms = [WreathElem(EMPTY_CONFIG, g) for g in gens]
    weights = [Fraction(1, 2 * len(gens))] * len(gens)
    ns = np.arange(1, cap + 1, dtype=float)
    raw = ns ** -3.0
    lamp_w = 0.5 * raw / math.fsum(raw)
    quad = _heavy_tail_quad(d)
    for n in range(1, cap + 1):
        atoms.append(WreathElem(BallLamps(n, quad, 1), model.identity))
        weights.append(Fraction(float(lamp_w[n - 1])))
    spec = spec or {"kind": "heavy_tail_ball", "lamp_group": L.name, "base": model.to_json(),
                    "params": {"cap": cap, "d": d}}
    # weights of the lamp atoms are floats: normalization is checked numerically
    return StepDistribution(L, model, atoms, weights, "heavy_tail_ball", spec, cap=cap)


def _heavy_tail_quad(d: int) -> tuple:
    c = Fraction(1, 2 * d)
    return tuple(tuple(c if i == j else Fraction(0) for j in range(d)) for i in range(d))


def heavy_tail_c0() -> float:
    return 1.0 / (2.0 * zeta3())


def ball_l1_radius(d: int, lamps: BallLamps) -> int:
    """Largest l1 norm of an integer point in the quadratic ball (isotropic
    forms only)."""
    q = lamps.quad[0][0]
    if any(lamps.quad[i][j] != (q if i == j else 0) for i in range(d) for j in range(d)):
        raise MeasureError("l1 radius implemented for isotropic balls")
    r2 = Fraction(lamps.radius ** 2) / q
    return max_l1_in_sphere(d, math.floor(r2))


def max_l1_in_sphere(d: int, r2: int) -> int:
    """``max { |z|_1 : z in Z^d, |z|_2^2 <= r2 }``.

    The optimum is nearly balanced; each coordinate is searched in a window
    around the balanced value and the last coordinate is solved exactly.
    """
    if r2 < 0:
        return -1
    if d == 1:
        return math.isqrt(r2)
    centre = math.isqrt(r2 // d)
    best = -1
    for x in range(max(0, centre - 3), min(math.isqrt(r2), centre + 3) + 1):
        rest = max_l1_in_sphere(d - 1, r2 - x * x)
        if rest >= 0:
            best = max(best, x + rest)
    return best


def heavy_tail_radius_moment(a: float, d: int = 3, n_exact: int = 2000) -> float:
    """``E[(rad supp Psi_1)^a]`` for the untruncated heavy-tail family.

    Infinite for ``a >= 2``.  Otherwise the first ``n_exact`` terms are summed
    exactly and the tail uses ``rad(n) ~ kappa n`` with a Hurwitz zeta sum.
    """
    if a >= 2:
        return math.inf
    if a <= 0:
        raise ValueError("moment order must be positive")
    c0 = heavy_tail_c0()
    total = 0.0
    for n in range(1, n_exact + 1):
        total += c0 * n ** -3.0 * max_l1_in_sphere(d, 2 * d * n * n) ** a
    kappa = math.sqrt(2 * d) * math.sqrt(d)
    total += c0 * kappa ** a * float(special.zeta(3.0 - a, n_exact + 1.0))
    return total


# ---------------------------------------------------------------------------
# spec parsing


def build_measure(spec: Mapping) -> StepDistribution:
    """Build a measure from ``{"kind", "lamp_group", "base", "params"}``."""
    if not isinstance(spec, Mapping):
        raise MeasureError("measure spec must be an object")
    allowed = {"kind", "lamp_group", "base", "params"}
    extra = set(spec) - allowed
    if extra:
        raise MeasureError(f"unknown measure key(s): {sorted(extra)}")
    kind = spec.get("kind")
    params = dict(spec.get("params", {}))
    L = lamp_group(spec.get("lamp_group", "Z2"))
    try:
        model = model_from_json(spec.get("base", {"kind": "lattice", "d": 3}))
    except (KeyError, GroupError) as exc:
        raise MeasureError(f"bad base spec: {exc}") from exc
    if kind == "standard_generator":
        _only(params, {"lamp_prob", "hold", "lamp_weights", "move_weights"})
        if "lamp_weights" in params or "move_weights" in params:
            atoms, weights = [], []
            o = model.identity
            for s, w in params.get("lamp_weights", {}).items():
                atoms.append(WreathElem(LampConfig({o: int(s)}), o))
                weights.append(w)
            for mv, w in params.get("move_weights", []):
                atoms.append(WreathElem(EMPTY_CONFIG, model.point_from_json(mv)))
                weights.append(w)
            return StepDistribution(L, model, atoms, weights, kind, spec)
        return lamp_or_move(L, model, params.get("lamp_prob", "1/4"), params.get("hold", 0), spec)
    if kind == "switch_walk_switch":
        _only(params, set())
        return switch_walk_switch(L, model, spec)
    if kind == "second_moment_table":
        _only(params, {"atoms"})
        if "atoms" not in params:
            raise MeasureError("second_moment_table needs params.atoms")
        return table_measure(L, model, params["atoms"], spec)
    if kind == "heavy_tail_ball":
        _only(params, {"cap", "d"})
        if "cap" not in params:
            raise MeasureError("heavy_tail_ball needs params.cap")
        return heavy_tail_ball(params["cap"], params.get("d", getattr(model, "d", 3)), L, spec)
    raise MeasureError(f"unknown measure kind {kind!r}")


def _only(params: Mapping, allowed: set) -> None:
    extra = set(params) - allowed
    if extra:
        raise MeasureError(f"unknown measure parameter(s): {sorted(extra)}")


# ---------------------------------------------------------------------------
# sampling


def sample_increment(mu: StepDistribution, rng: RngStream) -> WreathElem:
    return mu.atoms[int(rng.choice_index(mu.cdf))]


def sample_indices(mu: StepDistribution, rng: RngStream, n: int) -> np.ndarray:
    return rng.choice_index(mu.cdf, n).astype(np.int64)


def entropy_exact(mu: StepDistribution) -> float:
    return mu.entropy()


def projection_stats(mu: StepDistribution) -> ProjectionStats:
    return mu.projection_stats()
