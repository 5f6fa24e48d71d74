import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wreathwalk.groups import (
    EnumerationCapError,
    FreeGroup,
    GroupError,
    Heisenberg,
    LampConfig,
    LampGroup,
    Lattice,
    Tree,
    WreathElem,
    axiom_suite,
    binomial_tail_bound_holds,
    delta,
    lamp_group,
    log_binomial_tail,
    random_wreath_elem,
    wreath_identity,
    wreath_inv,
    wreath_mul,
)

Z2 = lamp_group("Z2")
S3 = lamp_group("S3")


def test_base_products():
    assert Lattice(3).mul((1, 0, 0), (0, 2, 0)) == (1, 2, 0)
    F = FreeGroup(2)
    assert F.mul(F.parse("ab"), F.parse("Ba")) == F.parse("aa")
    assert Heisenberg().mul((1, 0, 0), (0, 1, 0)) == (1, 1, 1)


def test_base_inverses():
    assert Lattice(3).inv((1, 2, 0)) == (-1, -2, 0)
    F = FreeGroup(2)
    assert F.inv(F.parse("aB")) == F.parse("bA")
    assert Heisenberg().inv((1, 1, 0)) == (-1, -1, 1)


def test_word_lengths():
    assert Lattice(3).word_length((1, 2, 0)) == 3
    F = FreeGroup(2)
    assert F.word_length(F.parse("abA")) == 3
    assert Heisenberg().word_length((0, 0, 1)) == 4


def _heisenberg_bfs(r):
    # independent oracle: 3x3 unipotent integer matrices
    gens = []
    for x, y in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        m = np.eye(3, dtype=np.int64)
        m[0, 1], m[1, 2] = x, y
        gens.append(m)
    key = lambda m: (int(m[0, 1]), int(m[1, 2]), int(m[0, 2]))  # noqa: E731
    seen = {key(np.eye(3, dtype=np.int64)): 0}
    frontier = [np.eye(3, dtype=np.int64)]
    for depth in range(1, r + 1):
        nxt = []
        for m in frontier:
            for g in gens:
                p = m @ g
                if key(p) not in seen:
                    seen[key(p)] = depth
                    nxt.append(p)
        frontier = nxt
    return seen


def test_heisenberg_matches_matrix_oracle():
    oracle = _heisenberg_bfs(4)
    H = Heisenberg()
    assert oracle[(0, 0, 1)] == 4
    assert len([p for p, k in oracle.items() if k <= 2]) == 17
    assert len(H.ball(2)) == 17
    for p, k in oracle.items():
        assert H.word_length(p) == k


def test_ball_sizes():
    assert len(Lattice(1).ball(2)) == 5
    assert len(FreeGroup(2).ball(2)) == 17
    for r in range(5):
        assert FreeGroup(2).ball_size(r) == 2 * 3 ** r - 1
        assert Lattice(3).ball_size(r) == len(Lattice(3).ball(r))


def test_ball_cap():
    with pytest.raises(EnumerationCapError):
        Lattice(3).ball(30, cap=1000)


def test_invalid_points():
    with pytest.raises(GroupError):
        FreeGroup(2).validate((1, -1))
    with pytest.raises(GroupError):
        FreeGroup(2).validate((3,))
    with pytest.raises(GroupError):
        Heisenberg().validate((1, 2))


def test_lamp_group_tables():
    assert Z2.mul(1, 1) == 0
    assert S3.order == 6 and not S3.abelian
    with pytest.raises(GroupError):
        LampGroup([[0, 1], [0, 1]])
    # identity not at index 0 is relabelled
    L = LampGroup([[1, 0], [0, 1]])
    assert L.mul(0, 1) == 1 and L.mul(1, 1) == 0


def test_wreath_unfolds():
    F = Lattice(1)
    e = WreathElem(LampConfig(), (3,))
    lamp = WreathElem(delta((0,), 1), (0,))
    assert wreath_mul(Z2, F, e, lamp) == WreathElem(LampConfig({(3,): 1}), (3,))
    Z3 = lamp_group("Z3")
    a, b = WreathElem(delta((0,), 1), (0,)), WreathElem(delta((0,), 1), (0,))
    assert wreath_mul(Z3, F, a, b) == WreathElem(LampConfig({(0,): 2}), (0,))
    g = WreathElem(LampConfig({(0,): 1}), (1,))
    h = WreathElem(LampConfig({(0,): 1}), (-1,))
    assert wreath_mul(Z2, F, g, h) == WreathElem(LampConfig({(0,): 1, (1,): 1}), (0,))


def test_wreath_inverses():
    F = Lattice(1)
    g = WreathElem(LampConfig({(0,): 1}), (1,))
    gi = wreath_inv(Z2, F, g)
    assert gi == WreathElem(LampConfig({(-1,): 1}), (-1,))
    assert wreath_mul(Z2, F, g, gi) == wreath_identity(F)
    s = WreathElem(delta((0,), 1), (0,))
    assert wreath_inv(S3, F, s).lamps[(0,)] == S3.inv(1)
    assert wreath_inv(Z2, F, WreathElem(LampConfig(), (2,))) == WreathElem(LampConfig(), (-2,))


def test_lamp_config_rejects_out_of_range():
    with pytest.raises(GroupError):
        wreath_mul(Z2, Lattice(1), WreathElem(LampConfig({(0,): 5}), (0,)), wreath_identity(Lattice(1)))


def test_tree_geometry():
    T = Tree(3)
    o = T.identity
    assert T.level(o) == 0
    p = T.parent(o)
    assert T.level(p) == -1
    assert all(T.in_cone(o, n) for n in range(10))
    with pytest.raises(GroupError):
        T.mul(o, o)


@pytest.mark.parametrize("model", [Lattice(1), Lattice(3), Heisenberg(), FreeGroup(2), FreeGroup(3)],
                         ids=repr)
def test_axiom_suite_base(model):
    res = axiom_suite(model, None, 500, seed=1)
    assert res["failures"] == {"associativity": 0, "identity": 0, "inverse": 0}


@pytest.mark.parametrize("L", ["Z2", "Z3", "S3"])
@pytest.mark.parametrize("model", [Lattice(2), Heisenberg(), FreeGroup(2)], ids=repr)
def test_axiom_suite_wreath(model, L):
    res = axiom_suite(model, lamp_group(L), 300, seed=2)
    assert sum(res["failures"].values()) == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_wreath_associativity_nonabelian(seed):
    rng = random.Random(seed)
    F = FreeGroup(2)
    a, b, c = (random_wreath_elem(S3, F, rng) for _ in range(3))
    assert wreath_mul(S3, F, wreath_mul(S3, F, a, b), c) == wreath_mul(S3, F, a, wreath_mul(S3, F, b, c))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=30))
def test_free_reduction_is_idempotent(letters):
    F = FreeGroup(2)
    w = F.reduce(letters)
    F.validate(w)
    assert F.reduce(w) == w
    assert F.mul(w, F.inv(w)) == ()


def _brute_tail_holds(n, k):
    return sum(math.comb(n, j) for j in range(k + 1)) <= 2 * (n * math.e / k) ** k


def test_binomial_bound_exhaustive():
    for n in range(3, 61):
        for k in range(1, n // 3 + 1):
            assert binomial_tail_bound_holds(n, k)
            assert _brute_tail_holds(n, k)


def test_binomial_bound_domain():
    with pytest.raises(ValueError):
        binomial_tail_bound_holds(6, 3)
    assert log_binomial_tail(10, 0) == 0.0
    assert log_binomial_tail(4, 4) == pytest.approx(math.log(16))
