"""Arithmetic in lamplighter groups L wr G over lattices, the Heisenberg group
and free groups.  Run: python demos/01_wreath_arithmetic.py"""
from wreathwalk.groups import (FreeGroup, Heisenberg, LampConfig, Lattice, WreathElem, axiom_suite,
                               delta, lamp_group, wreath_inv, wreath_mul)

# %% base groups
F = FreeGroup(2)
print("ab * Ba =", F.mul(F.parse("ab"), F.parse("Ba")))     # reduces to aa
H = Heisenberg()
print("|(0,0,1)| in H3 =", H.word_length((0, 0, 1)))         # central element has length 4
print("ball sizes in F2:", [F.ball_size(r) for r in range(5)])

# %% lamps: switch the lamp at the origin, walk two steps, switch again
Z2 = lamp_group("Z2")
L1 = Lattice(1)
switch = WreathElem(delta((0,), 1), (0,))
move2 = WreathElem(LampConfig(), (2,))
g = wreath_mul(Z2, L1, wreath_mul(Z2, L1, switch, move2), switch)
print("switch * move(2) * switch =", dict(g.lamps), "at", g.pos)
print("inverse:", wreath_inv(Z2, L1, g))

# %% non-abelian lamps: S3 lamps do not commute with themselves at the same site
S3 = lamp_group("S3")
a, b = WreathElem(delta((0,), 1), (0,)), WreathElem(delta((0,), 3), (0,))
print("S3 lamps ab vs ba:", wreath_mul(S3, L1, a, b).lamps, wreath_mul(S3, L1, b, a).lamps)

# %% randomized group-axiom check on a few models
for model, L in [(Lattice(3), Z2), (H, Z2), (F, S3)]:
    res = axiom_suite(model, L, triples=1000, seed=0)
    print(f"{L.name} wr {model!r}: {res['failures']}")
