"""Free metabelian groups as 1-chains on the Cayley graph of Z^d.
Run: python demos/07_metabelian.py"""
import numpy as np

from wreathwalk.metabelian import (meta_identity, meta_mul, meta_walk_limit, random_word,
                                   stability_frequency, word_commutator, word_image)

# %% the commutator [a1, a2] is the boundary of the unit square
sq = word_image(2, word_commutator("a1", "a2", 2))
print("[a1,a2] ->", dict(sq.chain), "endpoint", sq.endpoint)

# %% word images are a homomorphism, and double commutators vanish
rng = np.random.default_rng(0)
u, v = random_word(3, 12, rng), random_word(3, 12, rng)
print("homomorphism:", word_image(3, u + v) == meta_mul(word_image(3, u), word_image(3, v)))
c = word_commutator(word_commutator(u, v, 3), word_commutator(v, u + u, 3), 3)
print("[[u,v],[v,uu]] trivial:", word_image(3, c) == meta_identity(3))

# %% the coefficient on the origin edge settles for transient bases
for d in (1, 2, 3):
    traces = meta_walk_limit(d, 20_000, range(100), [((0,) * d, 1)])
    print(f"d={d}: origin edge unchanged in the second half for {stability_frequency(traces):.2f}")
