"""Simulating lamplighter walks: trajectories, lamp configurations at any time,
boundary snapshots and lamp-flip censuses.  Run: python demos/02_walks_and_lamps.py"""
import numpy as np

from wreathwalk.groups import Lattice, lamp_group
from wreathwalk.measures import heavy_tail_ball, lamp_or_move
from wreathwalk.walk import ball_census_counts, final_config_snapshot, lamp_flip_census, simulate

Z2 = lamp_group("Z2")

# %% a lamp-or-move walk on Z2 wr Z3
mu = lamp_or_move(Z2, Lattice(3))
print("step entropy (bits):", mu.entropy_bits())
t = simulate(mu, 10_000, seed=1)
print("position at 10^4:", t.position(10_000), "lit lamps:", len(t.final_config()))
print("lamps at time 100:", dict(t.lamp_config_at(100)))

# %% the lamps near the origin freeze on transient bases, but keep flipping on Z1
for d in (1, 3):
    m = lamp_or_move(Z2, Lattice(d))
    flags = [final_config_snapshot(simulate(m, 20_000, s), 3, 20_000).stable for s in range(50)]
    print(f"d={d}: window of radius 3 unchanged in the second half for {np.mean(flags):.2f} of runs")

# %% census of lamp changes at the origin
rep = lamp_flip_census(t, [(0, 0, 0)], "single")
print("origin lamp changes by 10^3 / 10^4:", rep.counts_at(1000), rep.counts_at(10_000))

# %% heavy-tailed lamp balls: the origin keeps flipping, but two neighbours flip together
ht = heavy_tail_ball(cap=200)
res = ball_census_counts(ht, [10_000, 100_000], seed=3, sites=[(0, 0, 0), (1, 0, 0)])
print("site counts:", res["counts"], "difference counts:", res["difference"])
