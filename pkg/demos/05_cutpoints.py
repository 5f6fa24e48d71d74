"""Cut points and cut spheres of lattice walks.  Run: python demos/05_cutpoints.py"""
import numpy as np

from wreathwalk.estimators import cutpoint_times, cutsphere_probability, fit_loglog_slope
from wreathwalk.groups import Lattice, lamp_group
from wreathwalk.measures import BaseMeasure, lamp_or_move
from wreathwalk.walk import simulate

# %% cut points: past and (windowed) future ranges are disjoint
for d in (3, 5):
    t = simulate(lamp_or_move(lamp_group("Z2"), Lattice(d), 0), 20_000, seed=d)
    cps = cutpoint_times(t, 2000)
    print(f"d={d}: {np.sum(cps <= 18_000)} cut times before 18000")

# %% cut spheres: P(cut_r) decays like 1/r on Z3
srw = BaseMeasure.simple(Lattice(3))
rs = [4, 8, 16]
ps = [cutsphere_probability(srw, r, 100 * r * r, 5000, seed=r).estimate for r in rs]
print("P(cut_r):", [round(p, 4) for p in ps], "slope", round(fit_loglog_slope(rs, ps)["slope"], 2))
