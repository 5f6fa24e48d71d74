"""Boundary-capture harnesses: how often the walk at time m lands in an
explicit set Q_n built from the limit lamps, and how big Q_n is.
Small scale; the shipped recipes run the full versions.
Run: python demos/06_capture_harness.py"""
from wreathwalk.groups import FreeGroup, Lattice, lamp_group
from wreathwalk.harness import (ball_pipeline, capture_classical, liouville_pipeline,
                                nearest_neighbor_tree_kernel, nonliouville_pipeline, tree_sava_harness)
from wreathwalk.measures import heavy_tail_ball, lamp_or_move

Z2 = lamp_group("Z2")
mu3 = lamp_or_move(Z2, Lattice(3))

# %% shells n <= |x| <= n^2 on Z3
rep = capture_classical(mu3, [4, 8], horizon_factor=50, seeds=range(100))
print(rep.csv_text())

# %% Liouville base: block typical sets plus a small exceptional set
rep = liouville_pipeline(mu3, 0.5, 16, 1, [256], seeds=range(10))
r = rep.row(256)
print(f"Liouville: capture {r['capture_freq']:.2f}, log|S x U|/n {r['log_S_U_per_n']:.3f}")

# %% free base: the walk leaves every ball, lamps are read off a word ball W
rep = nonliouville_pipeline(lamp_or_move(Z2, FreeGroup(2)), 0.1, [100], seeds=range(100),
                            speed_walks=2000)
r = rep.row(100)
print(f"free base: A_n {r['freq_A']:.2f}, D_n {r['freq_D']:.2f}, capture {r['capture_freq']:.2f}")

# %% covariance balls; heavy-tailed lamp balls break the second-moment picture
for name, mu in (("lamp-or-move", mu3), ("heavy tail", heavy_tail_ball(cap=200))):
    r = ball_pipeline(mu, 0.25, 2.0, [100], seeds=range(30)).row(100)
    print(f"{name}: A {r['freq_A']:.2f}, C {r['freq_C']:.2f}, D {r['freq_D']:.2f}")

# %% trees with a fixed end: Q_n is a single element for nearest-neighbour kernels
rep = tree_sava_harness(nearest_neighbor_tree_kernel(), [2, 4], seeds=range(50), horizon_factor=100,
                        alpha_walks=2000, alpha_horizon=2000, diag_N=500, diag_walks=100)
print(rep.csv_text())
