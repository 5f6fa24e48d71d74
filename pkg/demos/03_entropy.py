"""Entropy of X_n: exact convolution against plug-in estimates, Avez curves
and typical sets.  Run: python demos/03_entropy.py"""
from wreathwalk.estimators import (avez_curve, exact_entropy, plugin_entropy, sample_elements,
                                   typical_set_build)
from wreathwalk.groups import Lattice, lamp_group
from wreathwalk.measures import lamp_or_move, switch_walk_switch

Z2 = lamp_group("Z2")

# %% exact vs plug-in at n = 4
mu = switch_walk_switch(Z2, Lattice(1))
exact = exact_entropy(mu, 4)
rep = plugin_entropy(sample_elements(mu, 4, 50_000, seed=0))
print(f"H(X_4) exact {exact:.4f}, plug-in {rep.estimate:.4f} +- {rep.stderr:.4f}")
rep = plugin_entropy(sample_elements(mu, 4, 50_000, seed=0), "miller_madow")
print(f"Miller-Madow corrected {rep.estimate:.4f}")

# %% H(X_n)/n decays on Z2 wr Z1 and stays larger on Z2 wr Z3
for d in (1, 3):
    curve = avez_curve(lamp_or_move(Z2, Lattice(d)), [8, 16, 32], 4000, seed=1)
    print(f"d={d}:", ", ".join(f"n={n}: {h:.3f}" for n, h, _ in curve))

# %% typical sets: blocks whose empirical log-probability is within eps of the entropy
law = {0: 0.5, 1: 0.25, 2: 0.25}
ts = typical_set_build(law, 100, 0.1, samples=5000, seed=2)
print(f"log|T|/n <= {ts.log_size_bound() / 100:.3f} vs H = {ts.H:.3f}, coverage {ts.coverage:.3f}")
