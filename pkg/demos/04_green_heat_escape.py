"""Green metric on the free group, heat-kernel decay and escape from balls in
Z^d.  Run: python demos/04_green_heat_escape.py"""
import math

from wreathwalk.estimators import (cov_norm_start, escape_probability, fit_loglog_slope, green_metric,
                                   heat_kernel_curve)
from wreathwalk.groups import FreeGroup, Lattice
from wreathwalk.measures import BaseMeasure

# %% Green metric: analytic |x| log 3 vs hitting frequency within 1000 steps
F = FreeGroup(2)
base = BaseMeasure.simple(F)
for w in ("a", "ab"):
    x = F.parse(w)
    mc = green_metric(F, base, x, "mc", 1000, 50_000, seed=0)
    print(f"x={w}: analytic {len(x) * math.log(3):.4f}, Monte Carlo {mc.estimate:.4f} +- {mc.stderr:.4f}")

# %% heat kernel on Z3: sup_x p_t(o, x) ~ c t^{-3/2}
srw = BaseMeasure.simple(Lattice(3))
times = list(range(2, 129, 2))
curve = heat_kernel_curve(srw, times)
print("fitted slope:", round(fit_loglog_slope(times, [curve[t] for t in times])["slope"], 3))

# %% escape from a ball of radius R when starting at distance 2R: 1 - 2^{2-d}
for d in (3, 4):
    b = BaseMeasure.simple(Lattice(d))
    R = 20.0
    rep = escape_probability(b, cov_norm_start(b, 2 * R), R, "cov", 10 ** 6, 1000, seed=d)
    print(f"d={d}: escape {rep.estimate:.3f} (limit {1 - 2.0 ** (2 - d):.3f})")
