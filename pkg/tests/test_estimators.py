import math
from fractions import Fraction

import numpy as np
import pytest

from wreathwalk.estimators import (
    avez_curve,
    cut_radii,
    cutpoint_times,
    cutsphere_event,
    entropy_of_probs,
    escape_probability,
    exact_distribution,
    exact_entropy,
    exact_lattice_law,
    fit_loglog_slope,
    green_metric,
    heat_kernel_curve,
    heat_kernel_sup,
    plugin_entropy,
    sample_elements,
    typical_set_build,
)
from wreathwalk.groups import FreeGroup, LampConfig, Lattice, WreathElem, lamp_group
from wreathwalk.measures import BaseMeasure, StepDistribution, lamp_or_move, switch_walk_switch
from wreathwalk.walk import simulate

Z2 = lamp_group("Z2")


def three_atom():
    L = Lattice(1)
    atoms = [WreathElem(LampConfig({(0,): 1}), (0,)), WreathElem(LampConfig(), (1,)),
             WreathElem(LampConfig(), (-1,))]
    return StepDistribution(Z2, L, atoms, ["1/2", "1/4", "1/4"], "standard_generator")


def test_plugin_trivial_cases():
    assert plugin_entropy([7] * 50).estimate == 0.0
    assert plugin_entropy(list(range(8)) * 5).estimate == pytest.approx(math.log(8))


def _convolve_exact(mu, n):
    # independent oracle: brute force over all atom sequences
    from itertools import product
    from wreathwalk.groups import wreath_identity, wreath_mul
    law = {}
    for seq in product(range(len(mu)), repeat=n):
        g, p = wreath_identity(mu.model), 1.0
        for i in seq:
            g = wreath_mul(mu.L, mu.model, g, mu.atoms[i])
            p *= mu.probs[i]
        key = (g.pos, frozenset(g.lamps.items()))
        law[key] = law.get(key, 0.0) + p
    return law


def test_exact_distribution_matches_brute_force():
    mu = three_atom()
    law = exact_distribution(mu, 3)
    oracle = _convolve_exact(mu, 3)
    assert set(law) == set(oracle)
    for k, p in oracle.items():
        assert law[k] == pytest.approx(p)
    assert exact_entropy(mu, 3) == pytest.approx(entropy_of_probs(list(oracle.values())))


def test_plugin_within_three_se_of_exact():
    mu = three_atom()
    rep = plugin_entropy(sample_elements(mu, 2, 20000, seed=1))
    assert abs(rep.estimate - exact_entropy(mu, 2)) <= 3 * rep.stderr


def test_avez_n1_matches_step_entropy():
    mu = switch_walk_switch(Z2, Lattice(2))
    (n, h, rep), = avez_curve(mu, [1], 20000, seed=2)
    assert abs(h - mu.entropy()) <= 3 * rep.stderr


def test_avez_z1_decreasing():
    curve = avez_curve(lamp_or_move(Z2, Lattice(1)), [16, 32, 64], 4000, seed=3)
    vals = [h for _, h, _ in curve]
    assert vals[0] > vals[1] > vals[2]


def test_typical_set_deterministic():
    ts = typical_set_build({"x": 1.0}, 10, 0.1)
    assert ts.log_size_bound() == 0
    assert ts.contains(("x",) * 10)


def test_typical_set_bound_and_coverage():
    law = {0: 0.4, 1: 0.3, 2: 0.2, 3: 0.1}
    ts = typical_set_build(law, 200, 0.15, samples=20000, seed=4)
    assert ts.log_size_bound() / 200 <= ts.H + ts.eps
    assert ts.coverage >= 0.99
    assert all(ts.contains(s) for s in list(ts.observed)[:50])


def test_green_metric_basics():
    F = FreeGroup(2)
    base = BaseMeasure.simple(F)
    assert green_metric(F, base, (), "mc", 10, 100).estimate == 0.0
    reps = green_metric(F, base, (1,), "mc", [10, 100, 1000], 20000, seed=5)
    vals = [r.estimate for r in reps]
    assert vals[0] >= vals[1] >= vals[2]
    rho = green_metric(F, base, (1,), "analytic_tree").estimate
    assert vals[-1] >= rho - 3 * reps[-1].stderr


def _tree_hit_probability(k_regular, iters=200):
    # first-passage recursion: p = 1/k + (k-1)/k * p^2, smallest root
    p = 0.0
    for _ in range(iters):
        p = 1 / k_regular + (k_regular - 1) / k_regular * p * p
    return p


def test_green_metric_tree_oracle():
    F = FreeGroup(2)
    p = _tree_hit_probability(4)
    assert -math.log(p) == pytest.approx(math.log(3))
    assert green_metric(F, BaseMeasure.simple(F), (1, 2), "analytic_tree").estimate == pytest.approx(
        2 * -math.log(p))


def test_heat_kernel_t1_is_max_atom():
    base = BaseMeasure(Lattice(2), [(1, 0), (-1, 0), (0, 1), (0, -1)], ["1/2", "1/6", "1/6", "1/6"])
    assert heat_kernel_sup(base, 1).estimate == 0.5


def test_heat_kernel_return_identity_matches_direct_max():
    base = lamp_or_move(Z2, Lattice(3), 0).projection()
    curve = heat_kernel_curve(base, [2, 4, 6, 8, 10])
    for t, v in curve.items():
        law, _ = exact_lattice_law(base, t)
        assert v == pytest.approx(law.max(), rel=1e-12)


def test_heat_kernel_asymmetric_uses_direct_max():
    base = BaseMeasure(Lattice(1), [(1,), (-1,)], ["2/3", "1/3"])
    curve = heat_kernel_curve(base, [4])
    law, _ = exact_lattice_law(base, 4)
    assert curve[4] == pytest.approx(law.max())


def test_heat_kernel_lazy_slope_unchanged():
    simple = lamp_or_move(Z2, Lattice(3), 0).projection()
    lazy = lamp_or_move(Z2, Lattice(3), 0, Fraction(1, 2)).projection()
    ts = list(range(8, 65, 4))
    a = heat_kernel_curve(simple, ts)
    b = heat_kernel_curve(lazy, ts)
    sa = fit_loglog_slope(ts, [a[t] for t in ts])["slope"]
    sb = fit_loglog_slope(ts, [b[t] for t in ts])["slope"]
    assert abs(sa - sb) < 0.2
    assert -1.7 <= sb <= -1.3


def test_heat_kernel_mc_close_to_exact():
    base = lamp_or_move(Z2, Lattice(3), 0).projection()
    mc = heat_kernel_sup(base, 8, samples=200000, seed=1)
    assert abs(mc.estimate - heat_kernel_sup(base, 8).estimate) < 6 * mc.stderr


def test_escape_start_inside_rejected():
    base = BaseMeasure.simple(Lattice(3))
    with pytest.raises(ValueError):
        escape_probability(base, (1, 0, 0), 3.0)


def test_escape_tree_oracle():
    F = FreeGroup(2)
    rep = escape_probability(BaseMeasure.simple(F), (1,), 0, walks=20000, horizon=None, seed=6)
    assert rep.estimate == pytest.approx(1 - _tree_hit_probability(4), abs=0.02)


def test_cutpoints_ray_and_backtrack():
    ray = np.arange(11)[:, None]
    assert list(cutpoint_times(ray, 3)) == list(range(11))
    back = np.array([[0], [1], [0], [1], [2], [3]])
    cps = cutpoint_times(back, 5)
    assert 0 not in cps and 1 not in cps


def test_cutpoint_density_z5():
    mu = lamp_or_move(Z2, Lattice(5), 0)
    t = simulate(mu, 10 ** 4, seed=7)
    cps = cutpoint_times(t, 1000)
    assert np.sum(cps <= 9000) / 9000 >= 0.02


def test_cutsphere_ray_and_return():
    norms = np.arange(20)
    assert all(cutsphere_event(norms, r + 0.5) for r in range(19))
    assert all(cut_radii(norms, 1, 18))
    out_and_back = np.array([0, 1, 2, 3, 4, 3, 2, 1, 0])
    assert not cutsphere_event(out_and_back, 2.5)


def test_cut_radii_matches_event():
    t = simulate(lamp_or_move(Z2, Lattice(3), 0), 3000, seed=8)
    norms = t.word_lengths()
    ind = cut_radii(norms, 1, 30)
    for r in range(1, 31):
        # integer radius: the strict inequalities of cut_r coincide with the event at r
        assert ind[r - 1] == cutsphere_event(norms, r)
