import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from wreathwalk.groups import EMPTY_CONFIG, LampConfig, Lattice, WreathElem, lamp_group
from wreathwalk.measures import (
    BallLamps,
    MeasureError,
    RngStream,
    StepDistribution,
    build_measure,
    entropy_exact,
    heavy_tail_ball,
    heavy_tail_c0,
    lamp_or_move,
    projection_stats,
    sample_increment,
    sample_indices,
)

Z2 = lamp_group("Z2")
Z3 = Lattice(3)


def lamp_or_move_z3():
    return lamp_or_move(Z2, Z3, Fraction(1, 4))


def test_lamp_or_move_atoms():
    mu = lamp_or_move_z3()
    assert len(mu) == 7
    assert sorted(mu.weights) == [Fraction(1, 8)] * 6 + [Fraction(1, 4)]
    assert mu.entropy_bits() == pytest.approx(2.75)


def test_weights_must_sum_to_one():
    atoms = [WreathElem(EMPTY_CONFIG, g) for g in Z3.generators]
    with pytest.raises(MeasureError):
        StepDistribution(Z2, Z3, atoms, [0.15] * 6, "standard_generator")


def test_standard_shape_is_enforced():
    bad = WreathElem(LampConfig({(0, 0, 0): 1}), (1, 0, 0))
    with pytest.raises(MeasureError):
        StepDistribution(Z2, Z3, [bad], [1], "standard_generator")


def test_heavy_tail_needs_cap():
    with pytest.raises(MeasureError):
        build_measure({"kind": "heavy_tail_ball", "params": {}})


def test_heavy_tail_weights():
    mu = heavy_tail_ball(cap=50)
    lamp = [(a.lamps.radius, p) for a, p in zip(mu.atoms, mu.probs) if isinstance(a.lamps, BallLamps)]
    moves = [p for a, p in zip(mu.atoms, mu.probs) if not isinstance(a.lamps, BallLamps)]
    assert math.fsum(moves) == pytest.approx(0.5)
    assert math.fsum(p for _, p in lamp) == pytest.approx(0.5)
    # truncation renormalizes the c0 / n^3 law: ratios are exact inverse cubes
    p1 = dict(lamp)[1]
    for n, p in lamp:
        assert p == pytest.approx(p1 / n ** 3)
    untruncated = heavy_tail_c0()
    assert untruncated == pytest.approx(1 / (2 * 1.2020569031595942))
    assert p1 >= untruncated


def test_entropy_values():
    point = StepDistribution(Z2, Z3, [WreathElem(EMPTY_CONFIG, (1, 0, 0))], [1], "standard_generator")
    assert entropy_exact(point) == 0.0
    simple = lamp_or_move(Z2, Z3, 0)
    assert entropy_exact(simple) == pytest.approx(math.log(6))


def test_projection_stats():
    st = projection_stats(lamp_or_move_z3())
    assert st.mean == (0, 0, 0)
    cov = np.array([[float(c) for c in row] for row in st.covariance])
    np.testing.assert_allclose(cov, np.eye(3) / 4)
    assert st.cov_norm((2, 0, 0)) == pytest.approx(1.0)


def test_radius_moments():
    ht = heavy_tail_ball(cap=100)
    st = projection_stats(ht)
    assert math.isinf(st.lamp_radius_moment(2))
    assert math.isfinite(st.lamp_radius_moment(1.5))
    assert projection_stats(lamp_or_move_z3()).lamp_radius_moment(2) == 0.0


def test_point_mass_sampling():
    atom = WreathElem(EMPTY_CONFIG, (0, 1, 0))
    mu = StepDistribution(Z2, Z3, [atom], [1], "standard_generator")
    rng = RngStream(3)
    assert all(sample_increment(mu, rng) == atom for _ in range(20))


def test_sampling_replays():
    mu = lamp_or_move_z3()
    a = sample_indices(mu, RngStream(11), 1000)
    b = sample_indices(mu, RngStream(11), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_indices(mu, RngStream(12), 1000))


def test_sampling_frequencies_chi_square():
    mu = lamp_or_move_z3()
    idx = sample_indices(mu, RngStream(5), 10 ** 6)
    counts = np.bincount(idx, minlength=len(mu))
    res = stats.chisquare(counts, mu.probs * 10 ** 6)
    assert res.pvalue > 1e-4


def test_build_measure_rejects_unknown_keys():
    with pytest.raises(MeasureError):
        build_measure({"kind": "standard_generator", "parms": {}})
    with pytest.raises(MeasureError):
        build_measure({"kind": "standard_generator", "params": {"lamp_prb": "1/4"}})
    with pytest.raises(MeasureError):
        build_measure({"kind": "no_such_kind"})


def test_switch_walk_switch_from_spec():
    mu = build_measure({"kind": "switch_walk_switch", "lamp_group": "Z2",
                        "base": {"kind": "lattice", "d": 2}})
    assert len(mu) == 16
    assert math.fsum(mu.probs) == pytest.approx(1.0)
