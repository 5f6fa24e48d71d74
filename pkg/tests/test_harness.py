import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wreathwalk.groups import FreeGroup, Heisenberg, LampConfig, Lattice, WreathElem, lamp_group
from wreathwalk.harness import (
    BIG,
    HarnessBudgetError,
    HarnessError,
    HarnessReport,
    QnDescriptor,
    _lit_max,
    _mismatch_min,
    ball_pipeline,
    capture_classical,
    classical_capture_times,
    count_ellipsoid,
    lattice_snapshot,
    liouville_pipeline,
    nearest_neighbor_tree_kernel,
    nonliouville_pipeline,
    qn_classical,
    tree_capture_times,
    tree_kernel,
    tree_run,
    tree_sava_harness,
)
from wreathwalk.measures import StepDistribution, heavy_tail_ball, lamp_or_move
from wreathwalk.walk import SnapshotWindowError, Trajectory, simulate

Z2 = lamp_group("Z2")


def _l1_shell(d, lo, hi):
    return sum(1 for x in itertools.product(range(-hi, hi + 1), repeat=d)
               if lo <= sum(map(abs, x)) <= hi)


# ---------------------------------------------------------------------------
# classical construction


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 1000))
def test_classical_cardinality_brute_force(d, n, seed):
    t = simulate(lamp_or_move(Z2, Lattice(d)), 300, seed)
    q = qn_classical(lattice_snapshot(t, n * n), n, Lattice(d))
    brute = _l1_shell(d, n, n * n)
    assert math.exp(q.log_cardinality) == pytest.approx(brute)
    members = list(q.members())
    assert len(members) == brute
    assert all(q.contains(phi, x) for phi, x in members[:: max(1, len(members) // 40)])


def test_classical_cardinality_d3_n2():
    L3 = Lattice(3)
    q = qn_classical(lattice_snapshot(simulate(lamp_or_move(Z2, L3), 50, 1), 4), 2, L3)
    assert math.exp(q.log_cardinality) == pytest.approx(L3.ball_size(4) - L3.ball_size(1))


def test_classical_membership_examples():
    L3 = Lattice(3)
    t = simulate(lamp_or_move(Z2, L3), 400, 2)
    snap = lattice_snapshot(t, 9)
    q = qn_classical(snap, 3, L3)
    x = (3, 0, 0)
    phi = LampConfig({z: v for z, v in snap.lamps.items() if L3.word_length(z) < 3})
    assert q.contains(phi, x)
    assert not q.contains(phi, (1, 1, 0))
    if snap.lamps:
        far = LampConfig({**dict(phi), (9, 0, 0): 1})
        assert not q.contains(far, x)


def test_classical_snapshot_too_small():
    t = simulate(lamp_or_move(Z2, Lattice(3)), 50, 1)
    with pytest.raises(SnapshotWindowError):
        qn_classical(lattice_snapshot(t, 3), 2, Lattice(3))


def _brute_capture(t, n, end):
    L = t.model
    snap = lattice_snapshot(t, n * n)
    q = qn_classical(snap, n, L)
    out = []
    for m in range(n, min(end, t.n) + 1):
        if q.contains(t.lamp_config_at(m), t.position(m)):
            out.append(m)
    return out


@pytest.mark.parametrize("seed", range(4))
def test_capture_sweep_matches_brute_force(seed):
    t = simulate(lamp_or_move(Z2, Lattice(3)), 600, seed)
    for n in (2, 3):
        assert list(classical_capture_times(t, n, 600)) == _brute_capture(t, n, 600)


@st.composite
def event_streams(draw):
    # each site keeps one score; old values chain from the previous event at that site
    n_sites = draw(st.integers(1, 6))
    scores = draw(st.lists(st.integers(-1, 6), min_size=n_sites, max_size=n_sites))
    seq = draw(st.lists(st.tuples(st.integers(0, n_sites - 1), st.integers(0, 2)), max_size=40))
    state, sid, score, old, new = {}, [], [], [], []
    for s, v in seq:
        sid.append(s)
        score.append(scores[s])
        old.append(state.get(s, 0))
        new.append(v)
        state[s] = v
    return sid, score, old, new


@settings(max_examples=80, deadline=None)
@given(event_streams())
def test_sweeps_match_brute_force(stream):
    sid, score, old, new = stream
    lit = _lit_max(score, old, new)
    mis = _mismatch_min(sid, score, old, new)
    final = {}
    for s, v in zip(sid, new):
        final[s] = v
    sc = dict(zip(sid, score))
    for j in range(len(sid) + 1):
        cur = {}
        for s, v in zip(sid[:j], new[:j]):
            cur[s] = v
        lit_ref = max((sc[s] for s, v in cur.items() if v and sc[s] >= 0), default=-1)
        mis_ref = min((sc[s] for s in final if sc[s] >= 0 and cur.get(s, 0) != final[s]),
                      default=BIG)
        assert lit[j] == lit_ref
        assert mis[j] == mis_ref


def test_capture_monotone_in_horizon():
    t = simulate(lamp_or_move(Z2, Lattice(3)), 5000, 3)
    a = set(classical_capture_times(t, 4, 500).tolist())
    b = set(classical_capture_times(t, 4, 5000).tolist())
    assert a <= b


def test_outward_ray_captured():
    L3 = Lattice(3)
    mu = StepDistribution(Z2, L3, [WreathElem(LampConfig(), (1, 0, 0))], [1], "standard_generator")
    t = Trajectory(mu, np.zeros(200, dtype=np.int64), seed=None)
    for n in (2, 4, 8):
        times = classical_capture_times(t, n, 200)
        assert len(times) > 0 and times[0] == n


def test_classical_preconditions():
    with pytest.raises(HarnessError):
        capture_classical(lamp_or_move(Z2, Lattice(1)), [4])
    drift = StepDistribution(Z2, Lattice(3), [WreathElem(LampConfig(), (1, 0, 0))], [1],
                             "standard_generator")
    with pytest.raises(HarnessError):
        capture_classical(drift, [4])


def test_capture_classical_small_run():
    rep = capture_classical(lamp_or_move(Z2, Lattice(3)), [4, 8], 50, range(40))
    assert rep.columns[:4] == ["n", "capture_freq", "capture_se", "log_size_per_n"]
    sizes = [r["log_size_per_n"] for r in rep.rows]
    assert sizes[0] > sizes[1]
    assert all(0 < r["capture_freq"] <= 1 for r in rep.rows)
    assert rep.csv_text().splitlines()[0].startswith("n,capture_freq,capture_se,log_size_per_n")


def test_report_validation():
    with pytest.raises(HarnessError):
        HarnessReport("classical", {}, [{"n": 1, "capture_freq": 1.5, "capture_se": 0,
                                         "log_size_per_n": 0.1}])
    with pytest.raises(HarnessError):
        HarnessReport("classical", {}, [{"n": 1, "capture_freq": 0.5, "capture_se": 0,
                                         "log_size_per_n": math.inf}])
    with pytest.raises(HarnessError):
        QnDescriptor("nope", {}, None, {}, lambda lamps, x: False)


# ---------------------------------------------------------------------------
# Liouville base


def test_liouville_small_run():
    mu = lamp_or_move(Z2, Lattice(3))
    rep = liouville_pipeline(mu, 0.5, 16, 1, [256], range(10))
    row = rep.row(256)
    assert row["log_S_U_per_n"] < 2 * 0.5
    assert row["capture_freq"] >= 0.8
    assert row["mean_W"] <= 3 * row["W_budget"]


def test_liouville_preconditions():
    mu = lamp_or_move(Z2, Lattice(3))
    with pytest.raises(HarnessError):
        liouville_pipeline(mu, 0.5, 16, 1, [250], range(2))
    with pytest.raises(HarnessBudgetError):
        liouville_pipeline(mu, 0.5, 16, 1, [256], range(2), budget=1000)
    with pytest.raises(HarnessError):
        liouville_pipeline(lamp_or_move(Z2, Lattice(2)), 0.5, 16, 1, [256], range(2))
    with pytest.raises(HarnessError):
        liouville_pipeline(lamp_or_move(Z2, FreeGroup(2)), 0.5, 16, 1, [256], range(2))
    with pytest.raises(HarnessError):
        liouville_pipeline(mu, 0.05, 4, 1, [256], range(2))


# ---------------------------------------------------------------------------
# non-Liouville base


def test_nonliouville_small_run():
    mu = lamp_or_move(Z2, FreeGroup(2))
    rep = nonliouville_pipeline(mu, 0.1, [100], range(40), speed_walks=2000)
    row = rep.row(100)
    assert 0 <= row["freq_A"] <= 1
    if row["freq_support_given_D"] is not None:
        assert row["freq_support_given_D"] >= 0.9
    assert row["W_radius"] == math.floor(100 * row["h_prime"] * 1.1 / math.log(3) + 1e-9)


def test_nonliouville_preconditions():
    with pytest.raises(HarnessError):
        nonliouville_pipeline(lamp_or_move(Z2, Lattice(3)), 0.1, [50], range(2))
    with pytest.raises(HarnessError):
        nonliouville_pipeline(lamp_or_move(Z2, FreeGroup(2)), 0.4, [50], range(2))
    with pytest.raises(HarnessError):
        nonliouville_pipeline(lamp_or_move(Z2, Heisenberg()), 0.1, [50], range(2))


# ---------------------------------------------------------------------------
# second-moment ball construction


def _count_ellipsoid_brute(Q, R):
    Q = np.asarray(Q, float)
    w = np.linalg.eigvalsh(Q).min()
    b = int(math.ceil(R / math.sqrt(w))) + 1
    pts = np.array(list(itertools.product(range(-b, b + 1), repeat=len(Q))))
    return int(np.sum(np.einsum("ij,jk,ik->i", pts, Q, pts) <= R * R + 1e-9))


@pytest.mark.parametrize("Q,R", [(np.eye(3) / 8, 2.0), (np.eye(3) / 3, 3.5),
                                 ([[2, 1], [1, 2]], 4.0), (np.eye(4) / 4, 2.2)])
def test_count_ellipsoid_brute_force(Q, R):
    assert count_ellipsoid(np.asarray(Q, float), R) == _count_ellipsoid_brute(Q, R)


def test_ball_standard_generators_have_no_C():
    rep = ball_pipeline(lamp_or_move(Z2, Lattice(3)), 0.25, 2.0, [100], range(20))
    row = rep.row(100)
    assert row["freq_C"] == 0
    # lamps only ever sit on visited sites, so A_n forces D_n
    assert row["freq_AD"] == row["freq_A"]


def test_ball_heavy_tail_reports_chebyshev():
    rep = ball_pipeline(heavy_tail_ball(cap=200), 0.25, 2.0, [50], range(10))
    row = rep.row(50)
    assert row["chebyshev_C_bound"] > 0
    assert row["capture_freq"] is None
    assert math.isinf(rep.params["rad2_untruncated"])


# ---------------------------------------------------------------------------
# trees


def test_tree_kernel_validation():
    with pytest.raises(HarnessError, match="drifting"):
        tree_kernel({"atoms": [{"p": "1/2", "move_up": 1}, {"p": "1/2", "lamp_value": 1}]})
    with pytest.raises(HarnessError, match="unbounded"):
        tree_kernel({"atoms": [{"p": "1/2", "move_up": "inf"}, {"p": "1/2", "move_down": 1}]})
    with pytest.raises(HarnessError):
        tree_kernel({"atoms": [{"p": "1/2", "move_up": 1}]})
    k = nearest_neighbor_tree_kernel()
    assert k.nearest_neighbor and k.drift == 0 and k.range == 1


def test_tree_capture_times_respect_start():
    run = tree_run(nearest_neighbor_tree_kernel(), 4000, seed=3)
    a = tree_capture_times(run, 2, 3, None)
    b = tree_capture_times(run, 20, 3, None)
    assert set(b.tolist()) == {m for m in a.tolist() if m >= 20}
    wide = tree_capture_times(run, 2, 3, 2)
    assert set(a.tolist()) <= set(wide.tolist())


def test_tree_harness_small_run():
    k = nearest_neighbor_tree_kernel()
    rep = tree_sava_harness(k, [2, 4], range(60), horizon_factor=100, alpha_walks=2000,
                            alpha_horizon=2000, diag_N=500, diag_walks=100)
    assert all(0 < r["capture_freq"] <= 1 for r in rep.rows)
    assert rep.rows[0]["log_Q"] == rep.rows[1]["log_Q"]
    assert 0 < rep.rows[0]["alpha_hat"] < 1


def test_tree_bounded_range_constant_size():
    k = tree_kernel({"atoms": [{"p": "1/3", "lamp_up": 1, "lamp_value": 1},
                               {"p": "1/3", "move_up": 2}, {"p": "1/3", "move_down": 2}]})
    rep = tree_sava_harness(k, [2, 4, 8], range(30), horizon_factor=50, alpha_walks=1000,
                            alpha_horizon=1000, diag_N=200, diag_walks=50)
    assert len({r["log_Q"] for r in rep.rows}) == 1
