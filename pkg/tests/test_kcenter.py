import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynkcenter import (BudgetExceeded, EuclideanBackend, MatrixBackend, MetricPoint,
                        NavigatingNet, coverage, enumerate_guesses, euclidean_kcenter,
                        greedy_kcenter, guess_count, loop_length, meb, pairwise_matrix)
from dynkcenter.kcenter import next_delta, step_fraction
from dynkcenter.oracles import kcenter_exact_euclidean, kcenter_exact_metric, meb_exact
from dynkcenter.trace import dumps

from conftest import build


# -- greedy ---------------------------------------------------------------

def test_greedy_single_point(core):
    net, _ = build([[1.0, 1.0]], core)
    for k in (1, 3):
        sol = greedy_kcenter(net, k, 0.5)
        assert sol.centers == [0] and sol.radius == 0.0 and sol.covered


def test_greedy_takes_every_point_when_k_is_large(core):
    net, _ = build([[0.0], [2.0], [7.0]], core)
    sol = greedy_kcenter(net, 5, 0.1)
    assert sorted(sol.centers) == [0, 1, 2] and sol.radius == 0.0


def test_greedy_two_pairs(core):
    net, pts = build([[0.0], [0.1], [100.0], [100.1]], core)
    sol = greedy_kcenter(net, 2, 0.5)
    opt = kcenter_exact_metric(pts, 2, net.backend).value
    assert opt == pytest.approx(0.1, abs=1e-12)
    assert sol.radius <= 2.5 * opt * (1 + 1e-9)
    assert sol.radius <= 0.25 and sol.covered


def test_greedy_starts_from_smallest_id(core):
    net, _ = build(np.random.default_rng(30).random((20, 2)), core)
    net.delete(0)
    assert greedy_kcenter(net, 3, 0.5).centers[0] == 1


def test_greedy_on_matrix_backend(core):
    rng = np.random.default_rng(31)
    X = [tuple(x) for x in rng.random((15, 2))]
    be = MatrixBackend(pairwise_matrix(X, EuclideanBackend(2)).tolist())
    pts = [MetricPoint(i, i) for i in range(15)]
    net = NavigatingNet.build(pts, be, core=core)
    sol = greedy_kcenter(net, 3, 0.5)
    assert all(isinstance(c, int) for c in sol.centers)
    assert sol.covered
    assert sol.radius <= 2.5 * kcenter_exact_metric(pts, 3, be).value * (1 + 1e-9)
    assert json.loads(dumps(sol.to_json()))["centers"] == sol.centers


def test_greedy_errors(core):
    net = NavigatingNet(EuclideanBackend(1), core=core)
    with pytest.raises(ValueError):
        greedy_kcenter(net, 1, 0.5)
    net.insert(MetricPoint(0, (0.0,)))
    with pytest.raises(ValueError):
        greedy_kcenter(net, 0, 0.5)
    with pytest.raises(ValueError):
        greedy_kcenter(net, 1, 0.0)


# -- enclosing ball walk ----------------------------------------------------

@pytest.mark.parametrize("eps,steps", [(0.1, 60), (0.25, 24), (0.3, 20), (0.5, 12),
                                       (0.7, 8), (1.0, 6), (3.0, 2), (6.0, 1)])
def test_loop_length(eps, steps):
    assert loop_length(eps) == steps


def test_first_step_goes_halfway():
    for eps in (0.1, 0.5, 1.0, 2.0):
        assert step_fraction(1.0, eps) == 0.5


@given(st.floats(1e-9, 1.0), st.sampled_from([0.1, 0.25, 0.5, 1.0]))
def test_shrink_factor_decreases(delta, eps):
    nd = next_delta(delta, eps)
    assert 0.0 <= nd < delta


def test_meb_symmetric_pair(core):
    net, _ = build([[-1.0, 0.0], [1.0, 0.0]], core)
    sol = meb(net, 0.3)
    assert sol.covered and sol.radius <= 1.3 * (1 + 1e-9)
    assert sol.stats.loop_count == 20


def test_meb_square(core):
    net, _ = build([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], core)
    sol = meb(net, 0.2)
    assert sol.covered and sol.radius <= 1.2 * math.sqrt(2) / 2 * (1 + 1e-9)


def test_meb_disk(core):
    rng = np.random.default_rng(32)
    a = rng.random(200) * 2 * np.pi
    rad = np.sqrt(rng.random(200))
    X = np.c_[rad * np.cos(a), rad * np.sin(a)]
    net, _ = build(X, core)
    sol = meb(net, 0.1)
    assert sol.stats.loop_count == 60 and sol.stats.afn_calls == 60
    assert sol.covered
    assert sol.radius <= 1.1 * meb_exact(X).value * (1 + 1e-9)


def test_meb_trace(core):
    rng = np.random.default_rng(33)
    net, _ = build(rng.normal(size=(50, 3)), core)
    steps = []
    sol = meb(net, 0.25, trace=steps)
    assert len(steps) == 24
    assert steps[0].m == net.location(0) and steps[0].delta == 1.0
    deltas = [s.delta for s in steps]
    assert all(b < a or a == 0.0 for a, b in zip(deltas, deltas[1:]))
    assert steps[-1].best == (sol.centers[0], sol.radius)
    assert min(s.radius for s in steps) == sol.radius


def test_meb_errors(core):
    net, _ = build([[0.0], [1.0]], core)
    with pytest.raises(ValueError):
        meb(net, 0.0)
    with pytest.raises(ValueError):
        meb(net, 6.5)
    mnet = NavigatingNet.build([MetricPoint(0, 0)], MatrixBackend([[0.0]]), core=core)
    with pytest.raises(ValueError):
        meb(mnet, 0.5)


# -- guessing solver ------------------------------------------------------------

def test_guess_family_sizes():
    assert list(enumerate_guesses(1, 0.5)) == [(0,) * 12]
    assert guess_count(2, 3.0) == 16
    fam = list(enumerate_guesses(2, 3.0))
    assert len(fam) == 16 == len(set(fam))
    fam = list(enumerate_guesses(3, 6.0))
    assert len(fam) == 27 == len(set(fam))
    assert all(len(f) == 3 and set(f) <= {0, 1, 2} for f in fam)
    assert fam[:4] == [(0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 1, 0)]


def test_guess_budget():
    assert guess_count(2, 1.0) == 4096
    with pytest.raises(BudgetExceeded):
        enumerate_guesses(2, 1.0, budget=4095)
    with pytest.raises(BudgetExceeded):
        enumerate_guesses(3, 0.1)
    with pytest.raises(ValueError):
        enumerate_guesses(0, 1.0)


def test_kcenter_k1_matches_ball_guarantee(core):
    rng = np.random.default_rng(34)
    X = rng.random((40, 2))
    net, _ = build(X, core)
    sol = euclidean_kcenter(net, 1, 0.5)
    assert sol.stats.functions == 1 and sol.covered
    assert sol.radius <= 1.5 * meb_exact(X).value * (1 + 1e-9)


def test_kcenter_single_point(core):
    net, _ = build([[4.0, 4.0]], core)
    sol = euclidean_kcenter(net, 2, 1.0)
    assert sol.radius == 0.0 and sol.covered


def test_kcenter_two_clusters(core):
    rng = np.random.default_rng(35)
    a = rng.normal(size=(5, 2)) * 0.05
    b = rng.normal(size=(5, 2)) * 0.05 + [100.0, 0.0]
    X = np.r_[a, b]
    net, _ = build(X, core)
    sol = euclidean_kcenter(net, 2, 1.0)
    assert sol.stats.functions == 4096 and sol.stats.loop_count == 12
    assert sol.covered and len(sol.centers) <= 2
    assert sol.radius <= 2 * kcenter_exact_euclidean(X, 2).value * (1 + 1e-9)


def test_pinned_seed_strands_a_slot(core):
    rng = np.random.default_rng(35)
    X = np.r_[rng.normal(size=(5, 2)) * 0.05, rng.normal(size=(5, 2)) * 0.05 + [100.0, 0.0]]
    net, _ = build(X, core)
    opt = kcenter_exact_euclidean(X, 2).value
    pinned = euclidean_kcenter(net, 2, 1.0, pin_seed=True)
    assert pinned.covered
    assert pinned.radius > 2 * opt
    assert euclidean_kcenter(net, 2, 1.0).radius <= 2 * opt * (1 + 1e-9)


def test_prefix_sharing_changes_nothing(core):
    rng = np.random.default_rng(36)
    for trial in range(3):
        X = rng.random((12, 2))
        net, _ = build(X, core)
        for pin in (False, True):
            a = euclidean_kcenter(net, 2, 2.0, pin_seed=pin)
            b = euclidean_kcenter(net, 2, 2.0, shared_prefix=False, pin_seed=pin)
            assert (a.radius, a.centers) == (b.radius, b.centers)
            assert a.stats.functions == b.stats.functions == 64
            assert a.stats.afn_calls < b.stats.afn_calls


def test_kcenter_errors(core):
    net, _ = build([[0.0], [1.0]], core)
    with pytest.raises(BudgetExceeded):
        euclidean_kcenter(net, 3, 0.5)
    with pytest.raises(ValueError):
        euclidean_kcenter(net, 0, 1.0)


def test_solution_json(core):
    net, _ = build([[0.0, 0.0], [1.0, 0.0]], core)
    sol = meb(net, 1.0)
    out = json.loads(dumps(sol.to_json()))
    assert set(out) == {"centers", "radius", "stats"}
    assert out["centers"] == [list(sol.centers[0])] and out["radius"] == sol.radius


def test_coverage_scan(core):
    net, _ = build([[0.0], [3.0], [10.0]], core)
    assert coverage(net, [(0.0,), (10.0,)]) == 3.0
    assert coverage(net, []) == math.inf
