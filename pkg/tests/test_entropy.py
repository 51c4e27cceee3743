import itertools
import math

import numpy as np
import pytest

from iel.entropy import (
    EntropyEstimate,
    SpanningSet,
    build_spanning_set,
    entropy_from_counts,
    minimum_set_cover,
    reconcile,
    reduced_cover_matrix,
    subadditivity_violations,
)
from iel.errors import InsufficientData, Uncoverable
from iel.families import bundled
from iel.sets import CellSet, GridPartition, dilate
from iel.system import ControlSignal, integrate


def brute_min_cover(A):
    n_cols = A.shape[1]
    for size in range(1, n_cols + 1):
        for cols in itertools.combinations(range(n_cols), size):
            if A[:, list(cols)].any(axis=1).all():
                return size
    return None


def test_milp_cover_is_minimum():
    rng = np.random.default_rng(4)
    for _ in range(40):
        A = rng.random((7, 9)) < 0.3
        A[:, 0] |= ~A.any(axis=1)  # make it coverable
        pick = minimum_set_cover(A)
        assert A[:, pick].any(axis=1).all()
        assert len(pick) == brute_min_cover(A)


def test_reduction_drops_duplicates_and_dominated():
    cells = np.array([10, 11, 12])
    cov = [np.array([10]), np.array([10, 11]), np.array([10, 11]), np.array([], dtype=int),
           np.array([12])]
    A, keep = reduced_cover_matrix(cells, cov)
    assert keep.tolist() == [1, 4]
    assert A.tolist() == [[True, False], [True, False], [False, True]]


@pytest.fixture(scope="module")
def coarse():
    s = bundled("scalar_linear")
    g = GridPartition([-2.0], [2.0], (40,))
    K = CellSet.from_box(g, [-0.5], [0.5], "K")
    Q = CellSet.from_box(g, [-1.0], [1.0], "Q")
    return s, g, K, Q


def _independent_check(s, g, sp):
    """Re-simulate every sample point of every covered cell one by one."""
    q_fat = dilate(sp.Q, g, 1).mask(g)
    for w, cov in zip(sp.words, sp.coverage):
        u = ControlSignal.from_letters(sp.letters[list(w)], sp.dwell)
        for c in cov:
            for x in g.sample_points([c], sp.samples_per_cell)[0]:
                tr = integrate(s, x, u, sp.tau, sp.step, check_box=False)
                cells = g.cell_of(tr.states)
                assert np.all(cells >= 0) and np.all(q_fat[cells])
                assert cells[-1] in sp.K


def test_exact_covers_are_verified_and_subadditive(coarse):
    s, g, K, Q = coarse
    assert len(K) <= 20
    counts = {}
    for tau in (0.25, 0.5, 0.75, 1.0):
        sp = build_spanning_set(s, g, K, Q, tau, 0.25, exact=True)
        assert sp.method == "exact" and sp.complete
        assert np.all(sp.first_cover() >= 0)
        _independent_check(s, g, sp)
        counts[tau] = len(sp)
    assert subadditivity_violations(counts) == []
    # greedy never beats the optimum and stays inside the logarithmic bound
    for tau in (0.5, 1.0):
        gr = build_spanning_set(s, g, K, Q, tau, 0.25)
        assert counts[tau] <= len(gr) <= counts[tau] * (1 + math.log(len(K)))


def test_greedy_lookahead_path(coarse):
    s, g, K, Q = coarse
    # 3^8 words: too many for exhaustive greedy, so the steering search runs
    sp = build_spanning_set(s, g, K, Q, 2.0, 0.25)
    assert sp.complete and len(sp) >= 2
    _independent_check(s, g, sp)
    back = SpanningSet.from_dict(sp.to_dict())
    assert back.words == sp.words and len(back.prefix(1)) == 1
    assert not sp.prefix(1).complete


def test_open_flavor_needs_no_return(coarse):
    s, g, K, Q = coarse
    closed = build_spanning_set(s, g, K, Q, 1.0, 0.25, exact=True)
    open_ = build_spanning_set(s, g, K, Q, 1.0, 0.25, flavor="tau_K_Q", exact=True)
    assert len(open_) <= len(closed)


def test_uncoverable():
    s = bundled("scalar_linear", state_box={"lo": [-3.0], "hi": [3.0]})
    g = GridPartition([-3.0], [3.0], (30,))
    K = CellSet.from_box(g, [1.6], [1.8])
    with pytest.raises(Uncoverable) as info:
        build_spanning_set(s, g, K, K, 1.0, 0.25)
    assert set(info.value.cells) <= set(K.cells.tolist())
    with pytest.raises(ValueError):
        build_spanning_set(s, g, K, CellSet([0]), 1.0, 0.25)
    with pytest.raises(ValueError):
        build_spanning_set(s, g, K, K, 1.1, 0.25)


def test_entropy_from_counts():
    counts = {1.0: 3, 2.0: 8, 3.0: 21, 4.0: 55}
    est = entropy_from_counts(counts, "exact")
    assert est.fekete == pytest.approx(min(math.log(r) / t for t, r in counts.items()))
    slope = np.polyfit(list(counts), np.log(list(counts.values())), 1)[0]
    assert est.h == pytest.approx(slope)
    assert not est.upper_estimate
    assert est.to_csv().splitlines()[0] == "tau,r,log_r_over_tau"
    with pytest.raises(InsufficientData):
        entropy_from_counts({1.0: 2, 2.0: 4})


def test_subadditivity_and_reconcile():
    assert subadditivity_violations({1.0: 3, 2.0: 10}) == [(1.0, 1.0)]
    assert subadditivity_violations({1.0: 3, 2.0: 9}) == []
    est = EntropyEstimate(np.array([1.0, 2.0, 3.0]), np.array([3, 8, 21]), 0.97, 1.015)
    assert reconcile(est, 1.0).status == "PASS"
    assert reconcile(est, 1.2).status == "FAIL"
