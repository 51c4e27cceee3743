import itertools

import numpy as np
import pytest

from iel.cocycles import (
    CompoundAccumulator,
    compound,
    compound_batch,
    kappa_from_cumsums,
    log_singular_cumsums,
)
from iel.errors import InvalidDim
from iel.families import bundled
from iel.spectra import cocycle_batch, cocycle_log_norms, gamma_cocycle, kappa_cocycle
from iel.system import ControlSignal, signal_shift

from oracles import log_singular_products


def test_log_singular_cumsums_against_svd():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(6, 3, 3))
    got = log_singular_cumsums(A)
    for i in range(6):
        assert np.allclose(got[i], log_singular_products(A[i]))
    assert np.allclose(kappa_from_cumsums(got), np.maximum(0, got.max(axis=1)))


def test_compound_is_multiplicative_and_norms_match():
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=(2, 4, 4))
    for k in range(5):
        assert np.allclose(compound(A @ B, k), compound(A, k) @ compound(B, k))
    s = np.linalg.svd(A, compute_uv=False)
    for k in range(1, 5):
        assert np.log(np.linalg.norm(compound(A, k), 2)) == pytest.approx(np.log(s[:k]).sum())
    assert compound(A, 4)[0, 0] == pytest.approx(np.linalg.det(A))
    stack = rng.normal(size=(3, 3, 3))
    for k in range(4):
        assert np.allclose(compound_batch(stack, k), [compound(M, k) for M in stack])


def test_accumulator_survives_long_products():
    # a product whose entries overflow a double
    D = np.diag([np.exp(50.0), np.exp(-50.0), 1.0])
    acc = CompoundAccumulator(3)
    for _ in range(40):
        acc.push(D)
    assert np.allclose(acc.log_norms(), [0.0, 2000.0, 2000.0, 0.0], atol=1e-8)


def test_gamma_diag_closed_form():
    s = bundled("diag_linear_2d")
    u = ControlSignal.constant([0.0, 0.0], 2.0)
    assert gamma_cocycle(s, [0.0, 0.0], u, 2.0, 1) == pytest.approx(2.0, abs=1e-8)
    assert gamma_cocycle(s, [0.0, 0.0], u, 2.0, 2) == pytest.approx(0.0, abs=1e-8)
    assert kappa_cocycle(s, [0.0, 0.0], u, 2.0) == pytest.approx(2.0, abs=1e-8)
    with pytest.raises(InvalidDim):
        gamma_cocycle(s, [0.0, 0.0], u, 1.0, 3)


def test_scalar_gamma_is_a_t_everywhere():
    for a in (0.5, 1.0, 2.0):
        s = bundled("scalar_linear", params=[a])
        u = ControlSignal.from_letters([[1.0], [-1.0], [0.0]], 0.2)
        assert gamma_cocycle(s, [0.1], u, 0.6, 1) == pytest.approx(0.6 * a, abs=1e-8)


def _random_signal(rng, s, T):
    bp = [0.0]
    while bp[-1] < T:
        bp.append(bp[-1] + rng.uniform(0.05, 0.6))
    lo, hi = s.control_range.lo, s.control_range.hi
    return ControlSignal(np.array(bp), lo + rng.random((len(bp) - 1, lo.size)) * (hi - lo))


@pytest.mark.parametrize("name", ["bilinear_2d", "duffing_controlled"])
def test_single_row_cocycle_properties(name):
    s = bundled(name)
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = (s.box_lo + s.box_hi) / 2 + (rng.random(2) - 0.5) * (s.box_hi - s.box_lo) / 2
        u = _random_signal(rng, s, 2.0)
        t, r = rng.uniform(0.1, 1.0, 2)
        V = rng.normal(size=(2, 1))
        g1, V1 = gamma_cocycle(s, x, u, t, 1, frame=V, return_frame=True, check_box=False)
        from iel.system import integrate

        xt = integrate(s, x, u, t, check_box=False).final
        g2 = gamma_cocycle(s, xt, signal_shift(u, t), r, 1, frame=V1, check_box=False)
        g12 = gamma_cocycle(s, x, u, t + r, 1, frame=V, check_box=False)
        assert abs(g12 - g1 - g2) < 1e-6
        k1 = kappa_cocycle(s, x, u, t, check_box=False)
        k2 = kappa_cocycle(s, xt, signal_shift(u, t), r, check_box=False)
        assert kappa_cocycle(s, x, u, t + r, check_box=False) <= k1 + k2 + 1e-8


def test_batch_matches_single_rows():
    s = bundled("bilinear_2d")
    rng = np.random.default_rng(2)
    X = rng.uniform(-0.5, 0.5, (5, 2))
    U = [_random_signal(rng, s, 2.0) for _ in range(5)]
    T = rng.uniform(0.0, 2.0, 5)
    F = rng.normal(size=(5, 2, 1))
    _, ln, g, _ = cocycle_batch(s, X, U, T, 1e-2, F)
    for i in range(5):
        assert np.allclose(ln[i], cocycle_log_norms(s, X[i], U[i], T[i], check_box=False),
                           atol=1e-10)
        assert g[i] == pytest.approx(gamma_cocycle(s, X[i], U[i], T[i], 1, frame=F[i],
                                                   check_box=False), abs=1e-10)
