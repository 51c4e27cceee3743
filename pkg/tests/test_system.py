import json
import math

import numpy as np
import pytest

from iel.errors import DomainError, NonFinite, StateEscaped
from iel.families import BUNDLES, bundle_doc, bundled, load_system, system_from_dict
from iel.system import (
    ControlRange,
    ControlSignal,
    flow_batch,
    flow_letters,
    integrate,
    signal_concat,
    signal_repeat,
    signal_shift,
    variational_flow,
)

from oracles import diag_fundamental, scalar_flow


def test_scalar_closed_form():
    s = bundled("scalar_linear")
    for a, x0, c in [(1.0, 1.0, 0.0), (1.0, 0.3, -1.0), (0.5, -0.7, 1.0)]:
        sa = s.with_params([a])
        tr = integrate(sa, [x0], ControlSignal.constant([c], 1.0), 1.0, 0.01)
        assert tr.final[0] == pytest.approx(scalar_flow(a, x0, c, 1.0), abs=1e-9)


def test_rk4_fourth_order():
    s = bundled("scalar_linear")
    u = ControlSignal.constant([0.0], 1.0)
    errs = [abs(integrate(s, [1.0], u, 1.0, h).final[0] - math.e) for h in (0.1, 0.05)]
    assert 14 < errs[0] / errs[1] < 18


def test_breakpoints_are_respected():
    s = bundled("scalar_linear")
    u = ControlSignal(np.array([0.0, 0.33, 1.0]), np.array([[1.0], [-1.0]]))
    x1 = scalar_flow(1.0, 0.2, 1.0, 0.33)
    x2 = scalar_flow(1.0, x1, -1.0, 0.67)
    # a misplaced switch would cost O(h); RK4 alone is far below 1e-5
    assert integrate(s, [0.2], u, 1.0, 0.1).final[0] == pytest.approx(x2, abs=1e-5)


def test_variational_flow_diag():
    s = bundled("diag_linear_2d")
    D = variational_flow(s, [0.1, -0.2], ControlSignal.constant([0.3, 0.0], 2.0), 1.5)
    assert np.allclose(D, diag_fundamental(1.0, -1.0, 1.5), rtol=1e-8)


def test_signal_algebra():
    u = ControlSignal.from_letters([[1.0], [0.0], [-1.0]], 0.5)
    v = ControlSignal.constant([0.5], 1.0, periodic=False)
    w = signal_concat(u, v)
    assert w.duration == 2.5
    assert w.value_at(1.7)[0] == 0.5
    sh = signal_shift(w, 0.75)
    assert sh.value_at(0.0)[0] == 0.0 and sh.value_at(0.3)[0] == -1.0
    r = signal_repeat(u, 3)
    assert r.duration == pytest.approx(4.5) and r.value_at(3.7)[0] == 0.0
    p = ControlSignal.from_letters([[1.0], [-1.0]], 1.0, periodic=True)
    assert p.value_at(5.5)[0] == -1.0
    assert signal_shift(p, 3.0).value_at(0.2)[0] == -1.0
    with pytest.raises(DomainError):
        u.value_at(2.0)
    with pytest.raises(ValueError):
        ControlSignal(np.array([0.0, 1.0, 1.0]), np.zeros((2, 1)))


def test_restricted_signal_matches_pieces():
    u = ControlSignal.from_letters([[1.0], [0.0], [-1.0]], 0.5)
    r = u.restricted(0.8)
    assert r.duration == pytest.approx(0.8)
    assert [tuple(p[:2]) for p in r.pieces(0.8)] == [tuple(p[:2]) for p in u.pieces(0.8)]


def test_escape_and_nonfinite():
    s = bundled("scalar_linear")
    with pytest.raises(StateEscaped):
        integrate(s, [1.9], ControlSignal.constant([1.0], 5.0), 5.0)
    s2 = bundled("bistable_1d")
    s2 = s2.with_params([1.0])
    with pytest.raises((NonFinite, StateEscaped, FloatingPointError)):
        with np.errstate(over="ignore", invalid="ignore"):
            integrate(s2, [-50.0], ControlSignal.constant([0.0], 1.0), 1.0, 0.5, check_box=False)


def test_flow_letters_marks_escapes():
    s = bundled("scalar_linear")
    X, _, esc = flow_letters(s, np.array([[0.0], [2.9]]), np.array([[0.0], [1.0]]), 1.0, 0.01)
    assert not esc[0] and esc[1] and np.isnan(X[1, 0])


def test_flow_batch_matches_single_rows():
    s = bundled("bilinear_2d")
    rng = np.random.default_rng(3)
    X0 = rng.uniform(-0.5, 0.5, (4, 2))
    sig = [ControlSignal.from_letters(s.control_range.letters[rng.integers(0, 3, 4)], 0.3)
           for _ in range(4)]
    T = [0.4, 0.9, 1.2, 0.05]
    Xb, _ = flow_batch(s, X0, sig, T)
    for i in range(4):
        assert np.allclose(Xb[i], integrate(s, X0[i], sig[i], T[i]).final, atol=1e-12)


@pytest.mark.parametrize("name", BUNDLES)
def test_bundles_load_and_jacobians_match_differences(name):
    s = bundled(name)
    rng = np.random.default_rng(0)
    X = s.box_lo + rng.random((5, s.state_dim)) * (s.box_hi - s.box_lo)
    U = s.control_range.letters[rng.integers(0, len(s.control_range.letters), 5)]
    f, J = s.rhs_jac(X, U)
    eps = 1e-6
    for j in range(s.state_dim):
        dx = np.zeros(s.state_dim)
        dx[j] = eps
        fd = (s.rhs(X + dx, U) - s.rhs(X - dx, U)) / (2 * eps)
        assert np.allclose(J[:, :, j], fd, atol=1e-6)
    assert "recommended_grid" in bundle_doc(name)


def test_loader_sources(tmp_path):
    doc = bundle_doc("bistable_1d")
    p = tmp_path / "sys.json"
    p.write_text(json.dumps(doc))
    for src in (doc, str(p), "bistable_1d"):
        assert load_system(src).state_dim == 1
    with pytest.raises(ValueError):
        system_from_dict(dict(doc, fields="no_such_family"))


def test_control_range_validation():
    cr = ControlRange.box([-1.0], [1.0])
    assert cr.contains(np.array([[0.5]]))
    with pytest.raises(ValueError):
        ControlRange.box([1.0], [-1.0])
