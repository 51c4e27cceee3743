"""Cocycles over the control flow and their spectra.

gamma_t(u, x)  log of the unstable determinant of d phi_{t,u}(x)
kappa_t(u, x)  log+ of the norm of d phi_{t,u}(x) on the full exterior algebra

Long-horizon products are accumulated segment by segment (a new segment is
started every 0.5 time units or once the running factor exceeds 1e6) so
that neither overflow nor loss of the small singular values occurs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .cocycles import CompoundAccumulator, compound_batch, log_singular_cumsums
from .cycle_ratio import cycle_ratio
from .errors import InvalidDim, NonFinite, NonHyperbolic, OrbitNotClosed
from .sets import CellSet, GridPartition, TransitionGraph, edge_weights
from .system import ControlSignal, ControlSystem, _check, rk4_step, step_schedule, variational_flow

log = logging.getLogger(__name__)

REORTHO_TIME = 0.5
REORTHO_GROWTH = 1e6


def _segments(system, x, u, t, step, check_box):
    """Yield (D_segment, state, end_time) for consecutive segments of [0, t]."""
    times, hs, vals = step_schedule(u, t, step)
    X = np.asarray(x, dtype=float).reshape(1, -1)
    D = np.eye(system.state_dim)[None]
    seg_t = 0.0
    for t_end, h, v in zip(times[1:], hs, vals):
        X, D = rk4_step(system, X, v[None], h, D)
        _check(system, X, check_box)
        seg_t += h
        if seg_t >= REORTHO_TIME or np.abs(D).max() > REORTHO_GROWTH:
            yield D[0], X[0], float(t_end)
            D = np.eye(system.state_dim)[None]
            seg_t = 0.0
    if seg_t > 0:
        yield D[0], X[0], float(times[-1])


def cocycle_log_norms(system: ControlSystem, x, u: ControlSignal, t: float, step: float = 1e-2,
                      check_box: bool = True) -> np.ndarray:
    """log(s_1 ... s_k) of d phi_{t,u}(x) for k = 0..d."""
    acc = CompoundAccumulator(system.state_dim)
    if t > 0:
        for D, _, _ in _segments(system, x, u, t, step, check_box):
            acc.push(D)
    return acc.log_norms()


def gamma_cocycle(system: ControlSystem, x, u: ControlSignal, t: float, k: int,
                  step: float = 1e-2, frame: Optional[np.ndarray] = None,
                  return_frame: bool = False, check_box: bool = True):
    """Unstable-determinant cocycle.

    Without ``frame`` this is log of the product of the top-k singular values
    of d phi_{t,u}(x). With ``frame`` (d x k, orthonormal columns spanning an
    estimate of E+ at x) it is the log volume growth of that subspace, which
    is exactly additive along the flow when the frame is transported:
    gamma_{t+s}(x, V) = gamma_t(x, V) + gamma_s(phi_t x, D_t V).
    With ``return_frame`` the transported orthonormal frame is returned too.
    """
    d = system.state_dim
    if not 0 <= k <= d:
        raise InvalidDim(f"unstable dimension {k} outside 0..{d}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if frame is None:
        if return_frame:
            raise ValueError("return_frame needs an initial frame")
        return float(cocycle_log_norms(system, x, u, t, step, check_box)[k])
    V = np.asarray(frame, dtype=float).reshape(d, k)
    Q, R = np.linalg.qr(V)
    total = -float(np.sum(np.log(np.abs(np.diag(R))))) if k else 0.0
    V = Q
    if t > 0 and k > 0:
        for D, _, _ in _segments(system, x, u, t, step, check_box):
            Q, R = np.linalg.qr(D @ V)
            total += float(np.sum(np.log(np.abs(np.diag(R)))))
            V = Q
    return (total, V) if return_frame else total


def kappa_cocycle(system: ControlSystem, x, u: ControlSignal, t: float, step: float = 1e-2,
                  check_box: bool = True) -> float:
    """log+ of the operator norm of d phi_{t,u}(x) on the exterior algebra.

    Only u on [0, t] enters the computation.
    """
    return float(max(0.0, cocycle_log_norms(system, x, u, t, step, check_box).max()))


def cocycle_batch(system: ControlSystem, X0, signals, horizons, step: float = 1e-2,
                  frames: Optional[np.ndarray] = None):
    """Both cocycles for many (x, u, t) triples in one vectorised pass.

    Rows follow exactly the step schedule of the single-row integrator
    (shorter schedules are padded with zero-length steps), and fundamental
    matrices are renormalised every REORTHO_TIME / step substeps. Returns
    ``(X_end, log_norms, gamma, frames_end)`` where ``log_norms`` is
    (n, d+1) with log(s_1 ... s_k); ``gamma`` and ``frames_end`` are None
    unless ``frames`` (n, d, k) is given, in which case gamma is the frame
    transport form. No box check.
    """
    d = system.state_dim
    X = np.array(X0, dtype=float).reshape(-1, d)
    n = X.shape[0]
    scheds = [step_schedule(u, T, step)[1:] if T > 0 else (np.zeros(0), np.zeros((0, 1)))
              for u, T in zip(signals, horizons)]
    N = max((len(h) for h, _ in scheds), default=0)
    H = np.zeros((N, n))
    V = np.zeros((N, n, system.input_dim))
    for i, (h, v) in enumerate(scheds):
        H[: len(h), i] = h
        V[: len(h), i] = v
    mats = [np.repeat(np.eye(math.comb(d, k))[None], n, axis=0) for k in range(d + 1)]
    logscale = np.zeros((n, d + 1))
    gamma = frame = None
    if frames is not None:
        frame, R = np.linalg.qr(np.asarray(frames, dtype=float).reshape(n, d, -1))
        gamma = -np.log(np.abs(np.diagonal(R, axis1=1, axis2=2))).sum(axis=1)
    seg = max(1, int(round(REORTHO_TIME / step)))
    D = np.repeat(np.eye(d)[None], n, axis=0)

    def flush(D):
        nonlocal frame, gamma
        for k in range(1, d + 1):
            M = compound_batch(D, k) @ mats[k]
            nrm = np.linalg.norm(M, 2, axis=(1, 2))
            mats[k] = M / nrm[:, None, None]
            logscale[:, k] += np.log(nrm)
        if frame is not None and frame.shape[2] > 0:
            frame, R = np.linalg.qr(D @ frame)
            gamma = gamma + np.log(np.abs(np.diagonal(R, axis1=1, axis2=2))).sum(axis=1)

    for j in range(N):
        X, D = rk4_step(system, X, V[j], H[j], D)
        if (j + 1) % seg == 0 or j == N - 1:
            flush(D)
            D = np.repeat(np.eye(d)[None], n, axis=0)
    if not np.all(np.isfinite(X)):
        raise NonFinite("state overflow or NaN during batch integration")
    out = np.zeros((n, d + 1))
    for k in range(1, d + 1):
        out[:, k] = logscale[:, k] + np.log(np.linalg.norm(mats[k], 2, axis=(1, 2)))
    return X, out, gamma, frame


@dataclass
class HyperbolicSplittingEstimate:
    unstable_dim: int
    exponents: np.ndarray
    times: np.ndarray
    unstable_bases: list
    stable_bases: list
    c: float
    lam: float
    gap: float
    hyperbolic: bool = True
    alignment_error: float = 0.0

    def to_dict(self) -> dict:
        return {
            "unstable_dim": self.unstable_dim,
            "exponents": self.exponents.tolist(),
            "c": self.c,
            "lambda": self.lam,
            "gap": self.gap,
            "hyperbolic": self.hyperbolic,
            "alignment_error": self.alignment_error,
        }


def estimate_splitting(system: ControlSystem, x, u: ControlSignal, horizon: float = 20.0,
                       gap: float = 0.05, step: float = 1e-2, n_samples: int = 9,
                       check_box: bool = True) -> HyperbolicSplittingEstimate:
    """QR (Benettin) estimate of the hyperbolic splitting along one trajectory.

    Raises NonHyperbolic, carrying the estimate, if a finite-time exponent is
    within ``gap`` of zero.
    """
    d = system.state_dim
    segs = list(_segments(system, x, u, horizon, step, check_box))
    ends = np.array([s[2] for s in segs])
    Q = np.eye(d)
    logs = np.zeros(d)
    frames = [Q]
    for D, _, _ in segs:
        Q, R = np.linalg.qr(D @ Q)
        s = np.sign(np.diag(R))
        s[s == 0] = 1
        Q = Q * s
        logs += np.log(np.abs(np.diag(R)))
        frames.append(Q)
    exps = np.sort(logs / horizon)[::-1]
    k = int(np.sum(exps > 0))
    hyperbolic = bool(np.all(np.abs(exps) >= gap))
    lam = float(np.min(np.abs(exps))) if d else 0.0
    seg_times = np.concatenate([[0.0], ends])
    picks = np.unique(np.linspace(0, len(segs), min(n_samples, len(segs) + 1)).round().astype(int))
    # propagators between picked sample times
    unstable, stable = [], []
    for a in picks:
        unstable.append(frames[a][:, :k].copy())
        P = np.eye(d)
        for D, _, _ in segs[a:]:
            P = D @ P
        _, _, Vt = np.linalg.svd(P)
        stable.append(Vt[k:].T.copy())
    c = 1.0
    if hyperbolic:
        for ia, a in enumerate(picks):
            P = np.eye(d)
            j = a
            for b in picks[ia + 1:]:
                while j < b:
                    P = segs[j][0] @ P
                    j += 1
                dt = seg_times[b] - seg_times[a]
                if k:
                    smin = np.linalg.svd(P @ unstable[ia], compute_uv=False).min()
                    c = min(c, smin / math.exp(lam * dt))
                if k < d:
                    smax = np.linalg.svd(P @ stable[ia], compute_uv=False).max()
                    c = min(c, math.exp(-lam * dt) / smax)
    c = float(max(min(c, 1.0), 1e-300))
    align = 0.0
    if 0 < k < d:
        P = np.eye(d)
        for D, _, _ in segs:
            P = D @ P
        Ul, _, _ = np.linalg.svd(P)
        align = float(np.linalg.norm(Ul[:, k:].T @ frames[-1][:, :k], 2))
    est = HyperbolicSplittingEstimate(k, exps, seg_times[picks], unstable, stable, c, lam, gap,
                                      hyperbolic, align)
    if not hyperbolic:
        err = NonHyperbolic(f"finite-time exponents {np.round(exps, 4).tolist()} within "
                            f"{gap} of zero")
        err.estimate = est
        raise err
    return est



@dataclass
class PeriodicOrbit:
    x: np.ndarray
    u: ControlSignal
    defect: float
    tolerance: float

    @property
    def period(self) -> float:
        return self.u.duration


def _closure(system, x, u, step):
    from .system import integrate
    tr = integrate(system, x, u, u.duration, step, with_matrices=True, check_box=False)
    return tr.final - x, tr.matrices[-1]


def equilibrium_orbit(system: ControlSystem, letter, seed, period: float = 1.0,
                      tol: Optional[float] = None, max_iter: int = 50) -> PeriodicOrbit:
    """Damped Newton on f(x, letter) = 0, packaged as a periodic orbit."""
    letter = np.atleast_1d(np.asarray(letter, dtype=float))
    x = np.asarray(seed, dtype=float).copy()
    U = letter[None]
    for _ in range(max_iter):
        f, A = system.rhs_jac(x[None], U)
        f, A = f[0], A[0]
        if np.linalg.norm(f) < 1e-13:
            break
        try:
            dx = np.linalg.solve(A, -f)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        r0 = np.linalg.norm(f)
        while lam > 1e-4:
            xn = x + lam * dx
            if np.linalg.norm(system.rhs(xn[None], U)[0]) < r0:
                break
            lam *= 0.5
        x = xn
    u = ControlSignal.constant(letter, period)
    tol = tol if tol is not None else 1e-6 * system.diameter
    defect = float(np.linalg.norm(_closure(system, x, u, min(period, 1e-2))[0]))
    if defect > tol:
        raise OrbitNotClosed(f"equilibrium search did not converge (defect {defect:.3g})")
    return PeriodicOrbit(x, u, defect, tol)


def shoot_periodic_orbit(system: ControlSystem, u: ControlSignal, seed, step: float = 1e-2,
                         tol: Optional[float] = None, max_iter: int = 50) -> PeriodicOrbit:
    """Single shooting: Newton on phi(tau, x, u) - x for a periodic signal u."""
    if not u.periodic:
        u = ControlSignal(u.breakpoints, u.values, periodic=True)
    tol = tol if tol is not None else 1e-6 * system.diameter
    x = np.asarray(seed, dtype=float).copy()
    F, M = _closure(system, x, u, step)
    for _ in range(max_iter):
        r = np.linalg.norm(F)
        if r < 1e-12:
            break
        try:
            dx = np.linalg.solve(M - np.eye(x.size), -F)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-4:
            xn = x + lam * dx
            Fn, Mn = _closure(system, xn, u, step)
            if np.linalg.norm(Fn) < r:
                break
            lam *= 0.5
        x, F, M = xn, Fn, Mn
    defect = float(np.linalg.norm(F))
    if defect > tol:
        raise OrbitNotClosed(f"shooting did not close the orbit (defect {defect:.3g})")
    return PeriodicOrbit(x, u, defect, tol)


def _check_orbit(system, orbit, step):
    defect = float(np.linalg.norm(_closure(system, orbit.x, orbit.u, step)[0]))
    if defect > orbit.tolerance:
        raise OrbitNotClosed(f"closure defect {defect:.3g} exceeds {orbit.tolerance:.3g}")
    return defect


def monodromy(system: ControlSystem, orbit: PeriodicOrbit, step: float = 1e-2) -> np.ndarray:
    return variational_flow(system, orbit.x, orbit.u, orbit.period, step, check_box=False)


def unstable_invariant_frame(M: np.ndarray):
    """Orthonormal basis of the invariant subspace for |eigenvalue| > 1."""
    T, Z, sdim = sla.schur(M, output="real", sort="ouc")
    return Z[:, :sdim], sdim


def floquet_exponent(system: ControlSystem, orbit: PeriodicOrbit, which: str = "gamma",
                     k: Optional[int] = None, step: float = 1e-2) -> float:
    """Exponent of the gamma or kappa cocycle on a controlled periodic orbit.

    gamma: (1/tau) gamma_tau evaluated on the unstable invariant subspace of
    the monodromy (the exact E+ at a periodic point).
    kappa: lim (1/t) kappa_t, computed as log+ of the spectral radius of the
    exterior powers of the monodromy; see :func:`kappa_fekete_sequence`.
    """
    _check_orbit(system, orbit, step)
    tau = orbit.period
    M = monodromy(system, orbit, step)
    if which == "gamma":
        V, sdim = unstable_invariant_frame(M)
        if k is not None and k != sdim:
            if not 0 <= k <= system.state_dim:
                raise InvalidDim(f"unstable dimension {k} outside 0..{system.state_dim}")
            V = _dominant_frame(M, k)
        else:
            k = sdim
        return gamma_cocycle(system, orbit.x, orbit.u, tau, k, step, frame=V,
                             check_box=False) / tau
    if which == "kappa":
        mu = np.sort(np.abs(np.linalg.eigvals(M)))[::-1]
        with np.errstate(divide="ignore"):
            partial = np.cumsum(np.log(mu))
        return float(max(0.0, partial.max())) / tau
    raise ValueError("which must be 'gamma' or 'kappa'")


def _dominant_frame(M, k):
    if k == 0:
        return np.zeros((M.shape[0], 0))
    r = np.sort(np.abs(np.linalg.eigvals(M)))[::-1]
    # threshold between the k-th and (k+1)-th modulus
    thr = 0.5 * r[k - 1] if k == len(r) else 0.5 * (r[k - 1] + r[k])
    T, Z, sdim = sla.schur(M / thr, output="real", sort="ouc")
    return Z[:, :k]


def kappa_fekete_sequence(system: ControlSystem, orbit: PeriodicOrbit, n_max: int = 16,
                          step: float = 1e-2) -> np.ndarray:
    """(1/(n tau)) kappa_{n tau} for n = 1..n_max along a periodic orbit.

    By subadditivity the infimum of this sequence bounds the limit from above.
    """
    M = monodromy(system, orbit, step)
    acc = CompoundAccumulator(system.state_dim)
    out = []
    for n in range(1, n_max + 1):
        acc.push(M)
        out.append(max(0.0, acc.log_norms().max()) / (n * orbit.period))
    return np.array(out)


@dataclass
class SpectrumEstimate:
    lo: float
    hi: float
    method: str
    weight: str
    unstable_dim: Optional[int]
    params: dict
    witnesses: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "method": self.method,
            "weight": self.weight,
            "unstable_dim": self.unstable_dim,
            "params": self.params,
            "witnesses": self.witnesses,
        }

    @classmethod
    def from_dict(cls, doc) -> "SpectrumEstimate":
        return cls(doc["lo"], doc["hi"], doc["method"], doc["weight"], doc.get("unstable_dim"),
                   doc.get("params", {}), doc.get("witnesses", {}))


def _edge_weight_column(graph: TransitionGraph, weight: str, k: Optional[int]):
    if weight == "gamma":
        if k is None:
            raise ValueError("gamma weights need the unstable dimension k")
        if not 0 <= k < graph.weight_gamma.shape[1]:
            raise InvalidDim(f"unstable dimension {k} out of range")
        return graph.weight_gamma[:, k]
    if weight == "kappa":
        return graph.weight_kappa
    raise ValueError("weight must be 'gamma' or 'kappa'")


def _witness(graph, res, w):
    edges = list(res.edges)
    return {
        "cells": [int(graph.src[e]) for e in edges],
        "letters": [int(graph.letter[e]) for e in edges],
        "targets": [int(graph.dst[e]) for e in edges],
        "weights": [float(w[e]) for e in edges],
        "durations": [graph.dwell] * len(edges),
        "ratio": res.value,
    }


def morse_spectrum_bounds(graph: TransitionGraph, component: CellSet, weight: str = "gamma",
                          k: Optional[int] = None, method: str = "auto") -> SpectrumEstimate:
    """Min / max cycle ratio of the edge weights inside ``component``."""
    w = _edge_weight_column(graph, weight, k)
    sel = graph.subgraph_edges(component)
    cells = component.cells
    local = np.full(graph.grid.n_cells, -1, dtype=np.int64)
    local[cells] = np.arange(cells.size)
    src, dst = local[graph.src[sel]], local[graph.dst[sel]]
    ws, Ts = w[sel], graph.durations[sel]
    lo = cycle_ratio(cells.size, src, dst, ws, Ts, maximize=False, method=method)
    hi = cycle_ratio(cells.size, src, dst, ws, Ts, maximize=True, method=method)
    view = SimpleNamespace(src=graph.src[sel], dst=graph.dst[sel], letter=graph.letter[sel],
                           dwell=graph.dwell)
    return SpectrumEstimate(
        float(lo.value), float(hi.value), "cycle_ratio", weight, k,
        {"epsilon": graph.epsilon, "dwell": graph.dwell, "grid": graph.grid.to_dict(),
         "n_cells": int(cells.size), "n_edges": int(sel.size), "solver": lo.method},
        {"lo": _witness(view, lo, ws), "hi": _witness(view, hi, ws)},
    )


def replay_witness(system: ControlSystem, grid: GridPartition, witness: dict, weight: str,
                   k: Optional[int], step: float) -> float:
    """Recompute a witness cycle's ratio from fresh cocycle evaluations."""
    cells = np.asarray(witness["cells"])
    letters = system.control_range.letters[np.asarray(witness["letters"])]
    dwell = witness["durations"][0]
    g, kap, _ = edge_weights(system, grid.centers(cells), letters, dwell, step)
    w = g[:, k] if weight == "gamma" else kap
    return float(math.fsum(w) / math.fsum(witness["durations"]))


def component_orbits(system: ControlSystem, grid: GridPartition, component: CellSet,
                     max_orbits: int = 8, period: float = 1.0):
    """Equilibrium orbits of constant letters whose state lies in the component."""
    letters = system.control_range.letters
    mask = component.mask(grid)
    cells = component.cells
    seeds = grid.centers(cells[np.linspace(0, cells.size - 1, min(5, cells.size)).astype(int)])
    seeds = np.vstack([grid.centers(cells).mean(axis=0)[None], seeds])
    found = []
    for letter in letters:
        for s in seeds:
            try:
                orb = equilibrium_orbit(system, letter, s, period)
            except OrbitNotClosed:
                continue
            c = grid.cell_of(orb.x[None])[0]
            if c >= 0 and mask[c] and not any(
                    np.allclose(orb.x, o.x, atol=1e-9) and np.allclose(orb.u.values, o.u.values)
                    for o in found):
                found.append(orb)
                break
        if len(found) >= max_orbits:
            break
    return found


def splitting_for_component(system: ControlSystem, grid: GridPartition, component: CellSet,
                            horizon: float = 20.0, gap: float = 0.05, step: float = 1e-2):
    """Probe the splitting on periodic orbits inside a component.

    All probes must agree on the unstable dimension; otherwise (or if any
    probe is non-hyperbolic) NonHyperbolic is raised.
    """
    orbits = component_orbits(system, grid, component)
    if not orbits:
        raise NonHyperbolic("no periodic orbit found inside the component to probe the splitting")
    ests = []
    for orb in orbits:
        ests.append(estimate_splitting(system, orb.x, orb.u, horizon, gap, step, check_box=False))
    ks = {e.unstable_dim for e in ests}
    if len(ks) != 1:
        raise NonHyperbolic(f"unstable dimension varies across the component: {sorted(ks)}")
    best = min(ests, key=lambda e: e.lam)
    return best, orbits
