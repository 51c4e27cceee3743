"""Control-affine systems, piecewise-constant control signals and the RK4 flow.

A system is ``x' = f_0(a, x) + sum_i u_i f_i(a, x)`` on a box in R^d. All
evaluators are vectorised over a leading batch axis so that transition
graphs, spanning-set candidates and randomised property checks can push
thousands of initial states through one integration loop.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NonFinite, StateEscaped

FieldFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ControlRange:
    lo: np.ndarray
    hi: np.ndarray
    letters: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("control box needs lo < hi componentwise")
        if np.any(lo >= 0) or np.any(hi <= 0):
            raise ValueError("0 must lie strictly inside the control box")
        letters = self.letters
        if letters is None:
            letters = lattice_letters(lo, hi)
        letters = np.asarray(letters, dtype=float).reshape(-1, lo.size)
        if np.any(letters < lo - 1e-12) or np.any(letters > hi + 1e-12):
            raise ValueError("every letter must lie in the control box")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "letters", letters)

    @classmethod
    def box(cls, lo, hi, letters=None) -> "ControlRange":
        return cls(lo, hi, letters)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, values, tol=1e-12) -> bool:
        values = np.asarray(values, dtype=float).reshape(-1, self.dim)
        return bool(np.all(values >= self.lo - tol) and np.all(values <= self.hi + tol))


def lattice_letters(lo, hi) -> np.ndarray:
    """The 3^m alphabet {lo_i, 0, hi_i}^m in lexicographic order."""
    axes = [(l, 0.0, h) for l, h in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)), dtype=float)


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant control: ``values[j]`` on ``[breakpoints[j], breakpoints[j+1])``.

    A periodic signal is defined on all of [0, inf) by repetition with period
    equal to its duration.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1) if bp.size > 1 else vals.reshape(0, max(vals.size, 1))
        if bp.size == 0 or bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if vals.shape[0] != bp.size - 1:
            raise ValueError("need one value per interval")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("durations must be positive")
        if self.periodic and bp.size < 2:
            raise ValueError("an empty signal cannot be periodic")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value, duration: float, periodic: bool = True) -> "ControlSignal":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.array([0.0, duration]), value.reshape(1, -1), periodic)

    @classmethod
    def from_letters(cls, letters, dwell: float, periodic: bool = False) -> "ControlSignal":
        letters = np.asarray(letters, dtype=float)
        if letters.ndim == 1:
            letters = letters.reshape(-1, 1)
        n = letters.shape[0]
        return cls(dwell * np.arange(n + 1, dtype=float), letters, periodic)

    @classmethod
    def empty(cls, m: int = 1) -> "ControlSignal":
        return cls(np.zeros(1), np.zeros((0, m)))

    @property
    def duration(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def period(self) -> Optional[float]:
        return self.duration if self.periodic else None

    @property
    def input_dim(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]

    def value_at(self, t: float) -> np.ndarray:
        if self.periodic:
            t = math.fmod(t, self.duration)
        elif t > self.duration or t < 0:
            raise DomainError(f"t={t} outside signal domain [0, {self.duration}]")
        j = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[min(max(j, 0), len(self) - 1)]

    def pieces(self, horizon: float):
        """Constant pieces ``(a, b, value)`` tiling ``[0, horizon]``."""
        if horizon < 0:
            raise DomainError("negative horizon")
        if horizon == 0:
            return []
        if not self.periodic and horizon > self.duration * (1 + 1e-12):
            raise DomainError(f"horizon {horizon} exceeds finite signal duration {self.duration}")
        out = []
        offset = 0.0
        bp = self.breakpoints
        while offset < horizon:
            for j in range(len(self)):
                a, b = offset + bp[j], offset + bp[j + 1]
                if a >= horizon:
                    break
                out.append((a, min(b, horizon), self.values[j]))
            offset += self.duration
            if not self.periodic:
                break
        a, b, v = out[-1]
        out[-1] = (a, horizon, v)
        return out

    def restricted(self, horizon: float) -> "ControlSignal":
        pcs = self.pieces(horizon)
        bp = [0.0] + [b for _, b, _ in pcs]
        return ControlSignal(np.array(bp), np.array([v for _, _, v in pcs]).reshape(len(pcs), -1))


def signal_concat(u1: ControlSignal, u2: ControlSignal) -> ControlSignal:
    """``(u1 u2)(t) = u1(t)`` on ``[0, T1)`` and ``u2(t - T1)`` afterwards."""
    if len(u2) == 0:
        return u1
    if len(u1) == 0:
        return u2
    bp = np.concatenate([u1.breakpoints, u1.duration + u2.breakpoints[1:]])
    return ControlSignal(bp, np.vstack([u1.values, u2.values]))


def signal_repeat(u: ControlSignal, n: int) -> ControlSignal:
    if n < 0:
        raise DomainError("repeat count must be nonnegative")
    out = ControlSignal.empty(u.input_dim)
    for _ in range(n):
        out = signal_concat(out, ControlSignal(u.breakpoints, u.values))
    if u.periodic and n > 0:
        out = replace(out, periodic=True)
    return out


def signal_shift(u: ControlSignal, t: float) -> ControlSignal:
    """The shift ``s -> u(t + s)``."""
    if t < 0:
        raise DomainError("shift must be nonnegative")
    if u.periodic:
        t = math.fmod(t, u.duration)
        if t == 0:
            return u
        head = u.pieces(t)
        tail_bp = u.breakpoints[u.breakpoints > t]
        j0 = int(np.searchsorted(u.breakpoints, t, side="right")) - 1
        bp = np.concatenate([[0.0], tail_bp - t, u.duration - t + np.array([b for _, b, _ in head])])
        vals = np.vstack([u.values[j0:], np.array([v for _, _, v in head])])
        return ControlSignal(bp, vals, periodic=True)
    if t > u.duration:
        raise DomainError(f"cannot shift a signal of duration {u.duration} by {t}")
    if t == u.duration:
        return ControlSignal.empty(u.input_dim)
    j0 = int(np.searchsorted(u.breakpoints, t, side="right")) - 1
    bp = np.concatenate([[0.0], u.breakpoints[j0 + 1:] - t])
    return ControlSignal(bp, u.values[j0:])


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """Parametrised control-affine system on a working box.

    ``fields(params, X)`` maps a batch ``X`` of shape (n, d) to (n, m+1, d)
    holding f_0..f_m; ``jacobians`` (optional) returns (n, m+1, d, d). Without
    analytic Jacobians a central difference with h = 1e-6 (1 + |x|) is used
    and ``analytic_jacobian`` is False.
    """

    state_dim: int
    params: np.ndarray
    fields: FieldFn
    control_range: ControlRange
    box_lo: np.ndarray
    box_hi: np.ndarray
    jacobians: Optional[FieldFn] = None
    name: str = ""
    escape_inflation: float = 1.5
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", np.atleast_1d(np.asarray(self.params, dtype=float)))
        lo = np.atleast_1d(np.asarray(self.box_lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.box_hi, dtype=float))
        if lo.size != self.state_dim or hi.size != self.state_dim or np.any(lo >= hi):
            raise ValueError("state box must be a nondegenerate box in R^d")
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)

    @property
    def input_dim(self) -> int:
        return self.control_range.dim

    @property
    def analytic_jacobian(self) -> bool:
        return self.jacobians is not None

    def with_params(self, params) -> "ControlSystem":
        return replace(self, params=np.atleast_1d(np.asarray(params, dtype=float)))

    def with_box(self, lo, hi) -> "ControlSystem":
        return replace(self, box_lo=np.asarray(lo, float), box_hi=np.asarray(hi, float))

    def field_batch(self, X: np.ndarray) -> np.ndarray:
        return self.fields(self.params, X)

    def jacobian_batch(self, X: np.ndarray) -> np.ndarray:
        if self.jacobians is not None:
            return self.jacobians(self.params, X)
        n, d = X.shape
        h = 1e-6 * (1.0 + np.linalg.norm(X, axis=1))
        cols = []
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            dx = h[:, None] * e
            diff = self.fields(self.params, X + dx) - self.fields(self.params, X - dx)
            cols.append(diff / (2 * h)[:, None, None])
        return np.stack(cols, axis=-1)

    def rhs(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        F = self.fields(self.params, X)
        return F[:, 0] + np.einsum("nm,nmd->nd", U, F[:, 1:])

    def rhs_jac(self, X: np.ndarray, U: np.ndarray):
        F = self.fields(self.params, X)
        J = self.jacobian_batch(X)
        f = F[:, 0] + np.einsum("nm,nmd->nd", U, F[:, 1:])
        A = J[:, 0] + np.einsum("nm,nmij->nij", U, J[:, 1:])
        return f, A

    def in_box(self, X: np.ndarray, inflation: float = 1.0) -> np.ndarray:
        c = 0.5 * (self.box_lo + self.box_hi)
        r = 0.5 * (self.box_hi - self.box_lo) * inflation
        return np.all(np.abs(X - c) <= r + 1e-12, axis=-1)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.box_hi - self.box_lo))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    signal: ControlSignal
    matrices: Optional[np.ndarray] = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# --- integration ---------------------------------------------------------


def step_schedule(u: ControlSignal, horizon: float, step: float):
    """Uniform substeps inside every constant piece: (times, h, values)."""
    if step <= 0:
        raise DomainError("step must be positive")
    times = [0.0]
    hs, vals = [], []
    for a, b, v in u.pieces(horizon):
        n = max(1, math.ceil((b - a) / step - 1e-9))
        h = (b - a) / n
        for j in range(1, n + 1):
            times.append(b if j == n else a + j * h)
            hs.append(h)
            vals.append(v)
    m = u.input_dim
    return np.array(times), np.array(hs), np.array(vals, dtype=float).reshape(len(hs), m)


def rk4_step(system: ControlSystem, X, U, h, D=None):
    """One classical RK4 step for the state (and optionally D' = J D)."""
    hcol = h if np.ndim(h) == 0 else np.asarray(h)[:, None]
    if D is None:
        k1 = system.rhs(X, U)
        k2 = system.rhs(X + 0.5 * hcol * k1, U)
        k3 = system.rhs(X + 0.5 * hcol * k2, U)
        k4 = system.rhs(X + hcol * k3, U)
        return X + hcol / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), None
    hmat = h if np.ndim(h) == 0 else np.asarray(h)[:, None, None]
    f1, A1 = system.rhs_jac(X, U)
    K1 = np.einsum("nij,njk->nik", A1, D)
    f2, A2 = system.rhs_jac(X + 0.5 * hcol * f1, U)
    K2 = np.einsum("nij,njk->nik", A2, D + 0.5 * hmat * K1)
    f3, A3 = system.rhs_jac(X + 0.5 * hcol * f2, U)
    K3 = np.einsum("nij,njk->nik", A3, D + 0.5 * hmat * K2)
    f4, A4 = system.rhs_jac(X + hcol * f3, U)
    K4 = np.einsum("nij,njk->nik", A4, D + hmat * K3)
    Xn = X + hcol / 6.0 * (f1 + 2 * f2 + 2 * f3 + f4)
    Dn = D + hmat / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)
    return Xn, Dn


def _check(system, X, check_box):
    if not np.all(np.isfinite(X)):
        raise NonFinite("state overflow or NaN during integration")
    if check_box and system.escape_inflation is not None:
        if not np.all(system.in_box(X, system.escape_inflation)):
            raise StateEscaped("trajectory left the inflated state box")


def integrate(system: ControlSystem, x0, u: ControlSignal, horizon: float, step: float = 1e-2,
              with_matrices: bool = False, check_box: bool = True) -> Trajectory:
    """Sample ``phi(t, x0, u)`` on a uniform-per-piece grid over ``[0, horizon]``."""
    x0 = np.asarray(x0, dtype=float).reshape(1, system.state_dim)
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    if horizon == 0:
        D = np.eye(system.state_dim)[None] if with_matrices else None
        return Trajectory(np.zeros(1), x0.copy(), u, D)
    times, hs, vals = step_schedule(u, horizon, step)
    X = x0
    D = np.eye(system.state_dim)[None] if with_matrices else None
    states = [X[0]]
    mats = [D[0]] if with_matrices else None
    for h, v in zip(hs, vals):
        X, D = rk4_step(system, X, v[None], h, D)
        _check(system, X, check_box)
        states.append(X[0])
        if with_matrices:
            mats.append(D[0])
    return Trajectory(times, np.array(states), u, np.array(mats) if with_matrices else None)


def variational_flow(system: ControlSystem, x0, u: ControlSignal, t: float, step: float = 1e-2,
                     check_box: bool = True) -> np.ndarray:
    """Fundamental matrix ``d phi_{t,u}(x0)`` solving D' = J(t) D, D(0) = I."""
    if t == 0:
        return np.eye(system.state_dim)
    return integrate(system, x0, u, t, step, with_matrices=True, check_box=check_box).matrices[-1]


def flow_batch(system: ControlSystem, X0, signals, horizons, step: float = 1e-2,
               with_matrices: bool = False):
    """Integrate many (x0, u, t) triples at once; rows take their own step sizes.

    Each row gets the schedule of :func:`step_schedule`; shorter schedules
    are padded with zero-length steps. No box check (used for randomised
    property checks on unbounded linear examples).
    """
    X = np.array(X0, dtype=float).reshape(-1, system.state_dim)
    n = X.shape[0]
    scheds = [step_schedule(u, T, step)[1:] for u, T in zip(signals, horizons)]
    N = max((len(h) for h, _ in scheds), default=0)
    m = system.input_dim
    H = np.zeros((N, n))
    V = np.zeros((N, n, m))
    for i, (h, v) in enumerate(scheds):
        H[: len(h), i] = h
        V[: len(h), i] = v
        if len(h) and len(h) < N:
            V[len(h):, i] = v[-1]
    D = np.repeat(np.eye(system.state_dim)[None], n, axis=0) if with_matrices else None
    for k in range(N):
        X, D = rk4_step(system, X, V[k], H[k], D)
    if not np.all(np.isfinite(X)):
        raise NonFinite("state overflow or NaN during batch integration")
    return X, D


def flow_letters(system: ControlSystem, X0, letters, dwell: float, step: float,
                 with_matrices: bool = False, on_sample=None):
    """Integrate a batch under constant per-row letters for one dwell time.

    ``letters`` is (n, m). ``on_sample(X)`` is called after each substep.
    Rows that leave the inflated box become NaN and are reported in the
    returned ``escaped`` mask instead of raising.
    """
    X = np.array(X0, dtype=float)
    n = X.shape[0]
    nsub = max(1, math.ceil(dwell / step - 1e-9))
    h = dwell / nsub
    D = np.repeat(np.eye(system.state_dim)[None], n, axis=0) if with_matrices else None
    escaped = np.zeros(n, dtype=bool)
    for _ in range(nsub):
        X, D = rk4_step(system, X, letters, h, D)
        bad = ~np.isfinite(X).all(axis=1)
        if system.escape_inflation is not None:
            bad |= ~system.in_box(X, system.escape_inflation)
        if bad.any():
            escaped |= bad
            X[bad] = np.nan
            if D is not None:
                D[bad] = np.nan
        if on_sample is not None:
            on_sample(X)
    return X, D, escaped
