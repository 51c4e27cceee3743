"""Coder-controller over a noiseless digital channel.

Every tau time units the coder quantizes x(k tau) to its coding region,
sends one symbol, and the controller plays the open-loop signal attached
to that symbol. A run PASSes when the state stays in Q (inflated by one
cell, checked at every integrator sample) and is back in K at every
sampling instant.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .entropy import SpanningSet, build_spanning_set
from .errors import EncoderMiss, InitialStateOutsideK, NoPass
from .sets import CellSet, GridPartition, dilate
from .system import ControlSignal, ControlSystem, flow_letters

log = logging.getLogger(__name__)

# failure reasons
OK, LEFT_Q, MISSED_K, ENCODER_MISS = "ok", "left_Q", "missed_K", "encoder_miss"


@dataclass(eq=False)
class CoderController:
    tau: float
    dwell: float
    grid: GridPartition
    regions: np.ndarray  # per grid cell: symbol, or -1 outside every region
    words: list
    letters: np.ndarray
    K: CellSet
    Q: CellSet
    step: float

    @property
    def alphabet_size(self) -> int:
        return len(self.words)

    @property
    def alphabet_sizes(self):
        """Per-step alphabet sizes (constant)."""
        return [self.alphabet_size]

    @property
    def controls(self) -> list:
        return [ControlSignal.from_letters(self.letters[list(w)], self.dwell) for w in self.words]

    @property
    def rate_bits(self) -> float:
        return math.log2(self.alphabet_size) / self.tau

    @property
    def complete(self) -> bool:
        return bool(np.all(self.regions[self.K.cells] >= 0))

    def region_cells(self, symbol: int) -> np.ndarray:
        return np.flatnonzero(self.regions == symbol)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "dwell": self.dwell,
            "alphabet_size": self.alphabet_size,
            "rate_bits": self.rate_bits,
            "letters": self.letters.tolist(),
            "words": [list(map(int, w)) for w in self.words],
            "regions": {str(int(c)): int(self.regions[c]) for c in self.K.cells},
            "grid": self.grid.to_dict(),
            "K": self.K.to_dict(),
            "Q": self.Q.to_dict(),
            "step": self.step,
        }


def build_coder_controller(spanning: SpanningSet) -> CoderController:
    """Coding region of a K-cell = smallest index of a signal covering it."""
    if spanning.flavor != "tau_K^Q":
        raise ValueError("a coder-controller needs a (tau,K)^Q-spanning set")
    regions = np.full(spanning.grid.n_cells, -1, dtype=np.int64)
    regions[spanning.K.cells] = spanning.first_cover()
    return CoderController(spanning.tau, spanning.dwell, spanning.grid, regions,
                           list(spanning.words), spanning.letters, spanning.K, spanning.Q,
                           spanning.step)


@dataclass
class Transcript:
    x0: np.ndarray
    tau: float
    states: np.ndarray  # x(k tau), k = 0..K
    symbols: list
    q_flags: list
    k_flags: list
    alphabet_sizes: list
    status: str
    reason: str = OK
    fail_step: Optional[int] = None
    seed: Optional[int] = None

    @property
    def steps(self) -> int:
        return len(self.symbols)

    @property
    def rate_bits(self) -> float:
        """(1/(k tau)) sum_j log2 |S_j|, with the product of sizes kept exact."""
        k = len(self.alphabet_sizes)
        if k == 0:
            return 0.0
        return math.log2(math.prod(self.alphabet_sizes)) / (k * self.tau)

    def to_jsonl(self) -> str:
        lines = []
        for k, s in enumerate(self.symbols):
            lines.append(json.dumps({
                "k": k,
                "x": [float(v) for v in self.states[k]],
                "symbol": int(s),
                "q_flag": bool(self.q_flags[k]),
                "k_flag": bool(self.k_flags[k]),
            }))
        lines.append(json.dumps({"status": self.status, "reason": self.reason,
                                 "fail_step": self.fail_step, "rate_bits": self.rate_bits,
                                 "seed": self.seed}))
        return "\n".join(lines) + "\n"


@dataclass
class RunSummary:
    X0: np.ndarray
    passed: np.ndarray
    reason: np.ndarray
    fail_step: np.ndarray
    rate_bits: float
    seed: Optional[int] = None

    @property
    def fail_rate(self) -> float:
        return float(1.0 - self.passed.mean()) if self.passed.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.X0.shape[1]
        w.writerow([f"x0_{i}" for i in range(d)] + ["status", "reason", "fail_step", "R_bits"])
        for x, p, r, f in zip(self.X0, self.passed, self.reason, self.fail_step):
            w.writerow([repr(float(v)) for v in x] + ["PASS" if p else "FAIL", r,
                                                       "" if f < 0 else int(f),
                                                       repr(self.rate_bits)])
        return buf.getvalue()


def _run(system: ControlSystem, cc: CoderController, X0: np.ndarray, steps: int,
         record: bool = False, step: Optional[float] = None):
    """Vectorized closed loop; rows stop at their first violation."""
    grid = cc.grid
    step = step or cc.step
    q_fat = dilate(cc.Q, grid, 1).mask(grid)
    k_mask = cc.K.mask(grid)
    P, d = X0.shape
    n = len(cc.words[0]) if cc.words else int(round(cc.tau / cc.dwell))
    W = np.array(cc.words, dtype=np.int64).reshape(-1, n)
    X = np.array(X0, dtype=float)
    alive = np.ones(P, dtype=bool)
    reason = np.full(P, OK, dtype=object)
    fail_step = np.full(P, -1, dtype=np.int64)
    states = np.full((steps + 1, P, d), np.nan) if record else None
    symbols = np.full((steps, P), -1, dtype=np.int64) if record else None
    qflags = np.ones((steps, P), dtype=bool) if record else None
    kflags = np.ones((steps, P), dtype=bool) if record else None
    if record:
        states[0] = X
    for k in range(steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        c = grid.cell_of(X[idx])
        sym = np.where(c >= 0, cc.regions[np.maximum(c, 0)], -1)
        miss = sym < 0
        if miss.any():
            bad = idx[miss]
            alive[bad] = False
            reason[bad] = ENCODER_MISS
            fail_step[bad] = k
            idx, sym = idx[~miss], sym[~miss]
        if record:
            symbols[k, idx] = sym
        if idx.size == 0:
            break
        Y = X[idx]
        inside = np.ones(idx.size, dtype=bool)

        def watch(Z, inside=inside):
            cz = grid.cell_of(np.nan_to_num(Z, nan=np.inf))
            inside &= (cz >= 0) & q_fat[np.maximum(cz, 0)]

        for j in range(n):
            Y, _, _ = flow_letters(system, Y, cc.letters[W[sym, j]], cc.dwell, step,
                                   on_sample=watch)
        ce = grid.cell_of(np.nan_to_num(Y, nan=np.inf))
        in_k = (ce >= 0) & k_mask[np.maximum(ce, 0)]
        X[idx] = Y
        if record:
            states[k + 1, idx] = Y
            qflags[k, idx] = inside
            kflags[k, idx] = in_k
        badq = ~inside
        badk = inside & ~in_k
        for m, why in ((badq, LEFT_Q), (badk, MISSED_K)):
            if m.any():
                alive[idx[m]] = False
                reason[idx[m]] = why
                fail_step[idx[m]] = k
    return alive, reason, fail_step, states, symbols, qflags, kflags


def simulate_networked(system: ControlSystem, cc: CoderController, x0, steps: int,
                       strict: bool = False, seed: Optional[int] = None) -> Transcript:
    """One closed-loop run over ``steps`` sampling periods.

    An encoder miss (sampled state outside every coding region) ends the run
    as FAIL; with ``strict`` it raises EncoderMiss instead.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    c0 = cc.grid.cell_of(x0[None])[0]
    if c0 < 0 or c0 not in cc.K:
        raise InitialStateOutsideK(f"initial state {x0.tolist()} is not in K")
    alive, reason, fail_step, states, symbols, qf, kf = _run(system, cc, x0[None], steps,
                                                            record=True)
    k_done = steps if alive[0] else int(fail_step[0]) + (0 if reason[0] == ENCODER_MISS else 1)
    if reason[0] == ENCODER_MISS and strict:
        raise EncoderMiss(f"state {states[fail_step[0], 0].tolist()} at step {fail_step[0]} "
                          "lies outside every coding region")
    return Transcript(
        x0=x0,
        tau=cc.tau,
        states=states[:k_done + 1, 0],
        symbols=symbols[:k_done, 0].tolist(),
        q_flags=qf[:k_done, 0].tolist(),
        k_flags=kf[:k_done, 0].tolist(),
        alphabet_sizes=[cc.alphabet_size] * k_done,
        status="PASS" if alive[0] else "FAIL",
        reason=str(reason[0]),
        fail_step=None if alive[0] else int(fail_step[0]),
        seed=seed,
    )


def simulate_many(system: ControlSystem, cc: CoderController, X0, steps: int,
                  seed: Optional[int] = None) -> RunSummary:
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    alive, reason, fail_step, *_ = _run(system, cc, X0, steps)
    return RunSummary(X0, alive, reason.astype(str), fail_step, cc.rate_bits, seed)


def uniform_states_in(cells: CellSet, grid: GridPartition, n: int, seed: int) -> np.ndarray:
    """Uniform samples over the interiors of randomly drawn cells."""
    rng = np.random.default_rng(seed)
    lo, hi = grid.bounds(rng.choice(cells.cells, n))
    return lo + rng.random(lo.shape) * (hi - lo)


def sample_point_states(cc: CoderController) -> np.ndarray:
    """All sample points (centre and lattice corners) of the K-cells that
    lie inside a K-cell (corners on the outer boundary of K are dropped)."""
    pts = cc.grid.sample_points(cc.K.cells).reshape(-1, cc.grid.dim)
    c = cc.grid.cell_of(pts)
    return pts[(c >= 0) & cc.K.mask(cc.grid)[np.maximum(c, 0)]]


@dataclass
class ReplayReport:
    ok: bool
    max_state_deviation: float
    symbols_ok: bool
    q_ok: bool
    k_ok: bool


def replay(system: ControlSystem, cc: CoderController, transcript: Transcript,
           tol: float = 1e-4) -> ReplayReport:
    """Independent re-check of a transcript at half the integration step.

    Each period is re-integrated from the recorded sample x(k tau); the
    recorded symbol must match the coding region, the path must stay in the
    inflated Q and end in K, and the end point must agree with the record.
    """
    grid = cc.grid
    q_fat = dilate(cc.Q, grid, 1).mask(grid)
    k_mask = cc.K.mask(grid)
    dev, sym_ok, q_ok, k_ok = 0.0, True, True, True
    for k, s in enumerate(transcript.symbols):
        x = transcript.states[k][None]
        c = grid.cell_of(x)[0]
        sym_ok &= c >= 0 and int(cc.regions[c]) == int(s)
        inside = [True]

        def watch(Z):
            cz = grid.cell_of(np.nan_to_num(Z, nan=np.inf))[0]
            inside[0] &= bool(cz >= 0 and q_fat[cz])

        for j in range(len(cc.words[s])):
            x, _, _ = flow_letters(system, x, cc.letters[[cc.words[s][j]]], cc.dwell,
                                   cc.step / 2, on_sample=watch)
        q_ok &= inside[0]
        ce = grid.cell_of(np.nan_to_num(x, nan=np.inf))[0]
        k_ok &= bool(ce >= 0 and k_mask[ce])
        if k + 1 < len(transcript.states):
            ref = transcript.states[k + 1]
            dev = max(dev, float(np.linalg.norm(x[0] - ref) / (1 + np.linalg.norm(ref))))
    ok = sym_ok and q_ok and k_ok and dev <= tol
    return ReplayReport(bool(ok), dev, bool(sym_ok), bool(q_ok), bool(k_ok))


def truncated_controllers(spanning: SpanningSet, sizes) -> dict:
    """Coder-controllers built from the first m signals of a cover."""
    return {m: build_coder_controller(spanning.prefix(m)) for m in sizes}


@dataclass
class RateRow:
    tau: float
    m_min: int
    cover_size: int
    rate_bits: float
    rate_nats: float
    tested: list = field(default_factory=list)


def critical_rate_scan(system: ControlSystem, grid: GridPartition, K: CellSet, Q: CellSet,
                       taus, dwell: float, budgets=None, steps: int = 50,
                       step: Optional[float] = None, spanning: Optional[dict] = None,
                       **spanning_opts) -> list:
    """Per tau, the smallest alphabet size m whose truncated-cover
    coder-controller PASSes from every K-cell sample point over ``steps``
    periods; found by bisection over the sorted budget list (PASS is
    monotone in m because prefixes are nested)."""
    rows = []
    for tau in taus:
        sp = (spanning or {}).get(tau)
        if sp is None:
            sp = build_spanning_set(system, grid, K, Q, tau, dwell, step=step, **spanning_opts)
        r = len(sp)
        cand = sorted(set(int(b) for b in (budgets or range(1, r + 1)) if b >= 1))
        if not cand:
            raise NoPass("empty alphabet budget list")
        tested = []

        def passes(m):
            cc = build_coder_controller(sp.prefix(min(m, r)))
            ok = bool(simulate_many(system, cc, sample_point_states(cc), steps).passed.all())
            tested.append((m, ok))
            return ok

        lo, hi = 0, len(cand)
        while lo < hi:
            mid = (lo + hi) // 2
            if passes(cand[mid]):
                hi = mid
            else:
                lo = mid + 1
        if lo == len(cand):
            raise NoPass(f"no alphabet size in the budget passes at tau={tau}")
        m = cand[lo]
        rows.append(RateRow(float(tau), m, r, math.log2(m) / tau, math.log(m) / tau,
                            sorted(tested)))
        log.info("tau=%g: m_min=%d (%.4f bits/time)", tau, m, math.log2(m) / tau)
    return rows


def rate_table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "m_min", "cover_size", "rate_bits", "rate_nats"])
    for r in rows:
        w.writerow([repr(r.tau), r.m_min, r.cover_size, repr(r.rate_bits), repr(r.rate_nats)])
    return buf.getvalue()
