"""Invariance entropy from spanning sets and from the spectral formula.

A candidate signal is a word of letters held for ``dwell`` each; it covers
a K-cell when every sample point of the cell (centre plus lattice corners)
stays in Q, inflated by one cell, at every integrator sample up to time
tau, and, for the (tau,K)^Q flavour, ends in a K-cell.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .errors import InsufficientData, Uncoverable, UntrustedSplitting
from .sets import CellSet, GridPartition, TransitionGraph, dilate, erode
from .spectra import HyperbolicSplittingEstimate, SpectrumEstimate, morse_spectrum_bounds
from .system import ControlSignal, ControlSystem, flow_letters

log = logging.getLogger(__name__)

FLAVORS = ("tau_K_Q", "tau_K^Q")
EXACT_MAX_CELLS = 20
EXACT_MAX_CANDIDATES = 200
EXHAUSTIVE_MAX_WORDS = 60_000
GREEDY_EXHAUSTIVE_WORDS = 729
ROW_BUDGET = 2_000_000


@dataclass(eq=False)
class SpanningSet:
    tau: float
    dwell: float
    flavor: str
    letters: np.ndarray
    words: list
    coverage: list  # per word: sorted array of covered K-cells (verified)
    K: CellSet
    Q: CellSet
    grid: GridPartition
    samples_per_cell: int = 2
    step: float = 0.01
    method: str = "greedy"
    complete: bool = True

    def __len__(self):
        return len(self.words)

    @property
    def signals(self) -> list:
        return [ControlSignal.from_letters(self.letters[list(w)], self.dwell) for w in self.words]

    def first_cover(self) -> np.ndarray:
        """Per K-cell (in K.cells order) the smallest covering word index, -1 if none."""
        out = np.full(len(self.K), -1, dtype=np.int64)
        pos = {int(c): i for i, c in enumerate(self.K.cells)}
        for j in range(len(self.words) - 1, -1, -1):
            for c in self.coverage[j]:
                out[pos[int(c)]] = j
        return out

    def prefix(self, m: int) -> "SpanningSet":
        """The first m signals (a truncated, generally incomplete cover)."""
        sub = SpanningSet(self.tau, self.dwell, self.flavor, self.letters, self.words[:m],
                          self.coverage[:m], self.K, self.Q, self.grid, self.samples_per_cell,
                          self.step, self.method)
        sub.complete = bool(np.all(sub.first_cover() >= 0))
        return sub

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "dwell": self.dwell,
            "flavor": self.flavor,
            "method": self.method,
            "complete": self.complete,
            "letters": self.letters.tolist(),
            "words": [list(map(int, w)) for w in self.words],
            "coverage": [c.tolist() for c in self.coverage],
            "K": self.K.to_dict(),
            "Q": self.Q.to_dict(),
            "grid": self.grid.to_dict(),
            "samples_per_cell": self.samples_per_cell,
            "step": self.step,
        }

    @classmethod
    def from_dict(cls, doc) -> "SpanningSet":
        return cls(doc["tau"], doc["dwell"], doc["flavor"], np.asarray(doc["letters"], float),
                   [tuple(w) for w in doc["words"]],
                   [np.asarray(c, dtype=np.int64) for c in doc["coverage"]],
                   CellSet.from_dict(doc["K"]), CellSet.from_dict(doc["Q"]),
                   GridPartition.from_dict(doc["grid"]), doc["samples_per_cell"], doc["step"],
                   doc["method"], doc.get("complete", True))


def _n_letters(tau, dwell):
    n = tau / dwell
    if n < 1 - 1e-9 or abs(n - round(n)) > 1e-9:
        raise ValueError(f"tau={tau} is not a positive multiple of dwell={dwell}")
    return int(round(n))


def word_coverage(system: ControlSystem, grid: GridPartition, words: np.ndarray, cells: np.ndarray,
                  dwell: float, step: float, q_fat: np.ndarray, k_mask: Optional[np.ndarray],
                  samples_per_cell: int = 2) -> list:
    """Cells (among ``cells``) covered by each word.

    ``q_fat`` is the mask of the inflated Q; ``k_mask`` the K mask for the
    endpoint condition, or None for the (tau,K,Q) flavour. A first pass runs
    cell centres only; the remaining sample points are then checked for the
    surviving (word, cell) pairs.
    """
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    W = words.shape[0]
    pts = grid.sample_points(cells, samples_per_cell)
    C = pts.shape[0]
    pw = np.repeat(np.arange(W), C)
    pc = np.tile(np.arange(C), W)
    pw, pc = _surviving_pairs(system, grid, words, pw, pc, pts[:, :1], dwell, step, q_fat, k_mask)
    if pts.shape[1] > 1 and pw.size:
        pw, pc = _surviving_pairs(system, grid, words, pw, pc, pts[:, 1:], dwell, step, q_fat,
                                  k_mask)
    out = [[] for _ in range(W)]
    for w, c in zip(pw.tolist(), pc.tolist()):
        out[w].append(cells[c])
    return [np.sort(np.array(o, dtype=np.int64)) for o in out]


def _surviving_pairs(system, grid, words, pw, pc, pts, dwell, step, q_fat, k_mask):
    """(word, cell) pairs all of whose given sample points satisfy the constraints."""
    n = words.shape[1]
    S, d = pts.shape[1], pts.shape[2]
    letters = system.control_range.letters
    keep_w, keep_c = [], []
    chunk = max(1, ROW_BUDGET // S)
    for p0 in range(0, pw.size, chunk):
        cw, cc = pw[p0:p0 + chunk], pc[p0:p0 + chunk]
        pair = np.repeat(np.arange(cw.size), S)
        X = pts[cc].reshape(-1, d)
        for j in range(n):
            if pair.size == 0:
                break
            ok = np.ones(pair.size, dtype=bool)

            def watch(Y, ok=ok):
                c = grid.cell_of(Y)
                ok &= (c >= 0) & q_fat[np.maximum(c, 0)]

            X, _, _ = flow_letters(system, X, letters[words[cw[pair], j]], dwell, step,
                                   on_sample=watch)
            if j == n - 1 and k_mask is not None:
                c = grid.cell_of(X)
                ok &= (c >= 0) & k_mask[np.maximum(c, 0)]
            if not ok.all():
                alive = ~np.isin(pair, np.unique(pair[~ok]))
                pair, X = pair[alive], X[alive]
        done = np.unique(pair)
        keep_w.append(cw[done])
        keep_c.append(cc[done])
    if not keep_w:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(keep_w), np.concatenate(keep_c)


def spread_points(P: np.ndarray, n: int) -> np.ndarray:
    """Farthest-point sample of ``n`` rows, starting next to the centroid."""
    n = min(n, P.shape[0])
    first = int(np.argmin(np.linalg.norm(P - P.mean(axis=0), axis=1)))
    chosen = [first]
    dist = np.linalg.norm(P - P[first], axis=1)
    while len(chosen) < n:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(P - P[nxt], axis=1))
    return np.array(chosen)


def target_points(grid: GridPartition, K: CellSet, per_layer: Optional[int] = None) -> np.ndarray:
    """Spread points of K and of K eroded by 1, 2, 4, ... cells.

    Deep layers let a seed be steered so that its whole (expanded) image
    still fits next to the edge of K.
    """
    per_layer = per_layer or 2 ** grid.dim + 1
    cells, r = [], 0
    layer = K
    while len(layer):
        P = grid.centers(layer.cells)
        cells.extend(layer.cells[spread_points(P, per_layer)].tolist())
        r = 1 if r == 0 else 2 * r
        layer = erode(K, grid, r)
    return grid.centers(np.array(sorted(set(cells))))


class SteeringTable:
    """Semi-Lagrangian dynamic program for steering towards target points.

    V[t, r](x) approximates the smallest distance to target t reachable from
    x with r more letters while staying in the inflated Q at dwell instants;
    values live on cell centres and are linearly interpolated.
    """

    BIG = 1e6

    def __init__(self, system: ControlSystem, grid: GridPartition, targets: np.ndarray, n: int,
                 dwell: float, step: float, q_fat: np.ndarray):
        self.grid = grid
        self.targets = np.atleast_2d(targets)
        self.q_fat = q_fat
        letters = system.control_range.letters
        nl = letters.shape[0]
        C = grid.centers()
        N = C.shape[0]
        X = np.repeat(C, nl, axis=0)
        Y, _, esc = flow_letters(system, X, np.tile(letters, (N, 1)), dwell, step)
        Y[esc] = np.nan
        self.axes = [grid.lo[i] + (np.arange(grid.counts[i]) + 0.5) * grid.widths[i]
                     for i in range(grid.dim)]
        T = self.targets.shape[0]
        V = np.empty((T, max(n, 1), N))
        for t in range(T):
            v = np.linalg.norm(C - self.targets[t], axis=1)
            v[~q_fat] = np.inf
            V[t, 0] = v
            for r in range(1, n):
                w = self._interp(V[t, r - 1], Y).reshape(N, nl).min(axis=1)
                w[~q_fat] = np.inf
                V[t, r] = w
        self.V = V

    def _interp(self, values, P):
        from scipy.interpolate import RegularGridInterpolator

        vals = np.minimum(values, self.BIG).reshape(self.grid.counts)
        ok = np.all(np.isfinite(P), axis=1)
        out = np.full(P.shape[0], np.inf)
        if ok.any():
            f = RegularGridInterpolator(self.axes, vals, bounds_error=False, fill_value=None,
                                        method="linear")
            c = self.grid.cell_of(P[ok])
            w = f(P[ok])
            inside = (c >= 0) & self.q_fat[np.maximum(c, 0)]
            w[~inside | (w >= 0.5 * self.BIG)] = np.inf
            out[ok] = w
        return out

    def value(self, t_idx: np.ndarray, r: int, P: np.ndarray) -> np.ndarray:
        out = np.full(P.shape[0], np.inf)
        for t in np.unique(t_idx):
            sel = t_idx == t
            if r == 0:
                c = self.grid.cell_of(np.nan_to_num(P[sel], nan=np.inf))
                d = np.linalg.norm(P[sel] - self.targets[t], axis=1)
                d[(c < 0) | ~self.q_fat[np.maximum(c, 0)]] = np.inf
                out[sel] = d
            else:
                out[sel] = self._interp(self.V[t, r], P[sel])
        return out


def lookahead_words(system: ControlSystem, table: SteeringTable, starts: np.ndarray,
                    t_idx: np.ndarray, n: int, dwell: float, step: float,
                    depth: int = 2) -> np.ndarray:
    """Receding-horizon word search steering each start towards its target.

    At every position all ``depth``-letter continuations are simulated and
    scored by the steering table at their endpoint (exact distance once the
    word is complete); the first letter of the best continuation is kept,
    ties going to the lexicographically smallest continuation.
    """
    letters = system.control_range.letters
    nl = letters.shape[0]
    P = starts.shape[0]
    X = np.array(starts, dtype=float)
    words = np.zeros((P, n), dtype=np.int64)
    for j in range(n):
        Lj = min(depth, n - j)
        conts = np.array(list(itertools.product(range(nl), repeat=Lj)))
        Cn = conts.shape[0]
        Y = np.repeat(X, Cn, axis=0)
        bad = np.zeros(Y.shape[0], dtype=bool)
        for i in range(Lj):
            Y, _, esc = flow_letters(system, Y, letters[np.tile(conts[:, i], P)], dwell, step)
            c = table.grid.cell_of(np.nan_to_num(Y, nan=np.inf))
            bad |= esc | (c < 0) | ~table.q_fat[np.maximum(c, 0)]
        score = table.value(np.repeat(t_idx, Cn), n - j - Lj, Y)
        score = np.where(bad, np.inf, score).reshape(P, Cn)
        best = np.argmin(score, axis=1)
        words[:, j] = conts[best, 0]
        X, _, _ = flow_letters(system, X, letters[words[:, j]], dwell, step)
    return words


def _check_sets(K: CellSet, Q: CellSet, flavor: str):
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}")
    if len(K) == 0:
        raise ValueError("K is empty")
    if not K.issubset(Q):
        raise ValueError("K must be contained in Q")


def build_spanning_set(system: ControlSystem, grid: GridPartition, K: CellSet, Q: CellSet,
                       tau: float, dwell: float, flavor: str = "tau_K^Q",
                       candidate_depth: int = 2, seeds_per_round: int = 32,
                       samples_per_cell: int = 2, step: Optional[float] = None,
                       exact: bool = False) -> SpanningSet:
    """Cover K by letter words of duration tau.

    Greedy (default): candidates are generated lazily, in rounds, by a
    receding-horizon search from uncovered seed cells towards a spread of
    target points in K; the candidate with the largest residual coverage is
    taken first (ties: lexicographically smallest word). The count is an
    upper estimate of the minimal one.

    ``exact=True``: all words are enumerated and a minimum cover is found by
    integer programming (tiny instances only).
    """
    _check_sets(K, Q, flavor)
    n = _n_letters(tau, dwell)
    step = step or min(dwell, 0.01)
    q_fat = dilate(Q, grid, 1).mask(grid)
    k_mask = K.mask(grid) if flavor == "tau_K^Q" else None
    letters = system.control_range.letters
    common = (tau, dwell, flavor, letters.copy())
    if exact:
        words, cov = _exact_cover(system, grid, K, n, dwell, step, q_fat, k_mask, samples_per_cell)
        return SpanningSet(*common, words, cov, K, Q, grid, samples_per_cell, step, "exact")

    nl = letters.shape[0]
    if nl ** n <= GREEDY_EXHAUSTIVE_WORDS:
        words, cov = _greedy_exhaustive(system, grid, K, n, dwell, step, q_fat, k_mask,
                                        samples_per_cell)
        return SpanningSet(*common, words, cov, K, Q, grid, samples_per_cell, step, "greedy")

    uncovered = K.mask(grid)
    uncoverable = []
    pool_words, pool_cov = [], []
    chosen, chosen_cov = [], []
    table = SteeringTable(system, grid, target_points(grid, K), n, dwell, step, q_fat)
    T = table.targets.shape[0]
    rounds = 0
    while uncovered.any():
        rounds += 1
        left = np.flatnonzero(uncovered)
        seeds = left[np.unique(np.linspace(0, left.size - 1, min(seeds_per_round, left.size))
                               .round().astype(int))]
        starts = np.repeat(grid.centers(seeds), T, axis=0)
        t_idx = np.tile(np.arange(T), seeds.size)
        new = lookahead_words(system, table, starts, t_idx, n, dwell, step, candidate_depth)
        new = np.unique(new, axis=0)  # sorted, so later ties resolve lexicographically
        known = {tuple(w) for w in pool_words} | {tuple(w) for w in chosen}
        new = np.array([w for w in new if tuple(w) not in known], dtype=np.int64).reshape(-1, n)
        cov = word_coverage(system, grid, new, left, dwell, step, q_fat, k_mask, samples_per_cell)
        pool_words += [tuple(int(a) for a in w) for w in new]
        pool_cov += cov
        hit = np.zeros(grid.n_cells, dtype=bool)
        for c in pool_cov:
            hit[c] = True
        for s in seeds[~hit[seeds]]:
            uncoverable.append(int(s))
            uncovered[s] = False
        # greedy picks until the pool is stale relative to this round's best
        res = np.array([int(uncovered[c].sum()) for c in pool_cov])
        round_best = res.max() if res.size else 0
        while res.size and res.max() > 0 and res.max() >= max(1, round_best // 2):
            top = np.flatnonzero(res == res.max())
            i = min(top, key=lambda t: pool_words[t])
            got = pool_cov[i][uncovered[pool_cov[i]]]
            chosen.append(pool_words[i])
            chosen_cov.append(got)
            uncovered[got] = False
            pool_words.pop(i)
            pool_cov.pop(i)
            res = np.array([int(uncovered[c].sum()) for c in pool_cov])
        # drop exhausted candidates
        keep = [i for i, c in enumerate(pool_cov) if uncovered[c].any()]
        pool_words = [pool_words[i] for i in keep]
        pool_cov = [pool_cov[i][uncovered[pool_cov[i]]] for i in keep]
    if uncoverable:
        raise Uncoverable(sorted(uncoverable))
    # record full (not residual) coverage of each chosen word
    full = word_coverage(system, grid, np.array(chosen, dtype=np.int64).reshape(-1, n), K.cells,
                         dwell, step, q_fat, k_mask, samples_per_cell)
    keep = prune_redundant(full, grid.n_cells)
    chosen, full = [chosen[i] for i in keep], [full[i] for i in keep]
    log.info("spanning tau=%g: %d signals after %d rounds", tau, len(chosen), rounds)
    return SpanningSet(*common, chosen, full, K, Q, grid, samples_per_cell, step, "greedy")


def _greedy_exhaustive(system, grid, K, n, dwell, step, q_fat, k_mask, samples_per_cell):
    """Greedy cover with every word of length n as a candidate."""
    nl = system.control_range.letters.shape[0]
    words = np.array(list(itertools.product(range(nl), repeat=n)), dtype=np.int64)
    cov = word_coverage(system, grid, words, K.cells, dwell, step, q_fat, k_mask, samples_per_cell)
    hit = np.zeros(grid.n_cells, dtype=bool)
    for c in cov:
        hit[c] = True
    missing = K.cells[~hit[K.cells]]
    if missing.size:
        raise Uncoverable(missing.tolist())
    uncovered = K.mask(grid)
    chosen = []
    while uncovered.any():
        res = np.array([int(uncovered[c].sum()) for c in cov])
        i = int(np.argmax(res))  # words are in lexicographic order
        chosen.append(i)
        uncovered[cov[i]] = False
    chosen = [chosen[i] for i in prune_redundant([cov[i] for i in chosen], grid.n_cells)]
    return [tuple(int(a) for a in words[i]) for i in chosen], [cov[i] for i in chosen]


def prune_redundant(cov: list, n_cells: int) -> list:
    """Reverse-delete pass: indices of a sub-cover, dropping (latest first)
    every set whose cells are all covered by the others. Order is kept."""
    count = np.zeros(n_cells, dtype=np.int64)
    for c in cov:
        count[c] += 1
    keep = list(range(len(cov)))
    for i in range(len(cov) - 1, -1, -1):
        if cov[i].size and np.all(count[cov[i]] > 1):
            count[cov[i]] -= 1
            keep.remove(i)
    return keep


def _exact_cover(system, grid, K, n, dwell, step, q_fat, k_mask, samples_per_cell):
    if len(K) > EXACT_MAX_CELLS:
        raise ValueError(f"exact cover limited to {EXACT_MAX_CELLS} K-cells, got {len(K)}")
    nl = system.control_range.letters.shape[0]
    if nl ** n > EXHAUSTIVE_MAX_WORDS:
        raise ValueError(f"{nl}^{n} words exceed the exhaustive limit {EXHAUSTIVE_MAX_WORDS}")
    words = np.array(list(itertools.product(range(nl), repeat=n)), dtype=np.int64)
    cov = word_coverage(system, grid, words, K.cells, dwell, step, q_fat, k_mask, samples_per_cell)
    A, keep_idx = reduced_cover_matrix(K.cells, cov)
    missing = K.cells[~A.any(axis=1)] if A.size else K.cells
    if missing.size:
        raise Uncoverable(missing.tolist())
    if A.shape[1] > EXACT_MAX_CANDIDATES:
        raise ValueError(f"{A.shape[1]} undominated candidates exceed {EXACT_MAX_CANDIDATES}")
    pick = minimum_set_cover(A)
    chosen = sorted(int(keep_idx[p]) for p in pick)
    return [tuple(int(a) for a in words[i]) for i in chosen], [cov[i] for i in chosen]


def reduced_cover_matrix(cells: np.ndarray, cov: list):
    """Boolean (cells x candidates) matrix after dropping empty, duplicate and
    dominated candidates; returns it with the surviving candidate indices
    (the lexicographically first word represents each coverage pattern)."""
    pos = {int(c): i for i, c in enumerate(cells)}
    rows = []
    seen = {}
    for j, c in enumerate(cov):
        if c.size == 0:
            continue
        v = np.zeros(cells.size, dtype=bool)
        v[[pos[int(x)] for x in c]] = True
        key = v.tobytes()
        if key not in seen:
            seen[key] = j
            rows.append((j, v))
    keep = []
    for a, (ja, va) in enumerate(rows):
        dominated = any(
            b != a and np.all(va <= vb) and (vb.sum() > va.sum())
            for b, (jb, vb) in enumerate(rows)
        )
        if not dominated:
            keep.append((ja, va))
    if not keep:
        return np.zeros((cells.size, 0), dtype=bool), np.zeros(0, dtype=np.int64)
    return np.stack([v for _, v in keep], axis=1), np.array([j for j, _ in keep])


def minimum_set_cover(A: np.ndarray) -> list:
    """Column indices of a minimum-cardinality cover of the rows of A (MILP)."""
    n_rows, n_cols = A.shape
    res = milp(np.ones(n_cols), constraints=LinearConstraint(A.astype(float), lb=1, ub=np.inf),
               integrality=np.ones(n_cols), bounds=Bounds(0, 1))
    if not res.success:
        raise Uncoverable([])
    return sorted(int(i) for i in np.flatnonzero(res.x > 0.5))


def default_K(D: CellSet, grid: GridPartition) -> CellSet:
    """The control-set approximation eroded by one cell."""
    return CellSet(erode(D, grid, 1).cells, "K")


@dataclass
class EntropyEstimate:
    taus: np.ndarray
    counts: np.ndarray
    h: float
    fekete: float
    method: str = "greedy"
    notes: list = field(default_factory=list)

    @property
    def upper_estimate(self) -> bool:
        return self.method == "greedy"

    def to_dict(self) -> dict:
        return {
            "taus": self.taus.tolist(),
            "counts": self.counts.tolist(),
            "h": self.h,
            "h_bits": self.h / math.log(2),
            "fekete": self.fekete,
            "fekete_bits": self.fekete / math.log(2),
            "method": self.method,
            "upper_estimate": self.upper_estimate,
            "notes": list(self.notes),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "r", "log_r_over_tau"])
        for t, r in zip(self.taus, self.counts):
            w.writerow([repr(float(t)), int(r), repr(math.log(r) / t)])
        return buf.getvalue()


def entropy_from_counts(counts: dict, method: str = "greedy") -> EntropyEstimate:
    """Least-squares slope of log r(tau) against tau, plus the Fekete bound
    min log r(tau) / tau (the principled upper estimate)."""
    if len(counts) < 3:
        raise InsufficientData(f"need at least 3 values of tau, got {len(counts)}")
    taus = np.array(sorted(counts), dtype=float)
    r = np.array([counts[t] for t in sorted(counts)], dtype=np.int64)
    if np.any(r < 1):
        raise ValueError("counts must be positive integers")
    y = np.log(r)
    slope = float(np.polyfit(taus, y, 1)[0])
    fek = float(np.min(y / taus))
    notes = []
    if method == "greedy":
        notes.append("greedy covers: counts and rates are upper estimates")
    viol = subadditivity_violations(dict(zip(taus.tolist(), r.tolist())))
    if viol:
        notes.append(f"log r not subadditive at {viol}")
    return EntropyEstimate(taus, r, slope, fek, method, notes)


def subadditivity_violations(counts: dict, slack: float = 0.0) -> list:
    """Pairs (t1, t2) with r(t1 + t2) > r(t1) r(t2) * exp(slack)."""
    out = []
    for t1, t2 in itertools.combinations_with_replacement(sorted(counts), 2):
        t = t1 + t2
        match = [s for s in counts if abs(s - t) < 1e-9]
        if match and math.log(counts[match[0]]) > math.log(counts[t1] * counts[t2]) + slack:
            out.append((t1, t2))
    return out


def spectral_estimate(graph: TransitionGraph, component: CellSet,
                      splitting: Optional[HyperbolicSplittingEstimate]) -> SpectrumEstimate:
    if splitting is None or not splitting.hyperbolic:
        raise UntrustedSplitting("component is not certified hyperbolic")
    return morse_spectrum_bounds(graph, component, "gamma", splitting.unstable_dim)


def h_inv_spectral(graph: TransitionGraph, component: CellSet,
                   splitting: Optional[HyperbolicSplittingEstimate]) -> float:
    """Infimum of the gamma Morse spectrum over the component (nats/time)."""
    return spectral_estimate(graph, component, splitting).lo


@dataclass
class Reconciliation:
    spectral: float
    fekete: float
    slope: float
    gap: float
    tol: float
    status: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def reconcile(spanning: EntropyEstimate, spectral: float, tol: float = 0.05) -> Reconciliation:
    """The spectral value should not exceed the spanning Fekete bound (+tol)."""
    gap = spanning.fekete - spectral
    status = "PASS" if spectral <= spanning.fekete + tol else "FAIL"
    return Reconciliation(spectral, spanning.fekete, spanning.h, gap, tol, status)
