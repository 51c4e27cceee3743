"""Grid abstraction of the control flow: transition graphs, control sets and
chain control sets, plus Hausdorff-type distances between cell sets."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .cocycles import kappa_from_cumsums, log_singular_cumsums
from .errors import EmptyInput, EmptyResult
from .system import ControlSystem, flow_letters

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GridPartition:
    lo: np.ndarray
    hi: np.ndarray
    counts: tuple

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if len(counts) != lo.size or min(counts) < 1:
            raise ValueError("one positive cell count per axis required")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def for_system(cls, system: ControlSystem, resolution) -> "GridPartition":
        res = np.broadcast_to(np.atleast_1d(resolution), (system.state_dim,))
        return cls(system.box_lo, system.box_hi, tuple(int(r) for r in res))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    @property
    def widths(self) -> np.ndarray:
        return (self.hi - self.lo) / np.array(self.counts)

    @property
    def cell_width(self) -> float:
        return float(self.widths.max())

    @property
    def diag(self) -> float:
        return float(np.linalg.norm(self.widths))

    def multi_index(self, idx) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(idx), self.counts), axis=-1)

    def flat_index(self, multi) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(multi).T), self.counts)

    def centers(self, idx=None) -> np.ndarray:
        if idx is None:
            idx = np.arange(self.n_cells)
        m = self.multi_index(idx)
        return self.lo + (m + 0.5) * self.widths

    def bounds(self, idx):
        m = self.multi_index(idx)
        return self.lo + m * self.widths, self.lo + (m + 1) * self.widths

    def cell_of(self, X) -> np.ndarray:
        """Flat cell index of each point, -1 outside the grid."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        with np.errstate(invalid="ignore"):
            m = np.floor((X - self.lo) / self.widths)
        ok = np.all((m >= 0) & (m < np.array(self.counts)), axis=1)
        out = np.full(X.shape[0], -1, dtype=np.int64)
        if ok.any():
            out[ok] = self.flat_index(m[ok].astype(np.int64))
        return out

    def sample_points(self, idx, per_axis: int = 2) -> np.ndarray:
        """(n, S, d) sample points: the centre, plus a per_axis^d lattice
        including the corners when per_axis >= 2."""
        idx = np.atleast_1d(idx)
        c = self.centers(idx)
        offs = [np.zeros(self.dim)]
        if per_axis >= 2:
            ticks = np.linspace(-0.5, 0.5, per_axis)
            offs += [np.array(p) for p in itertools.product(ticks, repeat=self.dim)]
        offs = np.array(offs) * self.widths
        return c[:, None, :] + offs[None]

    def refine(self, factor: int) -> "GridPartition":
        return GridPartition(self.lo, self.hi, tuple(c * factor for c in self.counts))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, doc) -> "GridPartition":
        return cls(doc["lo"], doc["hi"], tuple(doc["counts"]))


@dataclass(frozen=True, eq=False)
class CellSet:
    cells: np.ndarray
    tag: str = "cells"

    def __post_init__(self):
        object.__setattr__(self, "cells", np.unique(np.asarray(self.cells, dtype=np.int64)))

    def __len__(self):
        return self.cells.size

    def __contains__(self, c):
        i = np.searchsorted(self.cells, c)
        return i < self.cells.size and self.cells[i] == c

    def issubset(self, other: "CellSet") -> bool:
        return bool(np.all(np.isin(self.cells, other.cells)))

    def mask(self, grid: GridPartition) -> np.ndarray:
        m = np.zeros(grid.n_cells, dtype=bool)
        m[self.cells] = True
        return m

    def centers(self, grid: GridPartition) -> np.ndarray:
        return grid.centers(self.cells)

    def to_dict(self) -> dict:
        return {"tag": self.tag, "cells": self.cells.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "CellSet":
        return cls(np.asarray(doc["cells"], dtype=np.int64), doc.get("tag", "cells"))

    @classmethod
    def from_box(cls, grid: GridPartition, lo, hi, tag="cells") -> "CellSet":
        """Cells whose centres lie in the closed box [lo, hi]."""
        c = grid.centers()
        lo = np.atleast_1d(lo)
        hi = np.atleast_1d(hi)
        inside = np.all((c >= lo - 1e-12) & (c <= hi + 1e-12), axis=1)
        return cls(np.flatnonzero(inside), tag)


def dilate(cells: CellSet, grid: GridPartition, r: int = 1) -> CellSet:
    """Cells within Chebyshev index distance r of the set."""
    if r <= 0 or len(cells) == 0:
        return cells
    m = grid.multi_index(cells.cells)
    offs = np.array(list(itertools.product(range(-r, r + 1), repeat=grid.dim)))
    nb = (m[:, None, :] + offs[None]).reshape(-1, grid.dim)
    ok = np.all((nb >= 0) & (nb < np.array(grid.counts)), axis=1)
    return CellSet(grid.flat_index(nb[ok]), cells.tag)


def erode(cells: CellSet, grid: GridPartition, r: int = 1) -> CellSet:
    """Cells whose whole r-neighbourhood (inside the grid) is in the set."""
    if r <= 0:
        return cells
    mask = cells.mask(grid)
    m = grid.multi_index(cells.cells)
    keep = np.ones(len(cells), dtype=bool)
    for off in itertools.product(range(-r, r + 1), repeat=grid.dim):
        nb = m + np.array(off)
        inside = np.all((nb >= 0) & (nb < np.array(grid.counts)), axis=1)
        member = np.zeros(len(cells), dtype=bool)
        member[inside] = mask[grid.flat_index(nb[inside])]
        keep &= member
    return CellSet(cells.cells[keep], cells.tag)


def transfer(cells: CellSet, src: GridPartition, dst: GridPartition) -> CellSet:
    """Cells of ``dst`` whose centres fall into a cell of ``cells``."""
    owner = src.cell_of(dst.centers())
    mask = cells.mask(src)
    hit = (owner >= 0) & mask[np.maximum(owner, 0)]
    return CellSet(np.flatnonzero(hit), cells.tag)


@dataclass(eq=False)
class TransitionGraph:
    grid: GridPartition
    dwell: float
    epsilon: float
    letters: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    letter: np.ndarray
    weight_gamma: np.ndarray  # (E, d+1): column k is gamma at unstable dim k
    weight_kappa: np.ndarray
    boundary_loss: int = 0
    samples_per_cell: int = 2
    step: float = 0.01
    meta: dict = field(default_factory=dict)

    @property
    def n_edges(self) -> int:
        return self.src.size

    @property
    def durations(self) -> np.ndarray:
        return np.full(self.n_edges, self.dwell)

    def adjacency(self) -> csr_matrix:
        n = self.grid.n_cells
        return csr_matrix((np.ones(self.n_edges), (self.src, self.dst)), shape=(n, n))

    def successors(self):
        order = np.argsort(self.src, kind="stable")
        starts = np.searchsorted(self.src[order], np.arange(self.grid.n_cells + 1))
        return order, starts

    def subgraph_edges(self, cells: CellSet) -> np.ndarray:
        mask = cells.mask(self.grid)
        return np.flatnonzero(mask[self.src] & mask[self.dst])

    def to_dict(self, cells: Optional[CellSet] = None) -> dict:
        sel = np.arange(self.n_edges) if cells is None else self.subgraph_edges(cells)
        return {
            "grid": self.grid.to_dict(),
            "dwell": self.dwell,
            "epsilon": self.epsilon,
            "letters": self.letters.tolist(),
            "boundary_loss": int(self.boundary_loss),
            "cells": sorted(set(self.src[sel].tolist()) | set(self.dst[sel].tolist())),
            "edges": [
                [int(self.src[e]), int(self.dst[e]), int(self.letter[e]), self.dwell,
                 [float(w) for w in self.weight_gamma[e]], float(self.weight_kappa[e])]
                for e in sel
            ],
        }


def _ball_cells(grid: GridPartition, P: np.ndarray, eps: float):
    """For each point, all cells meeting the closed sup-norm eps-ball.

    Returns (row, cell) pairs; points whose ball misses the grid yield none.
    """
    counts = np.array(grid.counts)
    w = grid.widths
    a = np.floor((P - eps - grid.lo) / w).astype(np.int64)
    b = np.floor((P + eps - grid.lo) / w).astype(np.int64)
    a = np.maximum(a, 0)
    b = np.minimum(b, counts - 1)
    valid = np.all(a <= b, axis=1)
    rows = np.flatnonzero(valid)
    a, b = a[valid], b[valid]
    span = (b - a).max(axis=0) + 1 if rows.size else np.ones(grid.dim, dtype=np.int64)
    out_r, out_c = [], []
    for off in itertools.product(*[range(s) for s in span]):
        m = a + np.array(off)
        ok = np.all(m <= b, axis=1)
        if ok.any():
            out_r.append(rows[ok])
            out_c.append(grid.flat_index(m[ok]))
    if not out_r:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(out_r), np.concatenate(out_c)


def edge_weights(system: ControlSystem, points: np.ndarray, letters: np.ndarray, dwell: float,
                 step: float):
    """gamma cumsums (n, d+1) and kappa (n,) over one dwell from each point under its letter."""
    _, D, esc = flow_letters(system, points, letters, dwell, step, with_matrices=True)
    g = np.zeros((points.shape[0], system.state_dim + 1))
    ok = ~esc
    if ok.any():
        g[ok] = log_singular_cumsums(D[ok])
    return g, kappa_from_cumsums(g), esc


def build_transition_graph(system: ControlSystem, grid: GridPartition, dwell: float,
                           epsilon: float = 0.0, samples_per_cell: int = 2,
                           step: Optional[float] = None, weights: bool = True) -> TransitionGraph:
    """Cells are nodes; an edge i -> j labelled by letter l exists when the
    sup-norm epsilon-ball around the time-``dwell`` image of a sample point
    of cell i under the constant control l meets cell j."""
    if dwell <= 0:
        raise ValueError("dwell must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    step = step or min(dwell, 0.01)
    letters = system.control_range.letters
    L = letters.shape[0]
    idx = np.arange(grid.n_cells)
    pts = grid.sample_points(idx, samples_per_cell)
    S = pts.shape[1]
    flat = pts.reshape(-1, grid.dim)
    cell_of_row = np.repeat(idx, S)
    srcs, dsts, labs = [], [], []
    loss = 0
    for li in range(L):
        U = np.broadcast_to(letters[li], (flat.shape[0], letters.shape[1]))
        X, _, esc = flow_letters(system, flat, U, dwell, step)
        loss += int(esc.sum())
        good = np.flatnonzero(~esc)
        rows, cells = _ball_cells(grid, X[good], epsilon)
        hit = np.zeros(good.size, dtype=bool)
        hit[rows] = True
        loss += int((~hit).sum())
        srcs.append(cell_of_row[good[rows]])
        dsts.append(cells)
        labs.append(np.full(rows.size, li))
    src = np.concatenate(srcs)
    dst = np.concatenate(dsts)
    lab = np.concatenate(labs)
    key = (src * grid.n_cells + dst) * L + lab
    _, first = np.unique(key, return_index=True)
    src, dst, lab = src[first], dst[first], lab[first]

    d = system.state_dim
    wg = np.zeros((src.size, d + 1))
    wk = np.zeros(src.size)
    if weights and src.size:
        centers = grid.centers(idx)
        C = np.repeat(centers, L, axis=0)
        U = np.tile(letters, (grid.n_cells, 1))
        g, k, esc = edge_weights(system, C, U, dwell, step)
        pair = src * L + lab
        wg, wk = g[pair], k[pair]
        bad = esc[pair]
        if bad.any():
            # centre escaped but a corner stayed: weight from the first surviving sample
            log.debug("%d edges weighted away from the cell centre", int(bad.sum()))
            alt = grid.sample_points(src[bad], samples_per_cell)[:, -1]
            g2, k2, _ = edge_weights(system, alt, letters[lab[bad]], dwell, step)
            wg[bad], wk[bad] = g2, k2
    log.info("graph: %d cells, %d edges, eps=%.4g, boundary loss %d", grid.n_cells, src.size,
             epsilon, loss)
    return TransitionGraph(grid, float(dwell), float(epsilon), letters.copy(), src, dst, lab, wg,
                           wk, loss, samples_per_cell, step)


def default_chain_epsilon(grid: GridPartition) -> float:
    return 1.5 * grid.diag


def reachable_set(graph: TransitionGraph, start: CellSet, max_hops=None) -> CellSet:
    """Forward BFS closure from ``start`` within ``max_hops`` edges (None = unbounded)."""
    if len(start) == 0:
        raise EmptyInput("start set is empty")
    order, starts = graph.successors()
    seen = start.mask(graph.grid)
    frontier = deque((int(c), 0) for c in start.cells)
    limit = math.inf if max_hops is None else max_hops
    while frontier:
        c, h = frontier.popleft()
        if h >= limit:
            continue
        for e in order[starts[c]:starts[c + 1]]:
            t = int(graph.dst[e])
            if not seen[t]:
                seen[t] = True
                frontier.append((t, h + 1))
    return CellSet(np.flatnonzero(seen), "reachable")


def nontrivial_sccs(graph: TransitionGraph):
    n = graph.grid.n_cells
    if graph.n_edges == 0:
        return []
    _, labels = connected_components(graph.adjacency(), directed=True, connection="strong")
    sizes = np.bincount(labels, minlength=labels.max() + 1)
    selfloop = np.zeros(n, dtype=bool)
    selfloop[graph.src[graph.src == graph.dst]] = True
    keep = (sizes[labels] > 1) | selfloop
    comps = {}
    for c in np.flatnonzero(keep):
        comps.setdefault(labels[c], []).append(c)
    return sorted((np.array(v) for v in comps.values()), key=lambda a: int(a.min()))


def control_sets(graph_exact: TransitionGraph) -> list:
    """Nontrivial strongly connected components of the (near) exact graph."""
    if graph_exact.epsilon > graph_exact.grid.cell_width * (1 + 1e-12):
        log.warning("control_sets called on a graph fattened beyond one cell width")
    comps = nontrivial_sccs(graph_exact)
    if not comps:
        raise EmptyResult("no nontrivial strongly connected component: grid too coarse "
                          "or no control set in the box")
    return [CellSet(c, "control_set") for c in comps]


def chain_control_sets(graph_fattened: TransitionGraph) -> list:
    comps = nontrivial_sccs(graph_fattened)
    if not comps:
        raise EmptyResult("no nontrivial chain-recurrent component in the fattened graph")
    return [CellSet(c, "chain_control_set") for c in comps]


def one_sided_deviation(A: CellSet, B: CellSet, grid: GridPartition) -> float:
    """sup over a in A of dist(a, B), on cell centres."""
    if len(A) == 0 or len(B) == 0:
        raise EmptyInput("cell sets must be nonempty")
    d, _ = cKDTree(B.centers(grid)).query(A.centers(grid))
    return float(d.max())


def hausdorff_distance(A: CellSet, B: CellSet, grid: GridPartition) -> float:
    return max(one_sided_deviation(A, B, grid), one_sided_deviation(B, A, grid))


def match_component(candidates, reference: CellSet) -> Optional[int]:
    """Index of the candidate with the largest cell overlap with ``reference``."""
    best, best_ov = None, 0
    for i, c in enumerate(candidates):
        ov = int(np.intersect1d(c.cells, reference.cells, assume_unique=True).size)
        if ov > best_ov:
            best, best_ov = i, ov
    return best


def no_return_violations(system: ControlSystem, grid: GridPartition, D: CellSet, dwell: float,
                         n_trials: int = 200, max_steps: int = 8, seed: int = 0,
                         inflate: int = 1, step: float = 0.01) -> float:
    """Fraction of sampled returns to D whose path leaves the inflated D.

    Trajectories start at random points of D-cells under random letter
    words; only those that end back in D are counted.
    """
    rng = np.random.default_rng(seed)
    letters = system.control_range.letters
    dmask = D.mask(grid)
    fat = dilate(D, grid, inflate).mask(grid)
    lo, hi = grid.bounds(rng.choice(D.cells, n_trials))
    X = lo + rng.random(lo.shape) * (hi - lo)
    inside = np.ones(n_trials, dtype=bool)

    def watch(Y):
        cells = grid.cell_of(np.nan_to_num(Y, nan=np.inf))
        inside[:] &= (cells >= 0) & fat[np.maximum(cells, 0)]

    returned = np.zeros(n_trials, dtype=bool)
    violated = np.zeros(n_trials, dtype=bool)
    for _ in range(max_steps):
        U = letters[rng.integers(0, letters.shape[0], n_trials)]
        X, _, _ = flow_letters(system, X, U, dwell, step, on_sample=watch)
        cells = grid.cell_of(np.nan_to_num(X, nan=np.inf))
        back = (cells >= 0) & dmask[np.maximum(cells, 0)]
        returned |= back
        violated |= back & ~inside
    n = int(returned.sum())
    return float(violated.sum()) / n if n else 0.0


def centers_csv(cells: CellSet, grid: GridPartition) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell"] + [f"x{i}" for i in range(grid.dim)])
    for c, x in zip(cells.cells, cells.centers(grid)):
        w.writerow([int(c)] + [repr(float(v)) for v in x])
    return buf.getvalue()
