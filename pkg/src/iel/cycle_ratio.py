"""Minimum / maximum cycle ratio on weighted directed multigraphs.

The ratio of a cycle is (sum of edge weights) / (sum of edge durations).
Two independent solvers are provided:

* :func:`howard` -- policy iteration in the style of Howard's algorithm for
  the cycle-ratio problem (value determination on the policy's functional
  graph, then a two-phase improvement step);
* :func:`enumerate_cycles` -- exhaustive simple-cycle enumeration, exact in
  rational arithmetic, used as an oracle and for tiny graphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NoCycle


@dataclass(frozen=True)
class CycleRatio:
    value: float
    exact: Fraction
    edges: tuple  # edge indices in traversal order, starting at the smallest node
    nodes: tuple
    method: str
    iterations: int = 0


def _frac_ratio(weights, durations, edges) -> Fraction:
    num = sum((Fraction(float(weights[e])) for e in edges), Fraction(0))
    den = sum((Fraction(float(durations[e])) for e in edges), Fraction(0))
    return num / den


def _canonical(edges, src):
    """Rotate an edge cycle so that it starts at its smallest source node."""
    nodes = [int(src[e]) for e in edges]
    k = min(range(len(edges)), key=lambda i: (nodes[i], edges[i]))
    edges = tuple(int(e) for e in edges[k:] + edges[:k])
    return edges, tuple(int(src[e]) for e in edges)


def _prune(n, src, dst):
    """Drop edges touching nodes that cannot lie on or lead to a cycle."""
    alive = np.ones(n, dtype=bool)
    keep = np.ones(src.size, dtype=bool)
    while True:
        outdeg = np.bincount(src[keep], minlength=n)
        dead = alive & (outdeg == 0)
        if not dead.any():
            return keep, alive
        alive &= ~dead
        keep &= alive[src] & alive[dst]


def howard(n: int, src, dst, weights, durations, maximize: bool = False,
           max_iter: int = 10_000) -> CycleRatio:
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    w_in = np.asarray(weights, dtype=float)
    T = np.asarray(durations, dtype=float)
    if np.any(T <= 0):
        raise ValueError("durations must be positive")
    w = -w_in if maximize else w_in
    keep, alive = _prune(n, src, dst)
    if not keep.any():
        raise NoCycle("graph has no directed cycle")
    eidx = np.flatnonzero(keep)
    order = eidx[np.lexsort((eidx, src[eidx]))]
    es, ed, ew, eT = src[order], dst[order], w[order], T[order]
    nodes = np.flatnonzero(alive)
    starts = np.searchsorted(es, nodes)

    # initial policy: best immediate ratio, lowest edge index on ties
    r = ew / eT
    pol = np.empty(n, dtype=np.int64)
    for i, v in enumerate(nodes):
        a = starts[i]
        b = starts[i + 1] if i + 1 < nodes.size else es.size
        pol[v] = a + int(np.argmin(r[a:b]))

    scale = max(1.0, float(np.abs(ew).max() / eT.min()))
    lam = np.zeros(n)
    dist = np.zeros(n)
    for it in range(1, max_iter + 1):
        cycles = _evaluate(nodes, pol, ed, ew, eT, lam, dist)
        # phase 1: move towards successors with a better cycle
        lam_dst = lam[ed]
        best = np.minimum.reduceat(lam_dst, starts)
        tol = 1e-12 * scale
        changed = False
        better = best < lam[nodes] - tol
        if better.any():
            for i in np.flatnonzero(better):
                a = starts[i]
                b = starts[i + 1] if i + 1 < nodes.size else es.size
                pol[nodes[i]] = a + int(np.argmax(lam_dst[a:b] == best[i]))
            changed = True
        else:
            val = ew - lam[es] * eT + dist[ed]
            val = np.where(lam_dst <= lam[es] + tol, val, np.inf)
            bval = np.minimum.reduceat(val, starts)
            dtol = 1e-10 * (scale + np.abs(dist[nodes]))
            better = bval < dist[nodes] - dtol
            if better.any():
                for i in np.flatnonzero(better):
                    a = starts[i]
                    b = starts[i + 1] if i + 1 < nodes.size else es.size
                    pol[nodes[i]] = a + int(np.argmax(val[a:b] == bval[i]))
                changed = True
        if not changed:
            break
    # witness: best cycle of the final policy, ties to the lexicographically smallest
    best_c = None
    for cyc in cycles:
        edges = [int(order[e]) for e in cyc]
        ex = _frac_ratio(w, T, edges)
        canon = _canonical(edges, src)
        key = (ex, canon[1], canon[0])
        if best_c is None or key < best_c[0]:
            best_c = (key, canon)
    ex = best_c[0][0]
    edges, cyc_nodes = best_c[1]
    if maximize:
        ex = -ex
    return CycleRatio(float(ex), ex, edges, cyc_nodes, "howard", it)


def _evaluate(nodes, pol, ed, ew, eT, lam, dist):
    """Value determination for a policy; returns the policy cycles (local edge ids)."""
    state = {}
    cycles = []
    for v0 in nodes:
        if v0 in state:
            continue
        path = []
        v = int(v0)
        while v not in state:
            state[v] = 1
            path.append(v)
            v = int(ed[pol[v]])
        if state[v] == 1:
            k = path.index(v)
            cyc = path[k:]
            ces = [pol[c] for c in cyc]
            lc = float(np.sum(ew[ces]) / np.sum(eT[ces]))
            h = min(cyc)
            j = cyc.index(h)
            ring = cyc[j:] + cyc[:j]
            lam[ring] = lc
            dist[h] = 0.0
            for c in reversed(ring[1:]):
                e = pol[c]
                nxt = int(ed[e])
                dist[c] = ew[e] - lc * eT[e] + dist[nxt]
            for c in ring:
                state[c] = 2
            cycles.append(ces)
            path = path[:k]
        for c in reversed(path):
            e = pol[c]
            nxt = int(ed[e])
            lam[c] = lam[nxt]
            dist[c] = ew[e] - lam[c] * eT[e] + dist[nxt]
            state[c] = 2
    return cycles


def simple_cycles(n: int, src, dst):
    """All simple cycles of a multigraph as edge-index lists (each parallel
    edge choice counted separately), each starting at its smallest node."""
    src = [int(s) for s in src]
    dst = [int(t) for t in dst]
    out_edges = [[] for _ in range(n)]
    for e, s in enumerate(src):
        out_edges[s].append(e)
    found = []
    for start in range(n):
        stack = [(start, iter(out_edges[start]))]
        on_path = {start}
        epath = []
        while stack:
            v, it = stack[-1]
            e = next(it, None)
            if e is None:
                stack.pop()
                on_path.discard(v)
                if epath:
                    epath.pop()
                continue
            t = dst[e]
            if t == start:
                found.append(epath + [e])
            elif t > start and t not in on_path:
                on_path.add(t)
                epath.append(e)
                stack.append((t, iter(out_edges[t])))
    return found


def enumerate_cycles(n: int, src, dst, weights, durations, maximize: bool = False) -> CycleRatio:
    cycles = simple_cycles(n, src, dst)
    if not cycles:
        raise NoCycle("graph has no directed cycle")
    src = np.asarray(src)
    best = None
    for c in cycles:
        ex = _frac_ratio(weights, durations, c)
        edges, nodes = _canonical(c, src)
        key = (-ex if maximize else ex, nodes, edges)
        if best is None or key < best:
            best = key
    ex = -best[0] if maximize else best[0]
    return CycleRatio(float(ex), ex, best[2], best[1], "enumeration", len(cycles))


def cycle_ratio(n: int, src, dst, weights, durations, maximize: bool = False,
                method: str = "auto") -> CycleRatio:
    """Dispatch: exhaustive enumeration for tiny graphs (< 12 nodes, <= 40
    edges), policy iteration otherwise."""
    if method == "auto":
        method = "enumeration" if n < 12 and len(src) <= 40 else "howard"
    if method == "enumeration":
        return enumerate_cycles(n, src, dst, weights, durations, maximize)
    if method == "howard":
        return howard(n, src, dst, weights, durations, maximize)
    raise ValueError(f"unknown method {method!r}")
