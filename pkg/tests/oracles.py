"""Independent reference values used by the tests.

Nothing here imports the package: closed forms for the linear examples and
a brute-force cycle enumerator written from scratch.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


# --- scalar x' = a x + b u, u in [-1, 1] -----------------------------------


def scalar_flow(a: float, x0: float, c: float, t: float, b: float = 1.0) -> float:
    """Solution under the constant control c."""
    if a == 0:
        return x0 + b * c * t
    return math.exp(a * t) * (x0 + b * c / a) - b * c / a


def scalar_control_set(a: float, b: float = 1.0):
    """Closure of the control set of x' = a x + b u (a > 0): [-|b|/a, |b|/a]."""
    return -abs(b) / a, abs(b) / a


def scalar_entropy(a: float) -> float:
    """Invariance entropy of the scalar example in nats/time (= a for a > 0)."""
    return max(a, 0.0)


def data_rate_bits(h_nats: float) -> float:
    return h_nats / math.log(2)


# --- x' = diag(a1, a2) x + u ------------------------------------------------


def diag_fundamental(a1: float, a2: float, t: float) -> np.ndarray:
    return np.diag([math.exp(a1 * t), math.exp(a2 * t)])


def log_singular_products(M: np.ndarray):
    """[0, log s1, log s1 s2, ...] from a dense SVD."""
    s = np.linalg.svd(M, compute_uv=False)
    return np.concatenate([[0.0], np.cumsum(np.log(s))])


# --- bistable x' = a x - x^3 + g u -------------------------------------------


def bistable_equilibria(a: float, g: float, u: float):
    r = np.roots([-1.0, 0.0, a, g * u])
    return np.sort(r[np.abs(r.imag) < 1e-12].real)


# --- cycle ratios by depth-first enumeration ---------------------------------


def brute_cycle_ratios(n, edges):
    """(min, max) cycle ratio over all simple cycles as Fractions.

    ``edges`` is a list of (src, dst, weight, duration); parallel edges are
    distinct. Each simple cycle is enumerated once from its smallest node.
    """
    out = {u: [] for u in range(n)}
    for e, (u, v, w, T) in enumerate(edges):
        out[u].append(e)
    best_lo = best_hi = None

    def visit(start, node, on_path, w_sum, t_sum):
        nonlocal best_lo, best_hi
        for e in out[node]:
            _, v, w, T = edges[e]
            if v == start:
                r = (w_sum + Fraction(w)) / (t_sum + Fraction(T))
                best_lo = r if best_lo is None or r < best_lo else best_lo
                best_hi = r if best_hi is None or r > best_hi else best_hi
            elif v > start and v not in on_path:
                on_path.add(v)
                visit(start, v, on_path, w_sum + Fraction(w), t_sum + Fraction(T))
                on_path.discard(v)

    for s in range(n):
        visit(s, s, {s}, Fraction(0), Fraction(0))
    return best_lo, best_hi


def hausdorff_intervals(a, b) -> float:
    """Hausdorff distance between closed intervals a = (lo, hi), b = (lo, hi)."""
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))
