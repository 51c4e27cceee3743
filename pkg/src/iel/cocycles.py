"""Batched evaluation of the unstable-determinant and exterior-norm cocycles.

Shared by graph construction (edge weights) and the spectra module.
For a fundamental matrix D with singular values s_1 >= ... >= s_d,

    gamma^k = log(s_1 ... s_k)          (k = 0..d, gamma^0 = 0)
    kappa   = max(0, max_k gamma^k)      (log+ of the norm on the full exterior algebra)
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def log_singular_cumsums(D: np.ndarray) -> np.ndarray:
    """(n, d, d) -> (n, d+1) array of log(s_1 ... s_k), k = 0..d."""
    s = np.linalg.svd(D, compute_uv=False)
    with np.errstate(divide="ignore"):
        logs = np.log(s)
    out = np.zeros((D.shape[0], D.shape[1] + 1))
    out[:, 1:] = np.cumsum(logs, axis=1)
    return out


def kappa_from_cumsums(g: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, g.max(axis=1))


def compound(A: np.ndarray, k: int) -> np.ndarray:
    """k-th multiplicative compound (matrix of k x k minors) of a square matrix."""
    d = A.shape[0]
    if k == 0:
        return np.ones((1, 1))
    idx = list(itertools.combinations(range(d), k))
    C = np.empty((len(idx), len(idx)))
    for a, rows in enumerate(idx):
        sub = A[list(rows)]
        for b, cols in enumerate(idx):
            C[a, b] = np.linalg.det(sub[:, list(cols)])
    return C


def compound_batch(A: np.ndarray, k: int) -> np.ndarray:
    """Row-wise :func:`compound` of an (n, d, d) stack."""
    n, d, _ = A.shape
    if k == 0:
        return np.ones((n, 1, 1))
    if k == 1:
        return A.copy()
    idx = [list(c) for c in itertools.combinations(range(d), k)]
    C = np.empty((n, len(idx), len(idx)))
    for a, rows in enumerate(idx):
        sub = A[:, rows]
        for b, cols in enumerate(idx):
            C[:, a, b] = np.linalg.det(sub[:, :, cols])
    return C


class CompoundAccumulator:
    """Running products of compound matrices with log-scale renormalisation.

    Keeps log ||wedge^k (D_n ... D_1)|| accurate for long horizons where the
    plain product would overflow and small singular values would be lost
    relative to large ones.
    """

    def __init__(self, d: int):
        self.d = d
        self.mats = [np.eye(math.comb(d, k)) for k in range(d + 1)]
        self.logscale = np.zeros(d + 1)

    def push(self, D: np.ndarray):
        for k in range(1, self.d + 1):
            M = compound(D, k) @ self.mats[k]
            nrm = np.linalg.norm(M, 2)
            if nrm == 0 or not np.isfinite(nrm):
                raise ArithmeticError("degenerate fundamental matrix")
            self.mats[k] = M / nrm
            self.logscale[k] += math.log(nrm)

    def log_norms(self) -> np.ndarray:
        """log ||wedge^k D|| = log(s_1 ... s_k) for k = 0..d."""
        out = np.zeros(self.d + 1)
        for k in range(1, self.d + 1):
            out[k] = self.logscale[k] + math.log(np.linalg.norm(self.mats[k], 2))
        return out
