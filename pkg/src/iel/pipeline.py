"""The sets -> spectrum -> entropy pipeline for one parameter value.

Shared by the sweep and the command line. Two graphs are built: an exact
(epsilon = 0) graph at ``dwell`` for control sets, and an epsilon-fattened
graph at ``chain_dwell`` for chain control sets and the Morse spectrum.
A longer chain dwell keeps the chain sets from swelling where the flow is
slow (near repelling boundary equilibria).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .entropy import EntropyEstimate, build_spanning_set, default_K, entropy_from_counts
from .errors import IELError, NonHyperbolic
from .sets import (
    CellSet,
    GridPartition,
    TransitionGraph,
    build_transition_graph,
    chain_control_sets,
    control_sets,
    default_chain_epsilon,
    match_component,
    transfer,
)
from .spectra import (
    HyperbolicSplittingEstimate,
    SpectrumEstimate,
    morse_spectrum_bounds,
    splitting_for_component,
)
from .system import ControlSystem

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    resolution: list = field(default_factory=lambda: [400])
    dwell: float = 0.05
    chain_dwell: Optional[float] = 1.0
    epsilon: Optional[float] = None  # None: 1.5 x cell diagonal
    samples_per_cell: int = 2
    step: Optional[float] = None
    gap: float = 0.05
    splitting_horizon: float = 20.0
    min_cells: int = 2
    # spanning-set entropy (optional, expensive)
    spanning: bool = False
    taus: list = field(default_factory=lambda: [1.0, 2.0, 3.0])
    spanning_dwell: float = 0.25
    spanning_refine: int = 8
    spanning_step: Optional[float] = 0.05
    K: object = "eroded"
    Q: object = "D"
    candidate_depth: int = 2
    seeds_per_round: int = 32

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PipelineResult:
    grid: GridPartition
    control_sets: list
    chain_sets: list
    D: CellSet
    E: CellSet
    graph_exact: TransitionGraph
    graph_chain: TransitionGraph
    splitting: Optional[HyperbolicSplittingEstimate] = None
    spectrum: Optional[SpectrumEstimate] = None
    entropy: Optional[EntropyEstimate] = None
    spanning_sets: dict = field(default_factory=dict)
    K: Optional[CellSet] = None
    Q: Optional[CellSet] = None
    flags: list = field(default_factory=list)

    @property
    def h_spectral(self) -> Optional[float]:
        return None if self.spectrum is None else self.spectrum.lo

    @property
    def unstable_dim(self) -> Optional[int]:
        return None if self.splitting is None else self.splitting.unstable_dim


def select_component(comps, reference: Optional[CellSet], min_cells: int = 1) -> CellSet:
    """Largest component (at least ``min_cells`` when possible), or the one
    overlapping ``reference`` most."""
    big = [c for c in comps if len(c) >= min_cells] or comps
    if reference is not None:
        i = match_component(big, reference)
        if i is not None:
            return big[i]
    return max(big, key=lambda c: (len(c), -int(c.cells[0])))


def compute_sets(system: ControlSystem, cfg: PipelineConfig, grid: Optional[GridPartition] = None,
                 reference: Optional[CellSet] = None):
    grid = grid or GridPartition.for_system(system, cfg.resolution)
    g0 = build_transition_graph(system, grid, cfg.dwell, 0.0, cfg.samples_per_cell, cfg.step)
    Ds = control_sets(g0)
    D = select_component(Ds, reference, cfg.min_cells)
    eps = cfg.epsilon if cfg.epsilon is not None else default_chain_epsilon(grid)
    ge = build_transition_graph(system, grid, cfg.chain_dwell or cfg.dwell, eps,
                                cfg.samples_per_cell, cfg.step)
    Es = chain_control_sets(ge)
    i = match_component(Es, D)
    E = Es[i] if i is not None else select_component(Es, None, cfg.min_cells)
    return grid, g0, ge, Ds, Es, D, E


def choose_K(rule, D: CellSet, grid: GridPartition) -> CellSet:
    if rule in (None, "eroded"):
        return default_K(D, grid)
    if isinstance(rule, dict) and "box" in rule:
        return CellSet.from_box(grid, rule["box"]["lo"], rule["box"]["hi"], "K")
    if isinstance(rule, dict) and "scale" in rule:
        c = grid.centers(D.cells)
        mid = 0.5 * (c.min(axis=0) + c.max(axis=0))
        half = 0.5 * (c.max(axis=0) - c.min(axis=0)) * float(rule["scale"])
        return CellSet(np.intersect1d(CellSet.from_box(grid, mid - half, mid + half).cells,
                                      D.cells), "K")
    raise ValueError(f"unknown K rule {rule!r}")


def choose_Q(rule, D: CellSet, grid: GridPartition) -> CellSet:
    if rule in (None, "D"):
        return CellSet(D.cells, "Q")
    if isinstance(rule, dict) and "box" in rule:
        return CellSet.from_box(grid, rule["box"]["lo"], rule["box"]["hi"], "Q")
    raise ValueError(f"unknown Q rule {rule!r}")


def run_pipeline(system: ControlSystem, cfg: PipelineConfig, grid: Optional[GridPartition] = None,
                 reference: Optional[CellSet] = None) -> PipelineResult:
    """Sets, splitting and Morse spectrum; spanning entropy when enabled.

    NonHyperbolic is recorded in ``flags`` (the spectral value is then left
    unset) rather than raised.
    """
    grid, g0, ge, Ds, Es, D, E = compute_sets(system, cfg, grid, reference)
    res = PipelineResult(grid, Ds, Es, D, E, g0, ge)
    if (cfg.chain_dwell or cfg.dwell) != cfg.dwell and not D.issubset(E):
        # only guaranteed when both graphs share the dwell time
        res.flags.append("chain set does not contain the control set at this chain_dwell")
    try:
        res.splitting, _ = splitting_for_component(system, grid, E, cfg.splitting_horizon,
                                                   cfg.gap)
        res.spectrum = morse_spectrum_bounds(ge, E, "gamma", res.splitting.unstable_dim)
    except NonHyperbolic as exc:
        res.flags.append(f"NonHyperbolic: {exc}")
        res.splitting = getattr(exc, "estimate", None)
    if cfg.spanning:
        fine = grid.refine(cfg.spanning_refine)
        K = transfer(choose_K(cfg.K, D, grid), grid, fine)
        Q = transfer(choose_Q(cfg.Q, D, grid), grid, fine)
        res.K, res.Q = K, Q
        counts = {}
        for tau in cfg.taus:
            sp = build_spanning_set(system, fine, K, Q, tau, cfg.spanning_dwell,
                                    candidate_depth=cfg.candidate_depth,
                                    seeds_per_round=cfg.seeds_per_round,
                                    step=cfg.spanning_step)
            res.spanning_sets[tau] = sp
            counts[tau] = len(sp)
        res.entropy = entropy_from_counts(counts)
    return res


def weight_error_bar(system: ControlSystem, graph: TransitionGraph, component: CellSet,
                     k: int) -> float:
    """Largest change of a gamma edge rate (weight / duration) across the
    sample points of its source cell: how much a single edge weight can be
    off because it is evaluated at the cell centre only."""
    from .sets import edge_weights

    sel = graph.subgraph_edges(component)
    if sel.size == 0:
        return 0.0
    src, lab = graph.src[sel], graph.letter[sel]
    pairs = np.unique(src * graph.letters.shape[0] + lab)
    cells, letters = pairs // graph.letters.shape[0], pairs % graph.letters.shape[0]
    pts = graph.grid.sample_points(cells, graph.samples_per_cell)
    S = pts.shape[1]
    g, _, esc = edge_weights(system, pts.reshape(-1, graph.grid.dim),
                             np.repeat(graph.letters[letters], S, axis=0), graph.dwell,
                             graph.step)
    w = g[:, k].reshape(-1, S)
    w[esc.reshape(-1, S)] = np.nan
    spread = np.nanmax(np.abs(w - w[:, :1]), axis=1)
    return float(np.nanmax(spread) / graph.dwell) if np.isfinite(spread).any() else 0.0
