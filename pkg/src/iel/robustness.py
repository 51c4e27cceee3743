"""Parameter sweeps of the full pipeline and continuity diagnostics.

All parameter values share one spatial grid so that Hausdorff distances
between their sets are comparable. The reference value runs first; every
other value matches its control set to the reference by overlap.
"""

from __future__ import annotations

import copy
import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import IELError, InsufficientData, ReferenceFailed
from .families import system_from_dict
from .pipeline import PipelineConfig, run_pipeline, weight_error_bar
from .sets import CellSet, GridPartition, hausdorff_distance
from .spectra import replay_witness

log = logging.getLogger(__name__)


@dataclass
class SweepReport:
    system: dict
    param_index: int
    alphas: list
    alpha0: float
    grid: GridPartition
    records: list  # one dict per alpha, in grid order
    config: dict = field(default_factory=dict)

    def record(self, alpha) -> dict:
        return self.records[int(np.argmin(np.abs(np.array(self.alphas) - alpha)))]

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "param_index": self.param_index,
            "alphas": list(self.alphas),
            "alpha0": self.alpha0,
            "grid": self.grid.to_dict(),
            "config": self.config,
            "records": self.records,
        }

    @classmethod
    def from_dict(cls, doc) -> "SweepReport":
        return cls(doc["system"], doc["param_index"], doc["alphas"], doc["alpha0"],
                   GridPartition.from_dict(doc["grid"]), doc["records"], doc.get("config", {}))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "status", "h_spectral", "h_spectral_bits", "h_spanning",
                    "d_H_D_ref", "d_H_E_ref", "k", "lambda", "c", "morse_lo", "morse_hi",
                    "err_bar", "flags"])

        def f(v):
            return "" if v is None else repr(float(v))

        for r in self.records:
            h = r.get("h_spectral")
            w.writerow([repr(float(r["alpha"])), r["status"], f(h),
                        f(None if h is None else h / math.log(2)), f(r.get("h_spanning")),
                        f(r.get("d_H_D_ref")), f(r.get("d_H_E_ref")),
                        "" if r.get("k") is None else r["k"], f(r.get("lambda")), f(r.get("c")),
                        f(r.get("morse_lo")), f(r.get("morse_hi")), f(r.get("err_bar")),
                        ";".join(r.get("flags", []))])
        return buf.getvalue()


def _doc_at(doc: dict, param_index: int, alpha: float, box) -> dict:
    d = copy.deepcopy(doc)
    params = list(d.get("params", []))
    params[param_index] = float(alpha)
    d["params"] = params
    if box is not None:
        d["state_box"] = {"lo": list(box[0]), "hi": list(box[1])}
    return d


def _point(args) -> dict:
    """Pipeline at one parameter value (runs in a worker process)."""
    doc, param_index, alpha, cfg_dict, grid_dict, ref_cells = args
    cfg = PipelineConfig(**cfg_dict)
    grid = GridPartition.from_dict(grid_dict)
    system = system_from_dict(_doc_at(doc, param_index, alpha, (grid.lo, grid.hi)))
    ref = None if ref_cells is None else CellSet(np.asarray(ref_cells, dtype=np.int64))
    rec = {"alpha": float(alpha), "status": "ok", "flags": []}
    try:
        res = run_pipeline(system, cfg, grid, ref)
    except IELError as exc:
        rec.update(status=type(exc).__name__, flags=[str(exc)])
        return rec
    rec.update(
        D=res.D.cells.tolist(),
        E=res.E.cells.tolist(),
        n_control_sets=len(res.control_sets),
        n_chain_sets=len(res.chain_sets),
        flags=list(res.flags),
    )
    sp = res.splitting
    if sp is not None:
        rec.update(k=sp.unstable_dim, hyperbolic=sp.hyperbolic, **{"lambda": sp.lam, "c": sp.c})
    if res.spectrum is None:
        rec["status"] = "NonHyperbolic"
        rec["h_spectral"] = None
    else:
        rec.update(
            h_spectral=res.spectrum.lo,
            morse_lo=res.spectrum.lo,
            morse_hi=res.spectrum.hi,
            witness=res.spectrum.witnesses["lo"],
            graph_step=res.graph_chain.step,
            err_bar=weight_error_bar(system, res.graph_chain, res.E, sp.unstable_dim),
        )
    if res.entropy is not None:
        rec.update(h_spanning=res.entropy.fekete, h_spanning_slope=res.entropy.h,
                   spanning_counts=res.entropy.counts.tolist())
    return rec


def sweep(doc: dict, alphas, alpha0: float, cfg: PipelineConfig, param_index: int = 0,
          box=None, workers: int = 1) -> SweepReport:
    """Full pipeline on every alpha; per-alpha failures are recorded.

    ``box`` (lo, hi) is the shared working box; by default the document's.
    Raises ReferenceFailed if the pipeline fails at ``alpha0``.
    """
    alphas = sorted(float(a) for a in alphas)
    if not any(abs(a - alpha0) < 1e-12 for a in alphas):
        alphas = sorted(alphas + [float(alpha0)])
    if box is None:
        sb = doc["state_box"]
        box = (sb["lo"], sb["hi"]) if isinstance(sb, dict) else tuple(sb)
    lo = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    grid = GridPartition(lo, hi, tuple(np.broadcast_to(np.atleast_1d(cfg.resolution), lo.shape)))
    cfg_dict = cfg.to_dict()
    ref = _point((doc, param_index, alpha0, cfg_dict, grid.to_dict(), None))
    if ref["status"] != "ok":
        raise ReferenceFailed(f"pipeline failed at the reference alpha0={alpha0}: "
                              f"{ref['status']} {ref.get('flags')}")
    jobs = [(doc, param_index, a, cfg_dict, grid.to_dict(), ref["D"]) for a in alphas
            if abs(a - alpha0) >= 1e-12]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_point, jobs))
    else:
        out = [_point(j) for j in jobs]
    records = sorted(out + [ref], key=lambda r: r["alpha"])
    Dref, Eref = CellSet(ref["D"]), CellSet(ref["E"])
    for r in records:
        if "D" in r:
            r["d_H_D_ref"] = hausdorff_distance(CellSet(r["D"]), Dref, grid)
            r["d_H_E_ref"] = hausdorff_distance(CellSet(r["E"]), Eref, grid)
    return SweepReport(doc, param_index, alphas, float(alpha0), grid, records, cfg_dict)


def replay_record(report: SweepReport, rec: dict) -> float:
    """Recompute a record's spectral h from its stored witness cycle."""
    system = system_from_dict(_doc_at(report.system, report.param_index, rec["alpha"],
                                      (report.grid.lo, report.grid.hi)))
    return replay_witness(system, report.grid, rec["witness"], "gamma", rec["k"],
                          rec["graph_step"])


@dataclass
class ContinuityDiagnostics:
    hausdorff_modulus_D: float
    hausdorff_modulus_E: float
    entropy_modulus: float
    jumps: list
    semicontinuity: list
    usc_pass: bool
    lsc_pass: bool
    tol: float

    @property
    def continuous(self) -> bool:
        return not self.jumps

    def to_dict(self) -> dict:
        return dict(self.__dict__, continuous=self.continuous)


def _interval_dev(a, b) -> float:
    """sup over x in interval a of dist(x, interval b)."""
    return max(0.0, b[0] - a[0], a[1] - b[1])


def continuity_diagnostics(report: SweepReport, tol: float = 0.1, radius: int = 2,
                           jump_factor: float = 3.0) -> ContinuityDiagnostics:
    """Moduli of continuity and one-sided semicontinuity evidence.

    A jump at an interior alpha is a deviation of h from the chord through its
    two neighbours larger than ``jump_factor`` times the largest of the
    three single-alpha error bars (floored at 1e-6). Semicontinuity evidence
    uses the ``radius`` nearest alphas on each side of alpha0: the Morse
    interval at alpha must lie within the alpha0 interval inflated by
    ``tol`` (upper) and vice versa (lower).
    """
    recs = report.records
    if len(recs) < 3:
        raise InsufficientData("continuity diagnostics need at least 3 grid points")
    grid = report.grid
    a = np.array([r["alpha"] for r in recs])
    modD = modE = modH = 0.0
    for r1, r2 in zip(recs, recs[1:]):
        da = abs(r2["alpha"] - r1["alpha"])
        if "D" in r1 and "D" in r2:
            modD = max(modD, hausdorff_distance(CellSet(r1["D"]), CellSet(r2["D"]), grid) / da)
            modE = max(modE, hausdorff_distance(CellSet(r1["E"]), CellSet(r2["E"]), grid) / da)
        if r1.get("h_spectral") is not None and r2.get("h_spectral") is not None:
            modH = max(modH, abs(r2["h_spectral"] - r1["h_spectral"]) / da)
    jumps = []
    for i in range(1, len(recs) - 1):
        trio = recs[i - 1:i + 2]
        if any(r.get("h_spectral") is None for r in trio):
            continue
        t = (a[i] - a[i - 1]) / (a[i + 1] - a[i - 1])
        chord = (1 - t) * trio[0]["h_spectral"] + t * trio[2]["h_spectral"]
        dev = abs(trio[1]["h_spectral"] - chord)
        err = max(max(r.get("err_bar") or 0.0 for r in trio), 1e-6)
        if dev > jump_factor * err:
            jumps.append({"alpha": float(a[i]), "deviation": dev, "err_bar": err})
    i0 = int(np.argmin(np.abs(a - report.alpha0)))
    r0 = recs[i0]
    semi, usc, lsc = [], True, True
    if r0.get("morse_lo") is not None:
        I0 = (r0["morse_lo"], r0["morse_hi"])
        for j in range(max(0, i0 - radius), min(len(recs), i0 + radius + 1)):
            r = recs[j]
            if j == i0 or r.get("morse_lo") is None:
                continue
            I = (r["morse_lo"], r["morse_hi"])
            up, low = _interval_dev(I, I0), _interval_dev(I0, I)
            semi.append({"alpha": r["alpha"], "upper_dev": up, "lower_dev": low})
            usc &= up <= tol
            lsc &= low <= tol
    else:
        usc = lsc = False
    return ContinuityDiagnostics(modD, modE, modH, jumps, semi, bool(usc), bool(lsc), tol)
