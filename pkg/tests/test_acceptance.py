"""Acceptance suite: one check per numbered criterion.

Each check records (ok, detail) in RESULTS; the pytest summary (see
conftest.py) and ``python tests/test_acceptance.py`` print one PASS/FAIL
line per criterion. Reference values come from tests/oracles.py.
"""

from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from orbits import constructed_orbits  # noqa: E402

from iel.channel import (  # noqa: E402
    build_coder_controller,
    critical_rate_scan,
    sample_point_states,
    simulate_many,
    uniform_states_in,
)
from iel.cli import main as cli_main  # noqa: E402
from iel.cycle_ratio import howard  # noqa: E402
from iel.entropy import (  # noqa: E402
    build_spanning_set,
    entropy_from_counts,
    h_inv_spectral,
    subadditivity_violations,
)
from iel.errors import NoCycle  # noqa: E402
from iel.families import BUNDLES, bundle_doc, bundled  # noqa: E402
from iel.pipeline import PipelineConfig, run_pipeline  # noqa: E402
from iel.robustness import continuity_diagnostics, sweep  # noqa: E402
from iel.sets import (  # noqa: E402
    CellSet,
    GridPartition,
    build_transition_graph,
    chain_control_sets,
    control_sets,
)
from iel.spectra import cocycle_batch, floquet_exponent, gamma_cocycle  # noqa: E402
from iel.system import ControlSignal, signal_concat, signal_shift  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
RESULTS: dict = {}


def format_line(n: int, ok: bool, detail: str) -> str:
    return f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"


def record(n: int, ok: bool, detail: str) -> bool:
    RESULTS[n] = (bool(ok), detail)
    return bool(ok)


# --- 1: scalar spectral oracle ----------------------------------------------


def check_1() -> bool:
    ok, parts = True, []
    for a in (0.5, 1.0, 2.0):
        t0 = time.perf_counter()
        s = bundled("scalar_linear", params=[a], state_box={"lo": [-2 / a], "hi": [2 / a]})
        cfg = PipelineConfig(resolution=[400], dwell=0.05, chain_dwell=None)
        res = run_pipeline(s, cfg)
        h = h_inv_spectral(res.graph_chain, res.E, res.splitting)
        dt = time.perf_counter() - t0
        sel = res.graph_chain.subgraph_edges(res.E)
        w = res.graph_chain.weight_gamma[sel, 1]
        w_err = float(np.abs(w - a * res.graph_chain.dwell).max())
        case = abs(h - oracles.scalar_entropy(a)) <= 0.05 * a and dt <= 10.0 and w_err <= 1e-8
        ok &= case
        parts.append(f"a={a:g}: h={h:.4f} edge err {w_err:.1e} {dt:.1f}s")
    return record(1, ok, "; ".join(parts))


# --- 2: two-dimensional hyperbolic oracle -----------------------------------


def check_2() -> bool:
    s = bundled("diag_linear_2d")
    res = run_pipeline(s, PipelineConfig(resolution=[40, 40]))
    k = res.unstable_dim
    h = res.h_spectral
    g = gamma_cocycle(s, [0.0, 0.0], ControlSignal.constant([0.0, 0.0], 2.0), 2.0, 1)
    g_ref = oracles.log_singular_products(oracles.diag_fundamental(1.0, -1.0, 2.0))[1]
    ok = k == 1 and h is not None and abs(h - 1.0) <= 0.1 and abs(g - g_ref) <= 1e-4
    return record(2, ok, f"k={k} h={h:.4f} gamma_2={g:.6f} (oracle {g_ref:.6f})")


# --- 3: cocycle property suite ------------------------------------------------


def _rand_signal(rng, s, T):
    bp = [0.0]
    while bp[-1] < T:
        bp.append(bp[-1] + rng.uniform(0.05, 0.6))
    lo, hi = s.control_range.lo, s.control_range.hi
    return ControlSignal(np.array(bp), lo + rng.random((len(bp) - 1, len(lo))) * (hi - lo))


def check_3() -> bool:
    worst_res, viol, restr_ok = 0.0, 0, True
    for name in BUNDLES:
        s = bundled(name)
        rng = np.random.default_rng(1)
        n, d = 1000, s.state_dim
        c, w = (s.box_lo + s.box_hi) / 2, (s.box_hi - s.box_lo) / 4
        X = c + (rng.random((n, d)) * 2 - 1) * w
        T, S = rng.uniform(0, 1.5, n), rng.uniform(0, 1.5, n)
        U = [_rand_signal(rng, s, 3.0) for _ in range(n)]
        F = rng.normal(size=(n, d, 1))
        Xt, lA, gA, Ft = cocycle_batch(s, X, U, T, 1e-2, F)
        _, lB, gB, _ = cocycle_batch(s, Xt, [signal_shift(u, t) for u, t in zip(U, T)], S,
                                     1e-2, Ft)
        _, lC, gC, _ = cocycle_batch(s, X, U, T + S, 1e-2, F)
        worst_res = max(worst_res, float(np.abs(gC - gA - gB).max()))
        kA, kB, kC = (np.maximum(0.0, l.max(axis=1)) for l in (lA, lB, lC))
        viol += int((kC > kA + kB + 1e-8).sum())
        # kappa_t depends only on u restricted to [0, t]
        U2 = [signal_concat(u.restricted(t), _rand_signal(rng, s, 1.0)) if t > 0
              else _rand_signal(rng, s, 1.0) for u, t in zip(U, T)]
        _, lA2, _, _ = cocycle_batch(s, X, U2, T, 1e-2)
        restr_ok &= bool(np.array_equal(np.maximum(0.0, lA2.max(axis=1)), kA))
    orbits = constructed_orbits(20)
    floq = max(abs(floquet_exponent(s, o, "gamma") - floquet_exponent(s, o, "kappa"))
               for s, o in orbits)
    ok = worst_res <= 1e-6 and viol == 0 and restr_ok and len(orbits) == 20 and floq <= 1e-5
    return record(3, ok, f"gamma residual {worst_res:.1e}, kappa violations {viol}, "
                         f"restriction {'exact' if restr_ok else 'differs'}, "
                         f"{len(orbits)} orbits max Floquet gap {floq:.1e}")


# --- 4: cycle-ratio solver equivalence ---------------------------------------


def check_4() -> bool:
    rng = np.random.default_rng(2024)
    graphs = []
    while len(graphs) < 200:
        n = int(rng.integers(1, 9))
        m = int(rng.integers(n, 3 * n + 1))
        src, dst = rng.integers(0, n, m), rng.integers(0, n, m)
        w = rng.integers(-5, 6, m).astype(float)
        T = rng.integers(1, 4, m).astype(float)
        lo, hi = oracles.brute_cycle_ratios(n, list(zip(src.tolist(), dst.tolist(), w, T)))
        if lo is not None:
            graphs.append((n, src, dst, w, T, lo, hi))
    mismatches = 0
    t0 = time.perf_counter()
    for n, src, dst, w, T, lo, hi in graphs:
        try:
            got_lo = howard(n, src, dst, w, T).exact
            got_hi = howard(n, src, dst, w, T, maximize=True).exact
        except NoCycle:
            mismatches += 1
            continue
        mismatches += (got_lo != lo) + (got_hi != hi)
    dt = time.perf_counter() - t0
    return record(4, mismatches == 0 and dt <= 1.0,
                  f"{len(graphs)} graphs, {mismatches} mismatches, {dt:.2f}s")


# --- 5-7: spanning sets and the channel -------------------------------------

_SPAN: dict = {}


def scalar_spanning():
    """Greedy (tau,K)^Q-spanning sets for a = 1, tau = 1..6 (shared by 5-7)."""
    if not _SPAN:
        s = bundled("scalar_linear")
        g = GridPartition([-2.0], [2.0], (4000,))
        K = CellSet.from_box(g, [-0.5], [0.5], "K")
        Q = CellSet.from_box(g, [-1.0], [1.0], "Q")
        spans = {float(t): build_spanning_set(s, g, K, Q, float(t), 0.25, step=0.05)
                 for t in range(1, 7)}
        _SPAN.update(system=s, grid=g, K=K, Q=Q, spans=spans)
    return _SPAN


def check_5() -> bool:
    sp = scalar_spanning()
    counts = {t: len(v) for t, v in sp["spans"].items()}
    est = entropy_from_counts(counts)
    fekete_ok = 0.95 <= est.fekete <= 1.3
    # exhaustively minimised covers on a coarse instance
    s = sp["system"]
    g = GridPartition([-2.0], [2.0], (40,))
    K = CellSet.from_box(g, [-0.5], [0.5], "K")
    Q = CellSet.from_box(g, [-1.0], [1.0], "Q")
    exact = {t: len(build_spanning_set(s, g, K, Q, t, 0.25, exact=True))
             for t in (0.25, 0.5, 0.75, 1.0)}
    viol = subadditivity_violations(exact)
    ok = fekete_ok and len(K) <= 20 and not viol
    return record(5, ok, f"Fekete bound {est.fekete:.4f} from counts "
                         f"{list(counts.values())}; coarse exact counts "
                         f"{list(exact.values())} ({len(K)} K-cells), "
                         f"{len(viol)} subadditivity violations")


def check_6() -> bool:
    sp = scalar_spanning()
    s = sp["system"]
    all_pass = True
    for tau, span in sp["spans"].items():
        cc = build_coder_controller(span)
        all_pass &= bool(simulate_many(s, cc, sample_point_states(cc), 100).passed.all())
    taus = [1.0, 2.0, 3.0, 4.0]
    scan = critical_rate_scan(s, sp["grid"], sp["K"], sp["Q"], taus, 0.25, steps=100,
                              spanning=sp["spans"])
    best = min(scan, key=lambda r: r.rate_bits)
    target = oracles.data_rate_bits(oracles.scalar_entropy(1.0))
    ok = all_pass and abs(best.rate_bits - target) <= 0.5
    return record(6, ok, f"full covers pass from every sample: {all_pass}; best tau="
                         f"{best.tau:g} m={best.m_min} R={best.rate_bits:.4f} bits/time "
                         f"(target {target:.4f})")


def check_7() -> bool:
    sp = scalar_spanning()
    s = sp["system"]
    worst, parts = 1.0, []
    for tau in (1.0, 2.0, 3.0, 4.0):
        m = int(math.floor(2 ** (1.14 * tau)))
        cc = build_coder_controller(sp["spans"][tau].prefix(m))
        X0 = uniform_states_in(sp["K"], sp["grid"], 1000, seed=int(tau))
        fail = 1.0 - float(simulate_many(s, cc, X0, 50).passed.mean())
        worst = min(worst, fail)
        parts.append(f"tau={tau:g} m={m}: {100 * fail:.1f}% fail")
    return record(7, worst >= 0.99, "; ".join(parts))


# --- 8: robustness sweep -------------------------------------------------------


def check_8() -> bool:
    alphas = [round(0.5 + 0.05 * i, 10) for i in range(21)]
    t0 = time.perf_counter()
    rep = sweep(bundle_doc("scalar_linear"), alphas, 1.0, PipelineConfig(resolution=[500]),
                box=([-2.5], [2.5]), workers=4)
    dt = time.perf_counter() - t0
    diag = continuity_diagnostics(rep)
    grid, w = rep.grid, rep.grid.cell_width
    h_err = max(abs(r["h_spectral"] - r["alpha"]) if r["status"] == "ok" else math.inf
                for r in rep.records)
    d_err = 0.0
    for r in rep.records:
        lo, hi = grid.bounds(np.asarray(r["D"]))
        d_err = max(d_err, oracles.hausdorff_intervals((lo.min(), hi.max()),
                                                       (-1 / r["alpha"], 1 / r["alpha"])))
    step = 0.05
    analytic_mod = (1 / 0.5 - 1 / 0.55) / step
    mod_err = abs(diag.hausdorff_modulus_D - analytic_mod) * step
    ok = (h_err <= 0.07 and d_err <= 2 * w and mod_err <= 2 * w and diag.continuous
          and dt <= 300)
    return record(8, ok, f"max |h-alpha| {h_err:.1e}; max d_H(cl D, [-1/a,1/a]) "
                         f"{d_err / w:.2f} cells; modulus {diag.hausdorff_modulus_D:.3f} vs "
                         f"{analytic_mod:.3f}; jumps {len(diag.jumps)}; {dt:.0f}s")


# --- 9: set structure ------------------------------------------------------------


def check_9() -> bool:
    bad = []
    for name in BUNDLES:
        doc = bundle_doc(name)
        rg = doc["recommended_grid"]
        s = bundled(name)
        g = GridPartition.for_system(s, rg["resolution"])
        D = control_sets(build_transition_graph(s, g, rg["dwell"], 0.0, weights=False))
        for f in (0.25, 0.5, 1.5, 3.0):
            ge = build_transition_graph(s, g, rg["dwell"], f * g.diag, weights=False)
            Es = chain_control_sets(ge)
            for c in D:
                if not any(c.issubset(e) for e in Es):
                    bad.append(f"{name} eps={f:g}")
                    break
    s = bundled("bistable_1d")
    res = run_pipeline(s, PipelineConfig(resolution=[800]))
    n_chain = len(res.chain_sets)
    ok = not bad and n_chain == 3
    return record(9, ok, f"containment failures {bad or 'none'} over {len(BUNDLES)} bundles "
                         f"x 4 epsilons; bistable chain components {n_chain}")


# --- 10: reproducibility -----------------------------------------------------------


def check_10(tmp: Path) -> bool:
    doc = json.loads((ROOT / "configs" / "scalar.json").read_text())
    doc["channel"] = {"periods": 50, "n_states": 200}
    cfg = tmp / "run.json"
    cfg.write_text(json.dumps(doc))
    for out in ("a", "b"):
        for cmd in ("simulate", "spectrum", "entropy", "channel"):
            code = cli_main([cmd, "--config", str(cfg), "--out", str(tmp / out), "--seed", "11"])
            if code != 0:
                return record(10, False, f"{cmd} exited with {code}")
    names = sorted(p.name for p in (tmp / "a").iterdir())
    differ = [n for n in names if n != "manifest.json"
              and (tmp / "a" / n).read_bytes() != (tmp / "b" / n).read_bytes()]
    ma = json.loads((tmp / "a" / "manifest.json").read_text())
    mb = json.loads((tmp / "b" / "manifest.json").read_text())
    ma.pop("timestamp"), mb.pop("timestamp")
    same_names = names == sorted(p.name for p in (tmp / "b").iterdir())
    ok = same_names and not differ and ma == mb
    return record(10, ok, f"{len(names)} files, differing: {differ or 'none'}, manifests "
                          f"{'equal' if ma == mb else 'differ'} without timestamp")


# --- pytest entry points -------------------------------------------------------------


def test_criterion_1():
    assert check_1(), RESULTS[1][1]


def test_criterion_2():
    assert check_2(), RESULTS[2][1]


def test_criterion_3():
    assert check_3(), RESULTS[3][1]


def test_criterion_4():
    assert check_4(), RESULTS[4][1]


@pytest.mark.slow
def test_criterion_5():
    assert check_5(), RESULTS[5][1]


@pytest.mark.slow
def test_criterion_6():
    assert check_6(), RESULTS[6][1]


@pytest.mark.slow
def test_criterion_7():
    assert check_7(), RESULTS[7][1]


@pytest.mark.slow
def test_criterion_8():
    assert check_8(), RESULTS[8][1]


def test_criterion_9():
    assert check_9(), RESULTS[9][1]


def test_criterion_10(tmp_path):
    assert check_10(tmp_path), RESULTS[10][1]


if __name__ == "__main__":
    import tempfile

    checks = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9]
    for n, fn in enumerate(checks, 1):
        fn()
        print(format_line(n, *RESULTS[n]), flush=True)
    with tempfile.TemporaryDirectory() as d:
        check_10(Path(d))
    print(format_line(10, *RESULTS[10]))
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
