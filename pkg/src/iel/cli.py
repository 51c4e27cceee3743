"""Command-line entry point.

Every artifact embeds the tool version, the full config hash and the hash
of the config sections its stage depends on. Only ``manifest.json``
carries a timestamp, so reruns with the same config and seed reproduce all
other files byte for byte.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (
    build_coder_controller,
    critical_rate_scan,
    rate_table_csv,
    replay,
    sample_point_states,
    simulate_many,
    simulate_networked,
    uniform_states_in,
)
from .config import RunConfig
from .entropy import (
    SpanningSet,
    build_spanning_set,
    entropy_from_counts,
    reconcile,
)
from .errors import ConfigInvalid, IELError, NoPass, NonHyperbolic
from .pipeline import choose_K, choose_Q, compute_sets, run_pipeline, weight_error_bar
from .robustness import continuity_diagnostics, sweep
from .sets import transfer
from .system import ControlSignal, integrate

log = logging.getLogger("iel")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_default) + "\n"


class Artifacts:
    """Writes stage outputs into one directory and records them in a manifest."""

    def __init__(self, out: Path, cfg: RunConfig, command: str):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.command = command
        self.files = {}

    def meta(self, stage: str) -> dict:
        return {"tool": "iel", "version": __version__, "command": self.command,
                "config_hash": self.cfg.hash(), "inputs_hash": self.cfg.hash(stage),
                "seed": self.cfg["seed"]}

    def _write(self, name: str, text: str):
        (self.out / name).write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()
        log.info("wrote %s", self.out / name)

    def json(self, name: str, stage: str, payload: dict):
        self._write(name, dumps({"meta": self.meta(stage), **payload}))

    def csv(self, name: str, text: str):
        self._write(name, f"# iel {__version__} config {self.cfg.hash()}\n" + text)

    def text(self, name: str, text: str):
        self._write(name, text)

    def finish(self, status: str = "ok"):
        # the output directory is left out so reruns elsewhere compare equal
        snap = self.cfg.snapshot()
        snap.pop("output", None)
        self.json("config.snapshot.json", self.command, {"config": snap})
        manifest = {
            "tool": "iel",
            "version": __version__,
            "command": self.command,
            "config_hash": self.cfg.hash(),
            "status": status,
            "files": dict(sorted(self.files.items())),
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        (self.out / "manifest.json").write_text(dumps(manifest))


# --- stages ----------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, art: Artifacts, args) -> int:
    system = cfg.system()
    s = cfg["simulate"]
    if s["x0"] is not None:
        X0 = np.asarray(s["x0"], dtype=float).reshape(-1, system.state_dim)
    else:
        rng = np.random.default_rng(cfg["seed"])
        X0 = system.box_lo + rng.random((s["n_random"], system.state_dim)) * (
            system.box_hi - system.box_lo)
    u = ControlSignal.from_letters(np.asarray(s["control"], float), s["dwell"], periodic=True)
    buf = io.StringIO()
    buf.write(",".join(["run", "t"] + [f"x{i}" for i in range(system.state_dim)]) + "\n")
    finals = []
    for r, x0 in enumerate(X0):
        tr = integrate(system, x0, u, s["horizon"], s["step"])
        for t, x in zip(tr.times, tr.states):
            buf.write(",".join([str(r), repr(float(t))] + [repr(float(v)) for v in x]) + "\n")
        finals.append(tr.final.tolist())
    art.csv("trajectory.csv", buf.getvalue())
    art.json("trajectory.json", "simulate", {"x0": X0.tolist(), "final": finals,
                                             "horizon": s["horizon"]})
    return 0


def _sets_payload(grid, Ds, Es, D, E, cfg):
    def index(comps, c):
        return next(i for i, x in enumerate(comps) if x is c)

    return {
        "grid": grid.to_dict(),
        "dwell": cfg["grid"]["dwell"],
        "chain_dwell": cfg["grid"]["chain_dwell"],
        "epsilon": cfg["grid"]["epsilon"] if cfg["grid"]["epsilon"] is not None
        else 1.5 * grid.diag,
        "control_sets": [c.cells.tolist() for c in Ds],
        "chain_sets": [c.cells.tolist() for c in Es],
        "D_index": index(Ds, D),
        "E_index": index(Es, E),
    }


def _components_csv(comps, grid) -> str:
    buf = io.StringIO()
    buf.write(",".join(["component", "cell"] + [f"x{i}" for i in range(grid.dim)]) + "\n")
    for j, c in enumerate(comps):
        for cell, x in zip(c.cells, c.centers(grid)):
            buf.write(",".join([str(j), str(int(cell))] + [repr(float(v)) for v in x]) + "\n")
    return buf.getvalue()


def _write_sets(art, cfg, grid, Ds, Es, D, E):
    art.json("sets.json", "sets", _sets_payload(grid, Ds, Es, D, E, cfg))
    art.csv("control_sets.csv", _components_csv(Ds, grid))
    art.csv("chain_sets.csv", _components_csv(Es, grid))


def cmd_sets(cfg: RunConfig, art: Artifacts, args) -> int:
    system = cfg.system()
    grid, _, _, Ds, Es, D, E = compute_sets(system, cfg.pipeline_config())
    _write_sets(art, cfg, grid, Ds, Es, D, E)
    return 0


def cmd_spectrum(cfg: RunConfig, art: Artifacts, args) -> int:
    system = cfg.system()
    res = run_pipeline(system, cfg.pipeline_config())
    _write_sets(art, cfg, res.grid, res.control_sets, res.chain_sets, res.D, res.E)
    payload = {
        "status": "ok" if res.spectrum is not None else "NonHyperbolic",
        "flags": res.flags,
        "splitting": None if res.splitting is None else res.splitting.to_dict(),
        "spectrum": None if res.spectrum is None else res.spectrum.to_dict(),
    }
    if res.spectrum is not None:
        payload["h_spectral"] = res.spectrum.lo
        payload["h_spectral_bits"] = res.spectrum.lo / math.log(2)
        payload["error_bar"] = weight_error_bar(system, res.graph_chain, res.E,
                                                res.splitting.unstable_dim)
    art.json("spectrum.json", "spectrum", payload)
    if res.spectrum is None:
        raise NonHyperbolic("; ".join(res.flags) or "splitting not certified")
    return 0


def _compute_entropy(cfg: RunConfig, art: Artifacts):
    system = cfg.system()
    e = cfg["entropy"]
    grid, _, _, Ds, Es, D, E = compute_sets(system, cfg.pipeline_config())
    fine = grid.refine(e["refine"])
    K = transfer(choose_K(e["K"], D, grid), grid, fine)
    Q = transfer(choose_Q(e["Q"], D, grid), grid, fine)
    spans = {}
    for tau in e["taus"]:
        spans[float(tau)] = build_spanning_set(
            system, fine, K, Q, tau, e["dwell"], candidate_depth=e["candidate_depth"],
            seeds_per_round=e["seeds_per_round"], samples_per_cell=e["samples_per_cell"],
            step=e["step"], exact=e["exact"])
    est = None
    if len(spans) >= 3:
        est = entropy_from_counts({t: len(s) for t, s in spans.items()},
                                  "exact" if e["exact"] else "greedy")
    payload = {
        "estimate": None if est is None else est.to_dict(),
        "counts": {repr(t): len(s) for t, s in spans.items()},
        "spanning_sets": [s.to_dict() for s in spans.values()],
    }
    spec_path = art.out / "spectrum.json"
    if est is not None and spec_path.exists():
        spec = json.loads(spec_path.read_text())
        if spec["meta"]["inputs_hash"] == cfg.hash("spectrum") and spec.get("h_spectral"):
            payload["reconciliation"] = reconcile(est, spec["h_spectral"],
                                                  cfg["tolerances"]["reconcile"]).to_dict()
    art.json("entropy.json", "entropy", payload)
    if est is not None:
        art.csv("entropy.csv", est.to_csv())
    return spans


def cmd_entropy(cfg: RunConfig, art: Artifacts, args) -> int:
    _compute_entropy(cfg, art)
    return 0


def _load_spanning(cfg: RunConfig, art: Artifacts):
    """Reuse entropy.json when it was produced from the same inputs."""
    path = art.out / "entropy.json"
    if path.exists():
        doc = json.loads(path.read_text())
        if doc.get("meta", {}).get("inputs_hash") == cfg.hash("entropy"):
            log.info("reusing spanning sets from %s", path)
            art.files["entropy.json"] = hashlib.sha256(path.read_bytes()).hexdigest()
            return {float(s["tau"]): SpanningSet.from_dict(s) for s in doc["spanning_sets"]}
    return _compute_entropy(cfg, art)


def cmd_channel(cfg: RunConfig, art: Artifacts, args) -> int:
    system = cfg.system()
    c, tol = cfg["channel"], cfg["tolerances"]
    spans = _load_spanning(cfg, art)
    rows = []
    for j, (tau, sp) in enumerate(sorted(spans.items())):
        cc = build_coder_controller(sp)
        samples = simulate_many(system, cc, sample_point_states(cc), c["periods"])
        X0 = uniform_states_in(cc.K, cc.grid, c["n_states"], cfg["seed"] + j)
        rand = simulate_many(system, cc, X0, c["periods"], seed=cfg["seed"] + j)
        art.csv(f"runs_tau{tau:g}.csv", rand.to_csv())
        replay_ok = True
        lines = []
        for i in range(min(c["transcripts"], len(X0))):
            tr = simulate_networked(system, cc, X0[i], c["periods"], seed=cfg["seed"] + j)
            replay_ok &= replay(system, cc, tr, tol["replay"]).ok
            lines.append(tr.to_jsonl())
        if lines:
            art.text(f"transcripts_tau{tau:g}.jsonl", "".join(lines))
        rows.append({
            "tau": tau,
            "alphabet_size": cc.alphabet_size,
            "rate_bits": cc.rate_bits,
            "rate_nats": cc.rate_bits * math.log(2),
            "complete": cc.complete,
            "sample_points": int(samples.passed.size),
            "sample_pass_rate": float(samples.passed.mean()),
            "random_pass_rate": float(rand.passed.mean()),
            "replay_ok": bool(replay_ok),
        })
    passing = [r for r in rows if r["sample_pass_rate"] == 1.0]
    payload = {"controllers": rows,
               "best": min(passing, key=lambda r: r["rate_bits"]) if passing else None}
    if c["scan"] and passing:
        any_sp = next(iter(spans.values()))
        scan = critical_rate_scan(system, any_sp.grid, any_sp.K, any_sp.Q, sorted(spans),
                                  any_sp.dwell, budgets=c["budgets"], steps=c["periods"],
                                  spanning=spans)
        art.csv("rate_scan.csv", rate_table_csv(scan))
        payload["rate_scan"] = [r.__dict__ for r in scan]
    art.json("channel.json", "channel", payload)
    if not passing:
        raise NoPass("no coder-controller passed from every K sample point")
    return 0


def cmd_sweep(cfg: RunConfig, art: Artifacts, args) -> int:
    s = cfg["sweep"]
    box = None if s["box"] is None else (s["box"]["lo"], s["box"]["hi"])
    rep = sweep(cfg.system_doc, cfg.alphas(), s["alpha0"], cfg.pipeline_config(s["spanning"]),
                s["param_index"], box, workers=args.workers)
    art.json("sweep.json", "sweep", {"report": rep.to_dict()})
    art.csv("sweep.csv", rep.to_csv())
    if len(rep.records) >= 3:
        diag = continuity_diagnostics(rep, s["semicontinuity_tol"],
                                      jump_factor=cfg["tolerances"]["jump_factor"])
        art.json("continuity.json", "sweep", {"diagnostics": diag.to_dict()})
    return 0


def cmd_validate(cfg: RunConfig, art: Artifacts, args) -> int:
    cfg.system()
    print(f"valid; config hash {cfg.hash()}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "sets": cmd_sets,
    "spectrum": cmd_spectrum,
    "entropy": cmd_entropy,
    "channel": cmd_channel,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iel", description="Invariance entropy lab.")
    p.add_argument("--version", action="version", version=f"iel {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="RunConfig JSON file")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--resolution", type=int, default=None,
                        help="cells per axis (overrides config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("IEL_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    art = None
    try:
        cfg = RunConfig.load(args.config).override(seed=args.seed, resolution=args.resolution,
                                                    output=args.out)
        if args.command == "validate":
            return cmd_validate(cfg, None, args)
        art = Artifacts(Path(cfg["output"]), cfg, args.command)
        code = COMMANDS[args.command](cfg, art, args)
        art.finish()
        return code
    except IELError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        if art is not None:
            art.finish(type(exc).__name__)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"ConfigInvalid: {exc}", file=sys.stderr)
        return ConfigInvalid.exit_code


if __name__ == "__main__":
    sys.exit(main())
