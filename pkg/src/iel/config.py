"""Run configuration: schema validation, defaults and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .errors import ConfigInvalid
from .families import bundle_doc, system_from_dict
from .pipeline import PipelineConfig

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "system_overrides": {},
    "grid": {
        "resolution": [400],
        "chain_dwell": 1.0,
        "epsilon": None,
        "samples_per_cell": 2,
        "step": None,
        "min_cells": 2,
    },
    "spectrum": {"gap": 0.05, "splitting_horizon": 20.0},
    "entropy": {
        "taus": [1.0, 2.0, 3.0],
        "dwell": 0.25,
        "refine": 8,
        "step": 0.05,
        "K": "eroded",
        "Q": "D",
        "candidate_depth": 2,
        "seeds_per_round": 32,
        "samples_per_cell": 2,
        "exact": False,
    },
    "channel": {"periods": 100, "n_states": 1000, "budgets": None, "scan": True,
                "transcripts": 3},
    "simulate": {"x0": None, "n_random": 5, "control": [[0.0]], "dwell": 1.0,
                 "horizon": 1.0, "step": 0.01},
    "sweep": {"param_index": 0, "alphas": {"start": 0.5, "stop": 1.5, "step": 0.05},
              "alpha0": 1.0, "box": None, "spanning": False, "semicontinuity_tol": 0.1},
    "tolerances": {"replay": 1e-4, "reconcile": 0.05, "jump_factor": 3.0},
    "seed": 0,
    "output": "out",
}

# config sections each stage's result depends on
STAGE_INPUTS = {
    "simulate": ("system", "system_overrides", "simulate", "seed"),
    "sets": ("system", "system_overrides", "grid"),
    "spectrum": ("system", "system_overrides", "grid", "spectrum"),
    "entropy": ("system", "system_overrides", "grid", "entropy"),
    "channel": ("system", "system_overrides", "grid", "entropy", "channel", "seed",
                "tolerances"),
    "sweep": ("system", "system_overrides", "grid", "spectrum", "entropy", "sweep",
              "tolerances"),
}


def schema() -> dict:
    return json.loads((resources.files("iel") / "schema" / "run_config.v1.json").read_text())


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate(doc) -> None:
    """Raise ConfigInvalid listing every violation as (JSON pointer, message)."""
    problems = []
    for err in Draft202012Validator(schema()).iter_errors(doc):
        path = list(err.absolute_path)
        if err.validator == "required":
            # name the missing field itself
            missing = [r for r in err.validator_value if r not in err.instance]
            for name in missing:
                problems.append((_pointer(path + [name]), "required field is missing"))
            continue
        problems.append((_pointer(path), err.message))
    if problems:
        raise ConfigInvalid(sorted(set(problems)))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("system",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


class RunConfig:
    """A validated configuration with every default filled in."""

    def __init__(self, doc: dict, base_dir: Path | None = None):
        validate(doc)
        self.raw = copy.deepcopy(doc)
        self.data = _merge(DEFAULTS, doc)
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        self._system_doc = None

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid([("", f"not valid JSON: {exc}")]) from exc
        return cls(doc, path.parent)

    def __getitem__(self, key):
        return self.data[key]

    def override(self, **kw) -> "RunConfig":
        """Apply command-line overrides (None values are ignored)."""
        doc = copy.deepcopy(self.raw)
        if kw.get("seed") is not None:
            doc["seed"] = int(kw["seed"])
        if kw.get("resolution") is not None:
            dim = len(self.system_doc["state_box"]["lo"])
            doc.setdefault("grid", {})["resolution"] = [int(kw["resolution"])] * dim
        if kw.get("output") is not None:
            doc["output"] = str(kw["output"])
        return RunConfig(doc, self.base_dir)

    @property
    def system_doc(self) -> dict:
        if self._system_doc is None:
            src = self.data["system"]
            if isinstance(src, dict):
                doc = copy.deepcopy(src)
            else:
                p = Path(src)
                if not p.is_absolute():
                    p = self.base_dir / p
                if p.suffix == ".json" or p.exists():
                    if not p.exists():
                        raise ConfigInvalid([("/system", f"system file {p} does not exist")])
                    doc = json.loads(p.read_text())
                else:
                    try:
                        doc = bundle_doc(src)
                    except ValueError as exc:
                        raise ConfigInvalid([("/system", str(exc))]) from exc
            doc.update(copy.deepcopy(self.data["system_overrides"]))
            self._system_doc = doc
        return self._system_doc

    def system(self):
        try:
            return system_from_dict(self.system_doc)
        except (KeyError, ValueError) as exc:
            raise ConfigInvalid([("/system", str(exc))]) from exc

    def snapshot(self) -> dict:
        """The effective configuration: defaults filled, system resolved."""
        snap = copy.deepcopy(self.data)
        snap["system_resolved"] = copy.deepcopy(self.system_doc)
        return snap

    def hash(self, stage: str | None = None) -> str:
        """sha256 of the canonical effective config (output dir excluded);
        with ``stage``, only the sections that stage depends on."""
        snap = self.snapshot()
        snap.pop("output", None)
        if stage is not None:
            keys = STAGE_INPUTS[stage] + ("system_resolved",)
            snap = {k: snap[k] for k in keys if k in snap}
        blob = json.dumps(snap, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def pipeline_config(self, spanning: bool = False) -> PipelineConfig:
        g, s, e = self.data["grid"], self.data["spectrum"], self.data["entropy"]
        return PipelineConfig(
            resolution=list(g["resolution"]),
            dwell=g["dwell"],
            chain_dwell=g["chain_dwell"],
            epsilon=g["epsilon"],
            samples_per_cell=g["samples_per_cell"],
            step=g["step"],
            gap=s["gap"],
            splitting_horizon=s["splitting_horizon"],
            min_cells=g["min_cells"],
            spanning=spanning,
            taus=list(e["taus"]),
            spanning_dwell=e["dwell"],
            spanning_refine=e["refine"],
            spanning_step=e["step"],
            K=e["K"],
            Q=e["Q"],
            candidate_depth=e["candidate_depth"],
            seeds_per_round=e["seeds_per_round"],
        )

    def alphas(self) -> list:
        a = self.data["sweep"]["alphas"]
        if isinstance(a, list):
            return sorted(float(v) for v in a)
        n = int(np.floor((a["stop"] - a["start"]) / a["step"] + 1e-9))
        return [round(a["start"] + i * a["step"], 12) for i in range(n + 1)]
