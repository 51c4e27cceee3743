import copy
import json

import numpy as np
import pytest

from iel.errors import InsufficientData, ReferenceFailed
from iel.families import bundle_doc
from iel.pipeline import PipelineConfig
from iel.robustness import SweepReport, continuity_diagnostics, replay_record, sweep

CFG = PipelineConfig(resolution=[200])
BOX = ([-2.5], [2.5])


@pytest.fixture(scope="module")
def scalar_sweep():
    return sweep(bundle_doc("scalar_linear"), [0.8, 0.9, 1.0, 1.1, 1.2], 1.0, CFG, box=BOX)


def test_h_tracks_alpha(scalar_sweep):
    rep = scalar_sweep
    assert [r["alpha"] for r in rep.records] == sorted(r["alpha"] for r in rep.records)
    for r in rep.records:
        assert r["status"] == "ok" and r["k"] == 1
        assert abs(r["h_spectral"] - r["alpha"]) <= 0.07
    assert rep.record(1.0)["d_H_D_ref"] == 0.0


def test_witnesses_replay(scalar_sweep):
    for r in scalar_sweep.records:
        assert abs(replay_record(scalar_sweep, r) - r["h_spectral"]) <= 1e-9


def test_diagnostics(scalar_sweep):
    d = continuity_diagnostics(scalar_sweep)
    assert d.entropy_modulus == pytest.approx(1.0, abs=0.05)
    assert d.continuous
    # h = alpha moves by 0.2 over two steps of 0.1: fails tol 0.1, passes 0.25
    assert not d.usc_pass
    d = continuity_diagnostics(scalar_sweep, tol=0.25)
    assert d.usc_pass and d.lsc_pass
    # analytic boundary 1/alpha: |d(1/alpha)/d alpha| <= 1/0.8^2 plus grid slack
    w = scalar_sweep.grid.cell_width
    assert d.hausdorff_modulus_D <= 1 / 0.8 ** 2 + 4 * w / 0.1
    with pytest.raises(InsufficientData):
        continuity_diagnostics(SweepReport({}, 0, [1.0], 1.0, scalar_sweep.grid,
                                           scalar_sweep.records[:2]))


def test_serialisation(scalar_sweep):
    doc = json.loads(json.dumps(scalar_sweep.to_dict()))
    back = SweepReport.from_dict(doc)
    assert back.records == scalar_sweep.records
    rows = scalar_sweep.to_csv().splitlines()
    assert rows[0].startswith("alpha,status,h_spectral,h_spectral_bits,h_spanning,d_H_D_ref")
    assert len(rows) == 6


def test_constant_family_is_flat():
    doc = copy.deepcopy(bundle_doc("scalar_linear"))
    doc["params"] = [1.0, 0.0]  # the second parameter is unused by the family
    rep = sweep(doc, [0.0, 0.5, 1.0], 0.5, CFG, param_index=1, box=BOX)
    d = continuity_diagnostics(rep)
    assert d.entropy_modulus == 0.0 and d.hausdorff_modulus_D == 0.0
    assert len({r["h_spectral"] for r in rep.records}) == 1


def test_crossing_zero_is_flagged():
    rep = sweep(bundle_doc("scalar_linear"), [-0.2, 0.0, 0.2], 0.2, CFG, box=BOX)
    assert rep.record(0.0)["status"] == "NonHyperbolic"
    assert rep.record(0.2)["status"] == "ok"


def test_reference_failure():
    with pytest.raises(ReferenceFailed):
        sweep(bundle_doc("scalar_linear"), [0.0, 0.5], 0.0, CFG, box=BOX)


def test_parallel_equals_serial():
    doc = bundle_doc("scalar_linear")
    a = sweep(doc, [0.9, 1.0, 1.1], 1.0, CFG, box=BOX, workers=1)
    b = sweep(doc, [0.9, 1.0, 1.1], 1.0, CFG, box=BOX, workers=2)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
