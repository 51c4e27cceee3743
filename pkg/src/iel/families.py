"""Builtin closed-form system families and the JSON system loader.

Each family maps (params, coefficients) to vectorised field and Jacobian
evaluators. Parameters are what a sweep varies; coefficients are fixed.

===================  =========================================  ===========
family               dynamics                                   params
===================  =========================================  ===========
scalar_linear        x' = a x + b u                             [a]
diag_linear_2d       x' = diag(a1, a2) x + B u                  [a1, a2]
bilinear_2d          x' = A x + u (Bm x + b)                    [a11..a22]
bistable_1d          x' = a x - x^3 + g u                       [a]
duffing_controlled   x1' = x2, x2' = a x1 - b x1^3 - c x2 + g u [a, b, c]
===================  =========================================  ===========
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .system import ControlRange, ControlSystem


def _scalar_linear(coeffs):
    b = float(coeffs.get("b", 1.0))

    def fields(p, X):
        n = X.shape[0]
        F = np.empty((n, 2, 1))
        F[:, 0, 0] = p[0] * X[:, 0]
        F[:, 1, 0] = b
        return F

    def jac(p, X):
        J = np.zeros((X.shape[0], 2, 1, 1))
        J[:, 0, 0, 0] = p[0]
        return J

    return fields, jac, 1, 1


def _diag_linear_2d(coeffs):
    B = np.asarray(coeffs.get("B", np.eye(2)), dtype=float).reshape(2, -1)
    m = B.shape[1]

    def fields(p, X):
        n = X.shape[0]
        F = np.empty((n, m + 1, 2))
        F[:, 0] = X * p[:2]
        F[:, 1:] = B.T[None]
        return F

    def jac(p, X):
        J = np.zeros((X.shape[0], m + 1, 2, 2))
        J[:, 0] = np.diag(p[:2])
        return J

    return fields, jac, 2, m


def _bilinear_2d(coeffs):
    Bm = np.asarray(coeffs.get("B", [[0.0, 0.0], [0.0, 0.0]]), dtype=float).reshape(2, 2)
    b = np.asarray(coeffs.get("b", [0.0, 0.0]), dtype=float).reshape(2)

    def fields(p, X):
        A = p[:4].reshape(2, 2)
        F = np.empty((X.shape[0], 2, 2))
        F[:, 0] = X @ A.T
        F[:, 1] = X @ Bm.T + b
        return F

    def jac(p, X):
        J = np.empty((X.shape[0], 2, 2, 2))
        J[:, 0] = p[:4].reshape(2, 2)
        J[:, 1] = Bm
        return J

    return fields, jac, 2, 1


def _bistable_1d(coeffs):
    g = float(coeffs.get("g", 0.05))

    def fields(p, X):
        x = X[:, 0]
        F = np.empty((X.shape[0], 2, 1))
        F[:, 0, 0] = p[0] * x - x ** 3
        F[:, 1, 0] = g
        return F

    def jac(p, X):
        J = np.zeros((X.shape[0], 2, 1, 1))
        J[:, 0, 0, 0] = p[0] - 3 * X[:, 0] ** 2
        return J

    return fields, jac, 1, 1


def _duffing(coeffs):
    g = float(coeffs.get("g", 0.1))

    def fields(p, X):
        a, b, c = p[:3]
        x1, x2 = X[:, 0], X[:, 1]
        F = np.zeros((X.shape[0], 2, 2))
        F[:, 0, 0] = x2
        F[:, 0, 1] = a * x1 - b * x1 ** 3 - c * x2
        F[:, 1, 1] = g
        return F

    def jac(p, X):
        a, b, c = p[:3]
        J = np.zeros((X.shape[0], 2, 2, 2))
        J[:, 0, 0, 1] = 1.0
        J[:, 0, 1, 0] = a - 3 * b * X[:, 0] ** 2
        J[:, 0, 1, 1] = -c
        return J

    return fields, jac, 2, 1


FAMILIES = {
    "scalar_linear": _scalar_linear,
    "diag_linear_2d": _diag_linear_2d,
    "bilinear_2d": _bilinear_2d,
    "bistable_1d": _bistable_1d,
    "duffing_controlled": _duffing,
}

BUNDLES = ("scalar_linear", "diag_linear_2d", "bilinear_2d", "bistable_1d", "duffing_controlled")


def _box(spec, dim):
    if isinstance(spec, dict):
        return np.asarray(spec["lo"], float).reshape(dim), np.asarray(spec["hi"], float).reshape(dim)
    lo, hi = spec
    return np.asarray(lo, float).reshape(dim), np.asarray(hi, float).reshape(dim)


def system_from_dict(doc: dict) -> ControlSystem:
    """Build a system from its JSON description (see README for the schema)."""
    family = doc["fields"]
    if family not in FAMILIES:
        raise ValueError(f"unknown field family {family!r}; known: {sorted(FAMILIES)}")
    coeffs = doc.get("coefficients", {})
    fields, jac, d, m = FAMILIES[family](coeffs)
    if int(doc.get("dim", d)) != d:
        raise ValueError(f"family {family} has dimension {d}, document says {doc['dim']}")
    clo, chi = _box(doc["control_box"], m)
    letters = doc.get("letters")
    crange = ControlRange(clo, chi, None if letters is None else np.asarray(letters, float))
    slo, shi = _box(doc["state_box"], d)
    return ControlSystem(
        state_dim=d,
        params=np.asarray(doc.get("params", []), float),
        fields=fields,
        control_range=crange,
        box_lo=slo,
        box_hi=shi,
        jacobians=None if doc.get("finite_difference_jacobian") else jac,
        name=doc.get("name", family),
        escape_inflation=doc.get("escape_inflation", 1.5),
        meta={"doc": doc},
    )


def load_system(source) -> ControlSystem:
    """Load from a dict, a path to a JSON file, or the name of a bundled system."""
    if isinstance(source, dict):
        return system_from_dict(source)
    path = Path(source)
    if path.exists():
        return system_from_dict(json.loads(path.read_text()))
    return system_from_dict(bundle_doc(str(source)))


def bundle_doc(name: str) -> dict:
    ref = resources.files("iel") / "bundles" / f"{name}.json"
    if not ref.is_file():
        raise ValueError(f"no bundled system named {name!r}")
    return json.loads(ref.read_text())


def bundled(name: str, **overrides) -> ControlSystem:
    doc = bundle_doc(name)
    doc.update(overrides)
    return system_from_dict(doc)
