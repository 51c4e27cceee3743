"""Controlled periodic orbits on the bundled systems (shared by tests)."""

import numpy as np

from iel.families import bundled
from iel.spectra import equilibrium_orbit, shoot_periodic_orbit
from iel.system import ControlSignal


def constructed_orbits(n: int = 20):
    """Equilibria under constant controls plus shooting orbits under
    two-piece periodic controls, cycling through the bundles."""
    out = []
    plans = [
        ("scalar_linear", [0.0], [[0.3]]),
        ("diag_linear_2d", [0.0, 0.0], [[0.2, -0.4], [-0.6, 0.5]]),
        ("bilinear_2d", [0.0, 0.0], [[0.5], [-0.5]]),
        ("bistable_1d", [0.0], [[0.8]]),
        ("bistable_1d", [0.95], [[-0.6]]),
        ("duffing_controlled", [0.0, 0.0], [[0.4]]),
        ("duffing_controlled", [1.0, 0.0], [[-0.7]]),
    ]
    for name, seed, values in plans:
        s = bundled(name)
        for v in values:
            for period in (0.7, 1.3):
                out.append((s, equilibrium_orbit(s, v, seed, period)))
        if name in ("scalar_linear", "diag_linear_2d", "bilinear_2d"):
            lo, hi = s.control_range.lo, s.control_range.hi
            u = ControlSignal(np.array([0.0, 0.4, 1.1]), np.vstack([0.5 * hi, 0.5 * lo]),
                              periodic=True)
            out.append((s, shoot_periodic_orbit(s, u, seed)))
    return out[:n]
