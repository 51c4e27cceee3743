"""Invariance entropy lab: set-oriented numerics for invariance entropy of
control-affine systems on hyperbolic chain control sets."""

__version__ = "0.1.0"

from .errors import IELError  # noqa: E402
from .families import bundled, load_system  # noqa: E402

__all__ = ["IELError", "bundled", "load_system", "__version__"]
