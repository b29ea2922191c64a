"""Pointwise hyperbolic dynamics on the flat 2-torus, at desk scale.

Numerical machinery for systems whose expansion and contraction rates vary
from point to point and may die out toward the boundary of an invariant open
set: boundary-weighted scale functions, stable/unstable splittings and cone
fields, graph transforms with measured contraction, pseudo-orbit shadowing
with certificates, and construction of the conjugacy that matches a small
perturbation back onto the original system.
"""

from . import (
    errors,
    geometry,
    numerics,
    scales,
    systems,
    splitting,
    graphs,
    shadowing,
    stability,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "geometry",
    "numerics",
    "scales",
    "systems",
    "splitting",
    "graphs",
    "shadowing",
    "stability",
    "__version__",
]
