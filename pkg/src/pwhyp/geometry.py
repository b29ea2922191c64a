"""Flat 2-torus geometry: wrapped coordinates, distances, exp/log charts.

Points live on the unit torus [0,1)^2 with the flat metric, represented as
numpy arrays whose last axis has length 2.  All functions broadcast over
leading axes, so a single point is shape (2,) and a batch is (n, 2).
The exponential map is exact here (straight lines), which keeps chart error
out of every downstream estimate; the injectivity radius is 0.5.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NormExceedsInjectivityRadius, PointsTooFar, PointOnBoundary

INJECTIVITY_RADIUS = 0.5

# Excluded points closer than this to a query count as "on the boundary".
_BOUNDARY_TOL = 1e-12


def wrap(p):
    """Reduce coordinates mod 1 into [0, 1).  Idempotent."""
    p = np.asarray(p, dtype=float)
    return p - np.floor(p)


def point(u, v):
    """Build a wrapped point from two coordinates."""
    return wrap(np.array([u, v], dtype=float))


def shortest_rep(d):
    """Reduce a coordinate difference to its representative in [-0.5, 0.5)."""
    d = np.asarray(d, dtype=float)
    return d - np.round(d)


def torus_dist(p, q):
    """Distance on the unit flat torus (min over integer shifts)."""
    d = shortest_rep(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    return np.linalg.norm(d, axis=-1)


def exp_map(x, w):
    """Follow the tangent vector w from x; exact on the flat torus.

    Requires ||w|| < 0.5 so the result determines w uniquely.
    """
    w = np.asarray(w, dtype=float)
    n = np.linalg.norm(w, axis=-1)
    if np.any(n >= INJECTIVITY_RADIUS):
        raise NormExceedsInjectivityRadius(
            f"|w| = {np.max(n):.6g} >= {INJECTIVITY_RADIUS}"
        )
    return wrap(np.asarray(x, dtype=float) + w)


def log_map(x, y):
    """Tangent vector at x pointing to y along the shortest representative."""
    d = torus_dist(x, y)
    if np.any(d >= INJECTIVITY_RADIUS):
        raise PointsTooFar(f"d(x, y) = {np.max(d):.6g} >= {INJECTIVITY_RADIUS}")
    return shortest_rep(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))


@dataclass(frozen=True)
class DomainDescriptor:
    """Open invariant set: the whole torus, or the complement of finitely many points.

    For the full torus the boundary distance is the constant 1 by convention,
    which turns every boundary-weighted scale into its capped interior value.
    """

    kind: str = "full"  # "full" | "complement"
    excluded_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        if self.kind not in ("full", "complement"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(
            self, "excluded_points", wrap(np.atleast_2d(np.asarray(self.excluded_points, dtype=float)))
        )


def full_manifold():
    return DomainDescriptor(kind="full")


def complement_of(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return DomainDescriptor(kind="complement", excluded_points=pts)


def boundary_dist(x, domain):
    """Distance from x to the boundary of the open set.

    Full torus: 1 by convention.  Complement of a finite set: minimum torus
    distance to the excluded points.  Raises if x is an excluded point.
    """
    x = np.asarray(x, dtype=float)
    if domain.kind == "full":
        return np.ones(x.shape[:-1]) if x.ndim > 1 else 1.0
    diffs = shortest_rep(x[..., None, :] - domain.excluded_points)
    d = np.min(np.linalg.norm(diffs, axis=-1), axis=-1)
    if np.any(d < _BOUNDARY_TOL):
        raise PointOnBoundary("query point coincides with an excluded point")
    return d
