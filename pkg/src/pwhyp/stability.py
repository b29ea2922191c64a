"""Conjugacy between a system and its admissible perturbations.

For a perturbation g within the pointwise budget, every g-orbit window is a
valid pseudo-orbit of the original map f, so shadowing assigns to each x the
unique f-orbit point h(x) tracking the g-orbit of x.  The map h intertwines
the two systems (h over g equals f over h), moves points by at most a small
fraction of the local chart radius, and is the identity wherever the orbit
window never feels the perturbation.  The probes certify continuity,
injectivity, and image density at grid resolution.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry, scales, shadowing
from .errors import PseudoOrbitInvalid, ProbeInconclusive

#: Conjugacy residual tolerance: ~10x the worst observed shadow-solve
#: residual at default parameters, separating solver noise from genuine
#: functional-equation failure.
TOL_CONJ = 1e-9


def g_orbit_window(g_sys, x, K, extra_forward=0):
    """Orbit window g^n(x) for n in [-K, K + extra_forward]."""
    x = geometry.wrap(np.asarray(x, dtype=float))
    fwd = [x]
    for _ in range(K + extra_forward):
        fwd.append(g_sys.forward(fwd[-1]))
    bwd = [x]
    for _ in range(K):
        bwd.append(g_sys.backward(bwd[-1]))
    return np.array(bwd[1:][::-1] + fwd)


def conjugacy_point(f_sys, g_sys, sp, x, K, mode="strict", window=None):
    """The unique f-orbit point whose orbit tracks the g-orbit of x.

    The g-orbit window must validate as a pseudo-orbit of f; the shadow
    solve then inherits the distance certificate Q(x)/50.
    """
    if window is None:
        window = g_orbit_window(g_sys, x, K)
    po = shadowing.analyze_window(f_sys, sp, window, mode=mode)
    if not po.all_valid():
        raise PseudoOrbitInvalid(
            f"g-orbit window fails the step bounds first at n = {po.first_invalid_step()}"
        )
    cert = shadowing.shadow_point(f_sys, sp, po)
    return cert.shadow, cert


@dataclass
class ConjugacyField:
    """Grid samples of the conjugacy with residual and displacement data.

    residual[i] = d(h(g x_i), f(h(x_i))) with both sides obtained from
    independent shadow solves; displacement[i] = d(h(x_i), x_i).  Failures
    lists grid indices whose windows did not validate.
    """

    grid: np.ndarray
    h: np.ndarray
    residual: np.ndarray
    displacement: np.ndarray
    q: np.ndarray
    window_K: int
    resolution: int
    failures: list = field(default_factory=list)

    def sup_residual(self):
        return float(np.max(self.residual)) if self.residual.size else 0.0

    def sup_displacement_ratio(self):
        return float(np.max(self.displacement / self.q))

    def summary(self):
        return {
            "resolution": int(self.resolution),
            "window_K": int(self.window_K),
            "sup_residual": self.sup_residual(),
            "sup_displacement": float(np.max(self.displacement)),
            "sup_displacement_over_q": self.sup_displacement_ratio(),
            "n_failures": len(self.failures),
        }


def conjugacy_field(f_sys, g_sys, sp, resolution, K, mode="strict"):
    """Conjugacy values on a uniform grid with independent residual solves.

    For every grid point the window of g-iterates is solved once for h(x)
    and once, shifted by a step, for h(g x); the residual compares the
    latter with the f-image of the former.
    """
    axis = np.arange(resolution) / resolution
    gu, gv = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gu.ravel(), gv.ravel()], axis=-1)
    if f_sys.domain.kind == "complement":
        keep = np.atleast_1d(geometry.boundary_dist(pts, f_sys.domain)) > 1e-3
        pts = pts[keep]
    n = pts.shape[0]

    h_vals = np.empty((n, 2))
    residual = np.empty(n)
    displacement = np.empty(n)
    failures = []
    for i in range(n):
        window = g_orbit_window(g_sys, pts[i], K, extra_forward=1)
        try:
            h_x, cert = conjugacy_point(
                f_sys, g_sys, sp, pts[i], K, mode=mode, window=window[:-1]
            )
            h_gx, _ = conjugacy_point(
                f_sys, g_sys, sp, window[K + 1], K, mode=mode, window=window[1:]
            )
        except Exception as exc:  # noqa: BLE001 - per-point failures recorded
            failures.append((i, repr(exc)))
            h_vals[i] = np.nan
            residual[i] = np.nan
            displacement[i] = np.nan
            continue
        h_vals[i] = h_x
        residual[i] = geometry.torus_dist(h_gx, f_sys.forward(h_x))
        displacement[i] = geometry.torus_dist(h_x, pts[i])

    q = scales.chart_radius(
        sp, np.atleast_1d(geometry.boundary_dist(pts, f_sys.domain))
    )
    return ConjugacyField(
        grid=pts,
        h=h_vals,
        residual=residual,
        displacement=displacement,
        q=q,
        window_K=K,
        resolution=resolution,
        failures=failures,
    )


def continuity_probe(f_sys, sp, fld, x, lam, max_K=30, n_cloud=32):
    """Smallest window size whose orbit-proximity neighborhood is lam-small.

    Measures, around the field value h(x), the smallest K such that every
    candidate z whose orbit stays within the pointwise radii of the
    h(x)-orbit for all |n| <= K satisfies d(h(x), z) < lam.  Candidates are
    a dense radial cloud in the chart ball around h(x) (grid neighbors of a
    realistic field are coarser than the chart radius, so they would make
    the probe vacuous); as K grows the surviving neighborhood shrinks
    monotonically at the expansion rate.  Raises when max_K is reached with
    survivors beyond lam.
    """
    x = np.asarray(x, dtype=float)
    i0 = int(np.argmin(geometry.torus_dist(fld.grid, x)))
    hx = fld.h[i0]

    def radius(p):
        return scales.chart_radius(
            sp, np.atleast_1d(geometry.boundary_dist(p, f_sys.domain))
        )

    q0 = float(radius(hx)[0])
    rads = np.geomspace(max(lam / 50.0, 1e-12), q0, n_cloud)
    angles = np.linspace(0.0, 2 * np.pi, 8, endpoint=False)
    offs = (rads[:, None, None]
            * np.stack([np.cos(angles), np.sin(angles)], axis=-1)[None, :, :])
    cloud = geometry.wrap(hx + offs.reshape(-1, 2))
    close = geometry.torus_dist(hx, cloud) < lam

    fwd_x, bwd_x = hx.copy(), hx.copy()
    fwd_z, bwd_z = cloud.copy(), cloud.copy()
    alive = geometry.torus_dist(hx, cloud) <= q0
    for K in range(0, max_K + 1):
        if not np.any(alive & ~close):
            return K
        fwd_x, bwd_x = f_sys.forward(fwd_x), f_sys.backward(bwd_x)
        fwd_z[alive] = np.atleast_2d(f_sys.forward(fwd_z[alive]))
        bwd_z[alive] = np.atleast_2d(f_sys.backward(bwd_z[alive]))
        alive &= (
            (geometry.torus_dist(fwd_x, fwd_z) <= radius(fwd_x))
            & (geometry.torus_dist(bwd_x, bwd_z) <= radius(bwd_x))
        )
    raise ProbeInconclusive(
        f"{int(np.sum(alive & ~close))} candidates remain indistinguishable at K={max_K}"
    )


@dataclass
class InjectivityReport:
    resolved: int
    total: int
    max_index: int
    unresolved_pairs: list

    def passed(self):
        return self.resolved == self.total

    def summary(self):
        return {
            "resolved": int(self.resolved),
            "total": int(self.total),
            "max_index": int(self.max_index),
            "n_unresolved": len(self.unresolved_pairs),
        }


def injectivity_probe(g_sys, sp, fld, pairs, max_n=20):
    """Certify that candidate collision pairs separate under the perturbed map.

    For each pair, searches |n| <= max_n for an iterate where the g-orbits
    are farther apart than the pointwise radius Q(g^n x); such an index
    proves the pair cannot share an h-value.
    """
    xs = np.atleast_2d(np.asarray([p[0] for p in pairs], dtype=float))
    ys = np.atleast_2d(np.asarray([p[1] for p in pairs], dtype=float))
    indices = shadowing.expansivity_batch(g_sys, sp, xs, ys, max_n)
    unresolved = [
        (xs[i], ys[i]) for i, v in enumerate(indices) if v is None
    ]
    resolved = [abs(v) for v in indices if v is not None]
    return InjectivityReport(
        resolved=len(resolved),
        total=len(indices),
        max_index=max(resolved) if resolved else 0,
        unresolved_pairs=unresolved,
    )


@dataclass
class SurjectivityReport:
    passed: bool
    cover_radius: float
    max_gap: float
    implied_by_displacement: bool

    def summary(self):
        return {
            "passed": bool(self.passed),
            "cover_radius": float(self.cover_radius),
            "max_gap": float(self.max_gap),
            "implied_by_displacement": bool(self.implied_by_displacement),
        }


def surjectivity_probe(fld, cover_radius):
    """Cover-density check: every grid cell center is near an h-image.

    With cover_radius at least the grid spacing plus the sup displacement
    this is implied by the displacement bound (each cell center is within
    half a diagonal of a grid point, whose image moved by at most the sup
    displacement), and the check must pass.
    """
    spacing = 1.0 / fld.resolution
    centers = geometry.wrap(fld.grid + 0.5 * spacing)
    good = ~np.isnan(fld.h[:, 0])
    images = fld.h[good]
    d = geometry.torus_dist(centers[:, None, :], images[None, :, :])
    max_gap = float(np.max(np.min(d, axis=1)))
    sup_disp = float(np.max(fld.displacement[good]))
    implied = cover_radius >= spacing + sup_disp
    return SurjectivityReport(
        passed=bool(max_gap <= cover_radius),
        cover_radius=float(cover_radius),
        max_gap=max_gap,
        implied_by_displacement=bool(implied),
    )
