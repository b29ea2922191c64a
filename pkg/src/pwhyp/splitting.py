"""Per-point stable/unstable splittings, cone families, and their checks.

Directions are extracted by power iteration along finite orbit segments:
push a fixed seed vector through the derivative cocycle from deeper and
deeper backward-orbit points and stop when the direction is Cauchy.  This is
one code path for every system; closed-form eigendata appears only as an
independent oracle in the tests.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry, scales
from .errors import (
    OrbitLeavesDomain,
    NoConvergence,
    DegenerateFrame,
    NonpositiveAperture,
)

#: Direction extraction depth cap and Cauchy threshold.  Converged points
#: exit early, so the cap only matters for orbits lingering in regions of
#: weak hyperbolicity.
DEFAULT_ITERS = 100
DIRECTION_TOL = 1e-12

#: Looser settings for rate-level report sweeps: direction errors enter the
#: measured rates linearly, far below the margins being certified, while
#: orbits hugging an eigen-axis of the degenerate fixed point converge only
#: algebraically and would stall the strict tolerance.
RATE_ITERS = 150
RATE_TOL = 1e-10

#: Orbits hugging an eigen-axis of a degenerate fixed point make the cocycle
#: converge only algebraically; rate-level sweeps accept a direction whose
#: Cauchy increment has merely dropped below this stall threshold (the rates
#: inherit an error of the same order, orders below the certified margins).
RATE_STALL = 5e-5

#: Frames with |det| below this are rejected as numerically collinear.
MIN_FRAME_DET = 0.05

_SEED = np.array([0.93632917756904, 0.3511234415883917])


@dataclass
class Splitting:
    """Unit stable/unstable directions and one-step rates at a point.

    Fields are scalars/(2,) arrays for a single point or carry a leading
    batch axis.  Rates: m_u expands and n_s contracts (m_u > 1 > n_s);
    m_s_inv and n_u_inv are the corresponding rates of the inverse map.
    """

    e_u: np.ndarray
    e_s: np.ndarray
    m_u: np.ndarray
    n_s: np.ndarray
    m_s_inv: np.ndarray
    n_u_inv: np.ndarray

    def frame(self):
        """Matrix with columns (e_u, e_s); maps frame coords to chart coords."""
        return np.stack([self.e_u, self.e_s], axis=-1)

    def det(self):
        return np.linalg.det(self.frame())

    def swapped(self):
        """The same splitting viewed from the inverse map (u and s trade roles)."""
        return Splitting(
            e_u=self.e_s,
            e_s=self.e_u,
            m_u=self.m_s_inv,
            n_s=self.n_u_inv,
            m_s_inv=self.m_u,
            n_u_inv=self.n_s,
        )

    def __getitem__(self, idx):
        return Splitting(
            e_u=self.e_u[idx],
            e_s=self.e_s[idx],
            m_u=self.m_u[idx],
            n_s=self.n_s[idx],
            m_s_inv=self.m_s_inv[idx],
            n_u_inv=self.n_u_inv[idx],
        )


def _canonical_sign(vecs):
    """Fix signs so the dominant coordinate is positive (deterministic output)."""
    lead = np.where(
        np.abs(vecs[..., 0:1]) >= np.abs(vecs[..., 1:2]), vecs[..., 0:1], vecs[..., 1:2]
    )
    return vecs * np.where(lead < 0, -1.0, 1.0)


def _check_domain(system, pts):
    if system.domain.kind == "complement":
        d = np.atleast_1d(geometry.boundary_dist(pts, system.domain))
        if np.any(d < 1e-9):
            raise OrbitLeavesDomain("orbit hit an excluded point")


def _inv2(M):
    """Batched explicit 2x2 inverse."""
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    out[..., 1, 1] = M[..., 0, 0]
    return out / det[..., None, None]


def _backward_step_with_forward_jacobian(system, pts):
    """One backward orbit step plus the forward jacobian at the new point.

    Uses the fused evaluation when the system provides it (one integration
    pass instead of two) and inverts the returned derivative.
    """
    if system.backward_with_jacobian is not None:
        new_pts, jac_back = system.backward_with_jacobian(pts)
        return new_pts, _inv2(jac_back)
    new_pts = np.atleast_2d(system.backward(pts))
    return new_pts, system.jacobian(new_pts)


def _power_direction(system, points, n_iters, tol, stall_tol=None, seeds=None):
    """Limit direction of the derivative cocycle pushed from the backward orbit.

    Converged points drop out of the per-level work, so stragglers (orbits
    that linger where the rates are nearly neutral) only cost themselves.
    When ``stall_tol`` is given, a direction whose increment has at least
    dropped below it is accepted at the iteration cap instead of raising.
    Per-point ``seeds`` warm-start the iteration (probes near a point with a
    known direction converge in a couple of levels).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    orbit = points.copy()
    M = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    prev = np.zeros((n, 2))
    increments = np.full(n, np.inf)
    active = np.ones(n, dtype=bool)
    for level in range(n_iters):
        idx = np.flatnonzero(active)
        stepped, J = _backward_step_with_forward_jacobian(system, orbit[idx])
        orbit[idx] = stepped
        _check_domain(system, orbit[idx])
        Mi = np.einsum("nij,njk->nik", M[idx], J)
        Mi /= np.linalg.norm(Mi, axis=(-2, -1), keepdims=True)
        M[idx] = Mi
        if seeds is None:
            vec = Mi @ _SEED
        else:
            vec = np.einsum("nij,nj->ni", Mi, seeds[idx])
        vec /= np.linalg.norm(vec, axis=-1, keepdims=True)
        if level > 0:
            vec *= np.where(np.einsum("ni,ni->n", vec, prev[idx])[:, None] < 0, -1.0, 1.0)
            increments[idx] = np.linalg.norm(vec - prev[idx], axis=-1)
        prev[idx] = vec
        if level > 0:
            active[idx] = increments[idx] > tol
            if not np.any(active):
                break
    if np.any(increments > tol):
        if stall_tol is None or np.any(increments > stall_tol):
            raise NoConvergence(
                f"direction iteration stalled for {int(np.sum(increments > tol))} "
                f"point(s); worst increment {np.max(increments):.3g} after {n_iters} steps"
            )
    return _canonical_sign(prev)


def _rates(system, points, e_u, e_s):
    J = system.jacobian(points)
    Jinv = system.jacobian_inv(points)
    return dict(
        m_u=np.linalg.norm(np.einsum("nij,nj->ni", J, e_u), axis=-1),
        n_s=np.linalg.norm(np.einsum("nij,nj->ni", J, e_s), axis=-1),
        m_s_inv=np.linalg.norm(np.einsum("nij,nj->ni", Jinv, e_s), axis=-1),
        n_u_inv=np.linalg.norm(np.einsum("nij,nj->ni", Jinv, e_u), axis=-1),
    )


def compute_splitting_batch(
    system, points, n_iters=DEFAULT_ITERS, tol=DIRECTION_TOL, stall_tol=None,
    seeds_u=None, seeds_s=None,
):
    """Stable/unstable splitting at each point of a batch."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    e_u = _power_direction(system, points, n_iters, tol, stall_tol=stall_tol, seeds=seeds_u)
    e_s = _power_direction(
        system.inverse(), points, n_iters, tol, stall_tol=stall_tol, seeds=seeds_s
    )
    det = np.linalg.det(np.stack([e_u, e_s], axis=-1))
    if np.any(np.abs(det) < MIN_FRAME_DET):
        raise DegenerateFrame(
            f"frame determinant {np.min(np.abs(det)):.3g} below {MIN_FRAME_DET}"
        )
    return Splitting(e_u=e_u, e_s=e_s, **_rates(system, points, e_u, e_s))


def compute_splitting(system, x, n_iters=DEFAULT_ITERS, tol=DIRECTION_TOL):
    """Splitting at a single point; see ``compute_splitting_batch``."""
    batch = compute_splitting_batch(
        system, np.asarray(x, dtype=float)[None, :], n_iters, tol
    )
    return batch[0]


@dataclass
class ConeFamily:
    """Cone apertures over a batch of points, built on a splitting.

    The unstable cone at a point is {v : |v_s| < kappa_u |v_u|} in the frame
    of the splitting there; apertures are capped at 1.
    """

    points: np.ndarray
    kappa_u: np.ndarray
    kappa_s: np.ndarray
    splitting: Splitting


def cone_aperture(sp, system, x, splitting=None):
    """Aperture pair (kappa_u, kappa_s) at a point or batch of points.

    kappa_u = min(1, (m_u - budget - 1) / (n_s + budget + 1)) and the mirror
    formula on the stable side.  Requires the budget below the rate margins;
    raises when a numerator is nonpositive.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    if splitting is None:
        splitting = compute_splitting_batch(system, pts)
    bud = sp.eps * scales.budget_scale(
        sp, np.atleast_1d(geometry.boundary_dist(pts, system.domain))
    )
    num_u = splitting.m_u - bud - 1.0
    num_s = splitting.m_s_inv - bud - 1.0
    if np.any(num_u <= 0) or np.any(num_s <= 0):
        raise NonpositiveAperture(
            "budget exceeds a rate margin; shrink eps for this region"
        )
    kappa_u = np.minimum(1.0, num_u / (splitting.n_s + bud + 1.0))
    kappa_s = np.minimum(1.0, num_s / (splitting.n_u_inv + bud + 1.0))
    if single:
        return float(kappa_u[0]), float(kappa_s[0])
    return kappa_u, kappa_s


def build_cone_family(sp, system, points, splitting=None):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if splitting is None:
        splitting = compute_splitting_batch(system, points)
    kappa_u, kappa_s = cone_aperture(sp, system, points, splitting)
    return ConeFamily(points=points, kappa_u=kappa_u, kappa_s=kappa_s, splitting=splitting)


def _frame_components(frames, vectors):
    """Coordinates of vectors (..., 2) in frames (..., 2, 2), broadcasting."""
    return np.linalg.solve(frames, vectors[..., None])[..., 0]


def _cone_directions(main, other, kappa, n_dirs):
    """Unit directions main + t * kappa * other for t on [-1, 1]."""
    t = np.linspace(-1.0, 1.0, n_dirs)
    dirs = main[..., None, :] + (np.asarray(kappa)[..., None, None] * t[:, None]) * other[..., None, :]
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def cone_invariance_check(g_sys, sp, f_sys, x, n_dirs=16):
    """Does Dg map the unstable cone at x strictly inside the cone at g(x)?

    Cones come from the unperturbed system's splitting and budget at both
    base points.  Returns (ok, margin); margin is the worst relative
    clearance 1 - |w_s| / (kappa_u(gx) |w_u|) over sampled cone directions.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    spl_x = compute_splitting_batch(f_sys, pts)
    gx = np.atleast_2d(g_sys.forward(pts))
    spl_gx = compute_splitting_batch(f_sys, gx)
    k_x = np.atleast_1d(cone_aperture(sp, f_sys, pts, spl_x)[0])
    k_gx = np.atleast_1d(cone_aperture(sp, f_sys, gx, spl_gx)[0])
    dirs = _cone_directions(spl_x.e_u, spl_x.e_s, k_x, n_dirs)
    img = np.einsum("nij,ndj->ndi", g_sys.jacobian(pts), dirs)
    comp = _frame_components(spl_gx.frame()[:, None, :, :], img)
    ratio = np.abs(comp[..., 1]) / np.abs(comp[..., 0])
    margin = np.min(1.0 - ratio / k_gx[:, None], axis=-1)
    ok = margin > 0
    if single:
        return bool(ok[0]), float(margin[0])
    return ok, margin


def cone_growth_check(g_sys, sp, f_sys, x, n_dirs=16):
    """Box-norm growth of Dg on the unstable cone, against sqrt(m_u).

    The box norm is the max of the two frame-component magnitudes, measured
    in the frame at the base point before and at the image point after.
    Returns (ok, margin) with margin = min growth factor - sqrt(m_u(x)).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    spl_x = compute_splitting_batch(f_sys, pts)
    gx = np.atleast_2d(g_sys.forward(pts))
    spl_gx = compute_splitting_batch(f_sys, gx)
    k_x = np.atleast_1d(cone_aperture(sp, f_sys, pts, spl_x)[0])
    dirs = _cone_directions(spl_x.e_u, spl_x.e_s, k_x, n_dirs)
    before = _frame_components(spl_x.frame()[:, None, :, :], dirs)
    img = np.einsum("nij,ndj->ndi", g_sys.jacobian(pts), dirs)
    after = _frame_components(spl_gx.frame()[:, None, :, :], img)
    factor = np.min(
        np.max(np.abs(after), axis=-1) / np.max(np.abs(before), axis=-1), axis=-1
    )
    margin = factor - np.sqrt(spl_x.m_u)
    ok = margin > 0
    if single:
        return bool(ok[0]), float(margin[0])
    return ok, margin


def perturbed_splitting_batch(g_sys, sp, f_sys, points, n_iters=DEFAULT_ITERS, tol=DIRECTION_TOL):
    """Splitting of the perturbed map via nested cone images.

    Pushes both boundary directions of the unperturbed cone forward from
    deeper and deeper backward g-orbit points; the two image directions
    squeeze onto the perturbed unstable direction.  The stable side mirrors
    with the inverse map.  Raises when the squeeze is not Cauchy within
    ``n_iters`` levels.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))

    def one_side(sys_dir, side):
        n = points.shape[0]
        orbit = points
        M = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
        gap = np.full(n, np.inf)
        best = None
        for _ in range(n_iters):
            orbit, J = _backward_step_with_forward_jacobian(sys_dir, orbit)
            _check_domain(sys_dir, orbit)
            M = np.einsum("nij,njk->nik", M, J)
            M /= np.linalg.norm(M, axis=(-2, -1), keepdims=True)
            spl = compute_splitting_batch(f_sys, orbit)
            kappas = cone_aperture(sp, f_sys, orbit, spl)
            if side == "u":
                main, other, kappa = spl.e_u, spl.e_s, np.atleast_1d(kappas[0])
            else:
                main, other, kappa = spl.e_s, spl.e_u, np.atleast_1d(kappas[1])
            vp = main + kappa[:, None] * other
            vm = main - kappa[:, None] * other
            ip = np.einsum("nij,nj->ni", M, vp)
            im = np.einsum("nij,nj->ni", M, vm)
            ip /= np.linalg.norm(ip, axis=-1, keepdims=True)
            im /= np.linalg.norm(im, axis=-1, keepdims=True)
            im *= np.where(np.einsum("ni,ni->n", ip, im)[:, None] < 0, -1.0, 1.0)
            gap = np.linalg.norm(ip - im, axis=-1)
            best = ip + im
            best /= np.linalg.norm(best, axis=-1, keepdims=True)
            if np.all(gap <= tol):
                break
        if np.any(gap > tol):
            raise NoConvergence(
                f"cone squeeze stalled for {int(np.sum(gap > tol))} point(s); "
                f"worst gap {np.max(gap):.3g}"
            )
        return _canonical_sign(best)

    e_u = one_side(g_sys, "u")
    e_s = one_side(g_sys.inverse(), "s")
    det = np.linalg.det(np.stack([e_u, e_s], axis=-1))
    if np.any(np.abs(det) < MIN_FRAME_DET):
        raise DegenerateFrame("perturbed frame nearly collinear")
    return Splitting(e_u=e_u, e_s=e_s, **_rates(g_sys, points, e_u, e_s))


def perturbed_splitting(g_sys, sp, f_sys, x, n_iters=DEFAULT_ITERS, tol=DIRECTION_TOL):
    batch = perturbed_splitting_batch(
        g_sys, sp, f_sys, np.asarray(x, dtype=float)[None, :], n_iters, tol
    )
    return batch[0]
