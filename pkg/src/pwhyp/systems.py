"""Concrete torus diffeomorphisms and their verification.

Three constructions: the uniformly hyperbolic cat map; a boundary-degenerate
variant whose hyperbolicity dies out toward one excluded fixed point; and
compactly supported bump perturbations sized against the pointwise budget.
The slowdown variant composes the cat map with the time-1 map of a vector
field supported in a small disk around the fixed point, so outside that disk
the map *is* the cat map, while inside the expansion and contraction rates
interpolate down to 1 at the excluded point like a power of the distance.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, scales
from .errors import (
    IntegrationFailure,
    BudgetExceeded,
    SupportTouchesBoundary,
)

CAT_MATRIX = np.array([[2.0, 1.0], [1.0, 1.0]])
CAT_MATRIX_INV = np.array([[1.0, -1.0], [-1.0, 2.0]])

#: Expansion factor of the cat map, (3 + sqrt(5)) / 2.
LAMBDA_U = (3.0 + math.sqrt(5.0)) / 2.0
LAMBDA_S = 1.0 / LAMBDA_U

#: Fixed integrator step for the slow-zone flow.
RK4_STEP = 1e-3

#: Truncated products count as infinite/zero beyond these thresholds.
PRODUCT_THRESHOLD = 1e6


@dataclass(frozen=True)
class SystemSpec:
    """A torus diffeomorphism with derivative data and its invariant open set.

    All callables accept arrays of shape (..., 2) and vectorize over leading
    axes; ``jacobian_inv(y)`` is the derivative of the inverse map at y, so
    ``jacobian_inv(forward(x)) @ jacobian(x)`` is the identity.

    The optional fused entries evaluate a map and its derivative at the
    argument point in one pass (``forward_with_jacobian(x) -> (f(x), Df(x))``
    and the backward mirror); systems whose evaluation integrates a flow
    provide them so orbit pipelines do not integrate twice per step.
    """

    name: str
    forward: callable
    backward: callable
    jacobian: callable
    jacobian_inv: callable
    domain: geometry.DomainDescriptor
    holder_alpha: float
    forward_with_jacobian: callable = None
    backward_with_jacobian: callable = None

    def inverse(self):
        """View of the inverse diffeomorphism; domain and regularity shared."""
        return SystemSpec(
            name=self.name + "-inverse",
            forward=self.backward,
            backward=self.forward,
            jacobian=self.jacobian_inv,
            jacobian_inv=self.jacobian,
            domain=self.domain,
            holder_alpha=self.holder_alpha,
            forward_with_jacobian=self.backward_with_jacobian,
            backward_with_jacobian=self.forward_with_jacobian,
        )


# --- cat map ------------------------------------------------------------------


def build_cat_map():
    """Linear hyperbolic automorphism with matrix [[2, 1], [1, 1]]."""

    def forward(x):
        return geometry.wrap(np.asarray(x, dtype=float) @ CAT_MATRIX.T)

    def backward(y):
        return geometry.wrap(np.asarray(y, dtype=float) @ CAT_MATRIX_INV.T)

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(CAT_MATRIX, x.shape[:-1] + (2, 2)).copy()

    def jacobian_inv(y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(CAT_MATRIX_INV, y.shape[:-1] + (2, 2)).copy()

    return SystemSpec(
        name="cat",
        forward=forward,
        backward=backward,
        jacobian=jacobian,
        jacobian_inv=jacobian_inv,
        domain=geometry.full_manifold(),
        holder_alpha=1.0,
    )


# --- slowdown map ---------------------------------------------------------------


class _SlowProfile:
    """Radial speed profile in the squared distance s to the fixed point.

    psi(s) = (1 - (1 - s/b)^3)^(beta/2) for s < b = radius^2, and 1 beyond.
    Near the fixed point this behaves like (3 s / b)^(beta/2), giving the
    power-law rate degeneration, while at the cap 1 - psi vanishes cubically
    so the profile is C^2 there.  A plain capped power law would concentrate
    curvature of the map's derivative in the cap shell and blow the chart
    remainder budget; this shape keeps it an order of magnitude smaller.
    """

    def __init__(self, radius, exponent):
        self.r1 = float(radius)
        self.exponent = float(exponent)
        self.b = self.r1**2
        self.k = 0.5 * self.exponent

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        u = np.clip(1.0 - s / self.b, 0.0, 1.0)
        f = 1.0 - u**3
        return f**self.k

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        u = np.clip(1.0 - s / self.b, 0.0, 1.0)
        f = 1.0 - u**3
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(f > 0, self.k * np.where(f > 0, f, 1.0) ** (self.k - 1.0), 0.0)
        return d * 3.0 * u * u / self.b


class _SlowZoneFlow:
    """Time-1 flow of psi(|w|^2) * L * w in the eigenframe of the cat matrix.

    L = diag(log lambda_u, -log lambda_u), so where psi = 1 the unit-time
    flow is exactly the cat matrix and where psi < 1 the saddle motion runs
    in slow time, symmetrically in both directions.  Fixed-step RK4 keeps
    evaluations deterministic; the variational equation rides along when the
    Jacobian is requested.
    """

    def __init__(self, radius, exponent, step=RK4_STEP):
        self.profile = _SlowProfile(radius, exponent)
        self.r1 = float(radius)
        self.ell = math.log(LAMBDA_U)
        self.step = float(step)
        self.n_steps = int(round(1.0 / self.step))
        # orthonormal eigenframe rows: (expanding, contracting)
        e_u = np.array([1.0, LAMBDA_U - 2.0])
        e_u /= np.linalg.norm(e_u)
        e_s = np.array([-e_u[1], e_u[0]])
        self.frame = np.vstack([e_u, e_s])

    def _coeffs(self, u, v):
        s = u * u + v * v
        psi = self.profile(s)
        dpsi = self.profile.deriv(s)
        p = psi * self.ell
        c = 2.0 * dpsi * self.ell
        return p, c

    def _field(self, u, v):
        p, _ = self._coeffs(u, v)
        return p * u, -p * v

    def _field_jac(self, u, v, j00, j01, j10, j11):
        p, c = self._coeffs(u, v)
        fu, fv = p * u, -p * v
        a00 = p + c * u * u
        a01 = c * u * v
        a10 = -c * v * u
        a11 = -p - c * v * v
        return (
            fu,
            fv,
            a00 * j00 + a01 * j10,
            a00 * j01 + a01 * j11,
            a10 * j00 + a11 * j10,
            a10 * j01 + a11 * j11,
        )

    def flow(self, w, sign):
        """Advance eigenframe offsets w (n, 2) by time ``sign`` (+1 or -1)."""
        h = sign * self.step
        u, v = w[:, 0].copy(), w[:, 1].copy()
        for _ in range(self.n_steps):
            k1u, k1v = self._field(u, v)
            k2u, k2v = self._field(u + 0.5 * h * k1u, v + 0.5 * h * k1v)
            k3u, k3v = self._field(u + 0.5 * h * k2u, v + 0.5 * h * k2v)
            k4u, k4v = self._field(u + h * k3u, v + h * k3v)
            u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise IntegrationFailure("slow-zone flow produced non-finite state")
        return np.stack([u, v], axis=-1)

    def flow_with_jacobian(self, w, sign):
        """Flow plus the variational solution D(flow) in the eigenframe."""
        h = sign * self.step
        u, v = w[:, 0].copy(), w[:, 1].copy()
        n = u.shape[0]
        j00 = np.ones(n)
        j01 = np.zeros(n)
        j10 = np.zeros(n)
        j11 = np.ones(n)
        for _ in range(self.n_steps):
            s1 = self._field_jac(u, v, j00, j01, j10, j11)
            s2 = self._field_jac(
                u + 0.5 * h * s1[0], v + 0.5 * h * s1[1],
                j00 + 0.5 * h * s1[2], j01 + 0.5 * h * s1[3],
                j10 + 0.5 * h * s1[4], j11 + 0.5 * h * s1[5],
            )
            s3 = self._field_jac(
                u + 0.5 * h * s2[0], v + 0.5 * h * s2[1],
                j00 + 0.5 * h * s2[2], j01 + 0.5 * h * s2[3],
                j10 + 0.5 * h * s2[4], j11 + 0.5 * h * s2[5],
            )
            s4 = self._field_jac(
                u + h * s3[0], v + h * s3[1],
                j00 + h * s3[2], j01 + h * s3[3],
                j10 + h * s3[4], j11 + h * s3[5],
            )
            u = u + (h / 6.0) * (s1[0] + 2 * s2[0] + 2 * s3[0] + s4[0])
            v = v + (h / 6.0) * (s1[1] + 2 * s2[1] + 2 * s3[1] + s4[1])
            j00 = j00 + (h / 6.0) * (s1[2] + 2 * s2[2] + 2 * s3[2] + s4[2])
            j01 = j01 + (h / 6.0) * (s1[3] + 2 * s2[3] + 2 * s3[3] + s4[3])
            j10 = j10 + (h / 6.0) * (s1[4] + 2 * s2[4] + 2 * s3[4] + s4[4])
            j11 = j11 + (h / 6.0) * (s1[5] + 2 * s2[5] + 2 * s3[5] + s4[5])
        if not np.all(np.isfinite(u + v + j00 + j01 + j10 + j11)):
            raise IntegrationFailure("variational flow produced non-finite state")
        jac = np.empty((n, 2, 2))
        jac[:, 0, 0], jac[:, 0, 1] = j00, j01
        jac[:, 1, 0], jac[:, 1, 1] = j10, j11
        return np.stack([u, v], axis=-1), jac


def build_slowdown_map(slow_radius, slow_exponent, step=RK4_STEP):
    """Cat map slowed to neutrality at the excluded fixed point (0, 0).

    The map is the unit-time flow of the slowed saddle field
    psi(|w|^2) L w around the fixed point, and the cat map on the identical
    exact code path wherever the unit-time trajectory provably misses the
    slow disk.  Trajectories that can reach the disk live in the eigenframe
    box |w_u| < r1, |w_s| < lambda_u r1 (mirrored for the inverse), which is
    where the integrator runs; since the field equals the full saddle field
    outside the disk, both branches agree there to integrator accuracy.

    The construction is symmetric under time reversal combined with the
    u/s swap, so the backward map degenerates toward the fixed point exactly
    like the forward one.  Expansion excess decays like d(x, 0)^slow_exponent.
    """
    if not (0 < slow_radius < 0.17):
        raise ValueError(
            "slow_radius must lie in (0, 0.17) so the reachability box "
            "stays inside the injectivity radius"
        )
    if slow_exponent <= 0:
        raise ValueError("slow_exponent must be positive")
    zone = _SlowZoneFlow(slow_radius, slow_exponent, step)
    E = zone.frame  # rows: eigenframe axes
    r1 = float(slow_radius)

    def _eigen_offsets(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        w = geometry.shortest_rep(x)
        return x, w @ E.T

    def _active(we, sign):
        if sign > 0:
            return (np.abs(we[:, 0]) < r1) & (np.abs(we[:, 1]) < LAMBDA_U * r1)
        return (np.abs(we[:, 1]) < r1) & (np.abs(we[:, 0]) < LAMBDA_U * r1)

    def _apply(x, sign, with_jac):
        squeeze = np.asarray(x).ndim == 1
        x2, we = _eigen_offsets(x)
        act = _active(we, sign)
        lin = CAT_MATRIX if sign > 0 else CAT_MATRIX_INV
        out = geometry.wrap(x2 @ lin.T)
        jac = np.broadcast_to(lin, (x2.shape[0], 2, 2)).copy() if with_jac else None
        if np.any(act):
            if with_jac:
                we_new, je = zone.flow_with_jacobian(we[act], sign)
                jac[act] = np.einsum("ji,njk,kl->nil", E, je, E)
            else:
                we_new = zone.flow(we[act], sign)
            out[act] = geometry.wrap(we_new @ E)
        if squeeze:
            return (out[0], jac[0]) if with_jac else out[0]
        return (out, jac) if with_jac else out

    def forward(x):
        return _apply(x, +1.0, False)

    def backward(y):
        return _apply(y, -1.0, False)

    def jacobian(x):
        res = _apply(x, +1.0, True)
        return res[1]

    def jacobian_inv(y):
        res = _apply(y, -1.0, True)
        return res[1]

    def forward_with_jacobian(x):
        return _apply(x, +1.0, True)

    def backward_with_jacobian(y):
        return _apply(y, -1.0, True)

    return SystemSpec(
        name="slowdown",
        forward=forward,
        backward=backward,
        jacobian=jacobian,
        jacobian_inv=jacobian_inv,
        domain=geometry.complement_of([(0.0, 0.0)]),
        holder_alpha=float(slow_exponent),
        forward_with_jacobian=forward_with_jacobian,
        backward_with_jacobian=backward_with_jacobian,
    )


# --- perturbations --------------------------------------------------------------


def _mollifier(t):
    """C-infinity bump: exp(1 - 1/(1 - t^2)) on |t| < 1, zero outside."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    tt = np.where(inside, t, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(1.0 - 1.0 / (1.0 - tt * tt))
    return np.where(inside, val, 0.0)


def _mollifier_deriv(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    tt = np.where(inside, t, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(1.0 - 1.0 / (1.0 - tt * tt)) * (-2.0 * tt / (1.0 - tt * tt) ** 2)
    return np.where(inside, val, 0.0)


@dataclass
class PerturbationBudget:
    """Pointwise allowance and the realized gaps of a perturbation.

    The invariant certified on the verification grid: at every sample,
    max(realized C0 gap, realized C1 gap) < xi * gap_u * Q(x)^2 * Q(f(x)).
    """

    xi: callable
    realized_c0_gap: callable
    realized_c1_gap: callable
    worst_ratio: float
    worst_point: np.ndarray
    n_checked: int

    def summary(self):
        return {
            "worst_ratio": float(self.worst_ratio),
            "worst_point": [float(c) for c in self.worst_point],
            "n_checked": int(self.n_checked),
        }


def perturbation_bound(f_sys, sp, points, xi0=0.5, refine=False):
    """Pointwise perturbation allowance xi * gap_u(x) * Q(x)^2 * Q(f(x))."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d_x = np.atleast_1d(geometry.boundary_dist(points, f_sys.domain))
    d_fx = np.atleast_1d(geometry.boundary_dist(f_sys.forward(points), f_sys.domain))
    gap = scales.target_gap_batch(sp, f_sys, points, side="u", refine=refine)
    q_x = scales.chart_radius(sp, d_x)
    q_fx = scales.chart_radius(sp, d_fx)
    return xi0 * gap * q_x**2 * q_fx


def build_perturbation(
    f_sys,
    sp,
    bump_center,
    bump_amplitude,
    bump_radius,
    direction=(1.0, 0.0),
    xi0=0.5,
    verify_resolution=64,
):
    """Add a compactly supported smooth bump to f after the map.

    g(x) = f(x) + amplitude * mollifier(d(x, center)/radius) * direction, so
    g and f share the identical code path outside the support.  The realized
    C0 and C1 gaps are checked against the pointwise budget on a verification
    grid refined inside the support; an amplitude too large for the budget is
    rejected with the worst offending sample.
    """
    center = geometry.wrap(np.asarray(bump_center, dtype=float))
    radius = float(bump_radius)
    amp = float(bump_amplitude)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if radius <= 0 or radius >= 0.25:
        raise ValueError("bump_radius must lie in (0, 0.25)")
    if f_sys.domain.kind == "complement":
        d_edge = np.min(geometry.torus_dist(center, f_sys.domain.excluded_points))
        if d_edge <= radius + sp.r0:
            raise SupportTouchesBoundary(
                f"bump support within r0-neighborhood of the boundary "
                f"(center gap {d_edge:.4g}, needs > {radius + sp.r0:.4g})"
            )

    def displacement(x):
        t = geometry.torus_dist(x, center) / radius
        return amp * _mollifier(t)

    def derivative_gap(x):
        t = geometry.torus_dist(x, center) / radius
        return np.abs(amp) * np.abs(_mollifier_deriv(t)) / radius

    def bump(x):
        x = np.asarray(x, dtype=float)
        chi = _mollifier(geometry.torus_dist(x, center) / radius)
        return chi[..., None] * (amp * direction)

    def bump_jac(x):
        x = np.asarray(x, dtype=float)
        off = geometry.shortest_rep(x - center)
        d = np.linalg.norm(off, axis=-1)
        t = d / radius
        dchi = _mollifier_deriv(t) / radius
        with np.errstate(invalid="ignore", divide="ignore"):
            grad_d = np.where(d[..., None] > 0, off / np.where(d[..., None] > 0, d[..., None], 1.0), 0.0)
        return amp * dchi[..., None, None] * direction[:, None] * grad_d[..., None, :]

    def forward(x):
        x = np.asarray(x, dtype=float)
        base = f_sys.forward(x)
        chi = _mollifier(geometry.torus_dist(x, center) / radius)
        if np.all(chi == 0.0):
            return base
        return geometry.wrap(base + chi[..., None] * (amp * direction))

    def jacobian(x):
        return f_sys.jacobian(x) + bump_jac(x)

    def backward(y):
        y = np.asarray(y, dtype=float)
        z = f_sys.backward(y)
        # Newton refinement of g(z) = y; converges in a few steps at these
        # amplitudes since Dg is uniformly invertible.
        for _ in range(12):
            r = geometry.shortest_rep(forward(z) - y)
            if np.max(np.abs(r)) < 1e-15:
                break
            J = jacobian(z)
            z = geometry.wrap(z - np.linalg.solve(J, r[..., None])[..., 0])
        return z

    def jacobian_inv(y):
        return np.linalg.inv(jacobian(backward(y)))

    g_sys = SystemSpec(
        name=f_sys.name + "+bump",
        forward=forward,
        backward=backward,
        jacobian=jacobian,
        jacobian_inv=jacobian_inv,
        domain=f_sys.domain,
        holder_alpha=f_sys.holder_alpha,
    )

    # verification grid plus a refinement inside the support
    n = verify_resolution
    axis = (np.arange(n) + 0.5) / n
    gu, gv = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gu.ravel(), gv.ravel()], axis=-1)
    local = center + np.stack(
        np.meshgrid(np.linspace(-radius, radius, 17), np.linspace(-radius, radius, 17), indexing="ij"),
        axis=-1,
    ).reshape(-1, 2)
    pts = np.vstack([pts, geometry.wrap(local)])
    if f_sys.domain.kind == "complement":
        keep = np.atleast_1d(geometry.boundary_dist(pts, f_sys.domain)) > 1e-6
        pts = pts[keep]

    bound = perturbation_bound(f_sys, sp, pts, xi0=xi0)
    realized = np.maximum(displacement(pts), derivative_gap(pts))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(realized > 0, realized / bound, 0.0)
    i = int(np.argmax(ratio))
    if amp != 0.0 and ratio[i] >= 1.0:
        raise BudgetExceeded(
            f"perturbation exceeds the pointwise budget by factor {ratio[i]:.3g} "
            f"at {pts[i]}",
            point=pts[i],
            ratio=float(ratio[i]),
        )

    budget = PerturbationBudget(
        xi=lambda x: np.full(np.asarray(x).shape[:-1], xi0),
        realized_c0_gap=displacement,
        realized_c1_gap=derivative_gap,
        worst_ratio=float(ratio[i]),
        worst_point=pts[i],
        n_checked=int(pts.shape[0]),
    )
    return g_sys, budget


def amplitude_for_budget_fraction(f_sys, sp, center, radius, fraction, resolution=33):
    """Largest bump amplitude whose realized gaps sit at ``fraction`` of budget."""
    center = geometry.wrap(np.asarray(center, dtype=float))
    offs = np.stack(
        np.meshgrid(
            np.linspace(-radius, radius, resolution),
            np.linspace(-radius, radius, resolution),
            indexing="ij",
        ),
        axis=-1,
    ).reshape(-1, 2)
    pts = geometry.wrap(center + offs)
    t = geometry.torus_dist(pts, center) / radius
    chi = _mollifier(t)
    dchi = np.abs(_mollifier_deriv(t)) / radius
    weight = np.maximum(chi, dchi)
    keep = weight > 1e-12
    if f_sys.domain.kind == "complement":
        keep &= np.atleast_1d(geometry.boundary_dist(pts, f_sys.domain)) > 1e-6
    bound = perturbation_bound(f_sys, sp, pts[keep], xi0=0.5)
    return float(fraction * np.min(bound / weight[keep]))


# --- derivative bound and assumption verification --------------------------------


def estimate_cf(system, resolution=64, d_min=1e-3):
    """Grid estimate of max over the torus of max(|Df|, |Df^-1|) (operator norms)."""
    axis = (np.arange(resolution) + 0.5) / resolution
    gu, gv = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gu.ravel(), gv.ravel()], axis=-1)
    if system.domain.kind == "complement":
        pts = pts[np.atleast_1d(geometry.boundary_dist(pts, system.domain)) > d_min]
    nf = np.linalg.svd(system.jacobian(pts), compute_uv=False)[..., 0]
    nb = np.linalg.svd(system.jacobian_inv(pts), compute_uv=False)[..., 0]
    return float(max(np.max(nf), np.max(nb)))


def validate_system(system, n_samples=10_000, seed=0, roundtrip_tol=1e-10, jac_tol=1e-8):
    """Spot-check the SystemSpec invariants on random samples.

    Round trip backward(forward(x)) = x, derivative consistency
    jacobian_inv(f(x)) jacobian(x) = I, and invariance of the excluded set.
    Returns the worst deviations; raises nothing.
    """
    rng = np.random.default_rng(seed)
    pts = rng.random((n_samples, 2))
    if system.domain.kind == "complement":
        pts = pts[np.atleast_1d(geometry.boundary_dist(pts, system.domain)) > 1e-3]
    rt = np.max(geometry.torus_dist(system.backward(system.forward(pts)), pts))
    prod = np.einsum("nij,njk->nik", system.jacobian_inv(system.forward(pts)), system.jacobian(pts))
    jc = np.max(np.abs(prod - np.eye(2)))
    exc_ok = True
    if system.domain.kind == "complement":
        ex = system.domain.excluded_points
        img = geometry.wrap(np.atleast_2d(system.forward(ex)))
        dists = geometry.torus_dist(img[:, None, :], ex[None, :, :])
        exc_ok = bool(np.all(np.min(dists, axis=-1) < 1e-9))
    return {
        "roundtrip_max": float(rt),
        "jacobian_consistency_max": float(jc),
        "roundtrip_ok": bool(rt <= roundtrip_tol),
        "jacobian_ok": bool(jc <= jac_tol),
        "excluded_set_invariant": exc_ok,
    }


@dataclass
class AssumptionReport:
    """Verdicts for the structural assumptions on one system.

    Each entry carries its own PASS flag, worst-case slack and a witness
    point, so a FAIL is always reproducible from the stored data.
    """

    products_u: dict
    products_s: dict
    boundary_growth_u: dict
    boundary_growth_s: dict
    regularity: dict
    aperture_transport: dict

    def all_passed(self):
        return all(
            section["passed"]
            for section in (
                self.products_u,
                self.products_s,
                self.boundary_growth_u,
                self.boundary_growth_s,
                self.regularity,
                self.aperture_transport,
            )
        )

    def summary(self):
        def clean(section):
            out = {}
            for k, v in section.items():
                if isinstance(v, np.ndarray):
                    out[k] = [float(c) for c in np.ravel(v)[:4]]
                elif isinstance(v, (np.floating, float)):
                    out[k] = float(v)
                elif isinstance(v, (np.bool_, bool)):
                    out[k] = bool(v)
                elif isinstance(v, (np.integer, int)):
                    out[k] = int(v)
                else:
                    out[k] = v
            return out

        return {
            "products_u": clean(self.products_u),
            "products_s": clean(self.products_s),
            "boundary_growth_u": clean(self.boundary_growth_u),
            "boundary_growth_s": clean(self.boundary_growth_s),
            "regularity": clean(self.regularity),
            "aperture_transport": clean(self.aperture_transport),
            "all_passed": bool(self.all_passed()),
        }


def _truncated_products(system, sp, points, window, side):
    """Truncated expansion products along forward (side u) or backward orbits."""
    from . import splitting as splitting_mod

    points = np.atleast_2d(points)
    sys_dir = system if side == "u" else system.inverse()
    orbit = [points]
    for _ in range(window):
        orbit.append(sys_dir.forward(orbit[-1]))
    stacked = np.concatenate(orbit[:-1], axis=0)
    spl = splitting_mod.compute_splitting_batch(
        sys_dir, stacked, n_iters=splitting_mod.RATE_ITERS,
        tol=splitting_mod.RATE_TOL, stall_tol=splitting_mod.RATE_STALL,
    )
    rates = spl.m_u.reshape(window, points.shape[0])
    return np.prod(rates, axis=0)


def _growth_fit(system, sp, samples, side):
    """Fit the boundary growth constant on samples within r0 of the boundary.

    For each gated sample compares the expansion excess m - 1 with
    max(d^beta, (d_image/d)^gamma - 1); the fitted constant is the worst
    quotient.  Vacuous (PASS) when no sample is gated.
    """
    from . import splitting as splitting_mod

    sys_dir = system if side == "u" else system.inverse()
    d = np.atleast_1d(geometry.boundary_dist(samples, system.domain))
    gate = d <= sp.r0
    if not np.any(gate):
        return {
            "passed": True,
            "vacuous": True,
            "fitted_constant": math.inf,
            "configured_floor": sp.c_u if side == "u" else sp.c_s,
            "worst_slack": math.inf,
            "witness": np.full(2, np.nan),
            "n_gated": 0,
        }
    pts = np.atleast_2d(samples)[gate]
    d = d[gate]
    # only the expanding direction and rate are needed here
    e_u = splitting_mod._power_direction(
        sys_dir, pts, splitting_mod.RATE_ITERS, splitting_mod.RATE_TOL,
        stall_tol=splitting_mod.RATE_STALL,
    )
    m_u = np.linalg.norm(np.einsum("nij,nj->ni", sys_dir.jacobian(pts), e_u), axis=-1)
    excess = m_u - 1.0
    img = sys_dir.forward(pts)
    d_img = np.atleast_1d(geometry.boundary_dist(img, system.domain))
    rhs = np.maximum(d**sp.beta, (d_img / d) ** sp.gamma - 1.0)
    fitted = excess / rhs
    i = int(np.argmin(fitted))
    floor = sp.c_u if side == "u" else sp.c_s
    return {
        "passed": bool(fitted[i] > 1.0),
        "vacuous": False,
        "fitted_constant": float(fitted[i]),
        "configured_floor": floor,
        "worst_slack": float(fitted[i] - 1.0),
        "witness": pts[i],
        "n_gated": int(pts.shape[0]),
    }


def verify_assumptions(
    system,
    sp,
    sample_resolution=24,
    window=20,
    d_min=1e-3,
    product_threshold=PRODUCT_THRESHOLD,
    growth_samples=None,
):
    """Numerical certification of the structural assumptions.

    Truncated orbit products stand in for the divergence conditions: the
    partial product over ``window`` steps must exceed ``product_threshold``.
    The near-boundary growth inequalities are fitted on gated samples (or on
    ``growth_samples`` when provided), the regularity relation is arithmetic,
    and the aperture-transport inequality is evaluated at each sample and its
    image.
    """
    from . import splitting as splitting_mod

    axis = (np.arange(sample_resolution) + 0.5) / sample_resolution
    gu, gv = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gu.ravel(), gv.ravel()], axis=-1)
    keep = np.atleast_1d(geometry.boundary_dist(pts, system.domain)) > d_min
    pts = pts[keep]

    prod_u = _truncated_products(system, sp, pts, window, "u")
    prod_s = _truncated_products(system, sp, pts, window, "s")
    iu, isx = int(np.argmin(prod_u)), int(np.argmin(prod_s))
    products_u = {
        "passed": bool(prod_u[iu] > product_threshold),
        "min_product": float(prod_u[iu]),
        "threshold": product_threshold,
        "window": window,
        "witness": pts[iu],
    }
    products_s = {
        "passed": bool(prod_s[isx] > product_threshold),
        "min_product": float(prod_s[isx]),
        "threshold": product_threshold,
        "window": window,
        "witness": pts[isx],
    }

    gsamples = pts if growth_samples is None else np.atleast_2d(growth_samples)
    growth_u = _growth_fit(system, sp, gsamples, "u")
    growth_s = _growth_fit(system, sp, gsamples, "s")

    margin = sp.regularity_margin
    regularity = {"passed": bool(margin > 0), "margin": float(margin)}

    spl_x = splitting_mod.compute_splitting_batch(
        system, pts, n_iters=splitting_mod.RATE_ITERS,
        tol=splitting_mod.RATE_TOL, stall_tol=splitting_mod.RATE_STALL,
    )
    img = system.forward(pts)
    spl_fx = splitting_mod.compute_splitting_batch(
        system, img, n_iters=splitting_mod.RATE_ITERS,
        tol=splitting_mod.RATE_TOL, stall_tol=splitting_mod.RATE_STALL,
    )
    bud_x = sp.eps * scales.budget_scale(
        sp, np.atleast_1d(geometry.boundary_dist(pts, system.domain))
    )
    bud_fx = sp.eps * scales.budget_scale(
        sp, np.atleast_1d(geometry.boundary_dist(img, system.domain))
    )
    lhs = spl_x.n_s / spl_x.m_u
    frac1 = (spl_x.n_s + bud_x + 1.0) / (spl_fx.n_s + bud_fx + 1.0)
    frac2 = (spl_fx.m_u - bud_fx - 1.0) / (spl_x.m_u - bud_x - 1.0)
    rhs = frac1 * frac2
    margin_k = rhs - lhs
    ik = int(np.argmin(margin_k))
    aperture_transport = {
        "passed": bool(margin_k[ik] > 0),
        "min_margin": float(margin_k[ik]),
        "max_fraction_deviation": float(np.max(np.abs(frac1 * frac2 - 1.0))),
        "witness": pts[ik],
        "n_samples": int(pts.shape[0]),
    }

    return AssumptionReport(
        products_u=products_u,
        products_s=products_s,
        boundary_growth_u=growth_u,
        boundary_growth_s=growth_s,
        regularity=regularity,
        aperture_transport=aperture_transport,
    )
