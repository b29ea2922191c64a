"""Local charts between nearby points and the graph transforms on them.

A chart pair (x, y) with y near f(x) induces a map of tangent squares
F(v) = exp_y^{-1}(f(exp_x(v))) expressed in the splitting frames at both
ends.  Its linear blocks track the rates to within the pointwise budget, and
pushing the graph of a representing function through F and re-solving for a
graph is the transform that contracts toward local invariant manifolds.

Representing functions are discretized on a fixed 257-point uniform grid
over [-Q, Q]; evaluation between nodes uses shape-preserving cubic
interpolation and the expanding coordinate is inverted by in-cell bisection.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import geometry, scales, splitting as splitting_mod
from .numerics import (
    GridInterpolant,
    fd_derivative,
    invert_monotone,
    holder_seminorm,
    holder_seminorm_upper_bound,
    spectral_norm_2x2,
)
from .errors import (
    TargetTooFar,
    GraphFoldover,
    OutputNotAdmissible,
    IdenticalInputs,
    CannotSatisfyEstimates,
)

#: Nodes per representing function; resolves chart scales ~1e-2 far below
#: every tolerance budget.
N_GRID = 257

#: Hoelder quotients are measured only for separations >= this many cells.
HOLDER_MIN_LAG = 4

#: Cap on |phi(0)| relative to the chart radius.
CENTER_FRACTION = 1e-3

_BISECT_ITERS = 30

#: Direction accuracy for probe splittings inside gap refinement; the block
#: deviations being certified sit at the budget scale ~1e-2, so probe frames
#: a few orders below that are already beyond measurement relevance, and the
#: loose tolerance avoids stalls where the cocycle converges only
#: algebraically.
_PROBE_TOL = 1e-6
_PROBE_ITERS = 200


# --- admissible manifolds -----------------------------------------------------


@dataclass
class AdmissibleManifold:
    """Discretized representing function over one splitting direction.

    kind 'u': graph over the unstable coordinate with stable values;
    kind 's': graph over the stable coordinate with unstable values.
    ``phi`` holds node values on the uniform grid over [-radius, radius]
    in the coordinates of ``frame`` (a Splitting at ``base``).
    """

    base: np.ndarray
    kind: str
    radius: float
    frame: splitting_mod.Splitting
    phi: np.ndarray
    dphi: np.ndarray

    @property
    def n(self):
        return self.phi.size

    @property
    def spacing(self):
        return 2.0 * self.radius / (self.n - 1)

    def grid(self):
        return np.linspace(-self.radius, self.radius, self.n)

    def interpolant(self):
        return GridInterpolant.on_symmetric_grid(self.radius, self.phi)

    def value_at_center(self):
        return float(self.phi[(self.n - 1) // 2])

    def sup_diff(self, other):
        return float(np.max(np.abs(self.phi - other.phi)))

    def aligned_to(self, target_frame):
        """Re-express in another sign choice of the same frame.

        A flipped graph coordinate reverses the grid; a flipped value
        direction negates phi.  Raises if the frames differ by more than
        signs.
        """
        if self.kind == "u":
            coord_self, coord_tgt = self.frame.e_u, target_frame.e_u
            val_self, val_tgt = self.frame.e_s, target_frame.e_s
        else:
            coord_self, coord_tgt = self.frame.e_s, target_frame.e_s
            val_self, val_tgt = self.frame.e_u, target_frame.e_u
        sc = float(np.dot(coord_self, coord_tgt))
        sv = float(np.dot(val_self, val_tgt))
        if not (abs(abs(sc) - 1.0) < 1e-9 and abs(abs(sv) - 1.0) < 1e-9):
            raise ValueError("frames differ by more than a sign choice")
        phi = self.phi[::-1].copy() if sc < 0 else self.phi.copy()
        dphi = self.dphi[::-1].copy() if sc < 0 else self.dphi.copy()
        if sc < 0:
            dphi = -dphi
        if sv < 0:
            phi, dphi = -phi, -dphi
        return AdmissibleManifold(
            base=self.base, kind=self.kind, radius=self.radius,
            frame=target_frame, phi=phi, dphi=dphi,
        )


def make_manifold(base, kind, radius, frame, phi, n=N_GRID):
    """Manifold from a callable or array of node values; derivative by FD."""
    if callable(phi):
        phi = phi(np.linspace(-radius, radius, n))
    phi = np.asarray(phi, dtype=float)
    dphi = fd_derivative(phi, 2.0 * radius / (phi.size - 1))
    return AdmissibleManifold(
        base=np.asarray(base, dtype=float), kind=kind, radius=float(radius),
        frame=frame, phi=phi, dphi=dphi,
    )


def zero_manifold(base, kind, radius, frame, n=N_GRID):
    return AdmissibleManifold(
        base=np.asarray(base, dtype=float), kind=kind, radius=float(radius),
        frame=frame, phi=np.zeros(n), dphi=np.zeros(n),
    )


def random_admissible_manifold(rng, sp, base, kind, radius, frame, n=N_GRID):
    """Smooth random graph well inside the admissibility bounds.

    Linear part plus a wave anchored at the origin so the center bound is
    controlled by the offset draw alone; amplitudes keep the slope and the
    Hoelder mass at a fraction of their caps.
    """
    offset = rng.uniform(-0.9, 0.9) * CENTER_FRACTION * radius
    slope = rng.uniform(-0.3, 0.3) * np.sqrt(sp.eps)
    omega = rng.uniform(1.0, 3.0)
    amp = rng.uniform(0.0, 0.03) * np.sqrt(sp.eps) * radius / omega
    phase = rng.uniform(0.0, 2 * np.pi)

    def f(v):
        wave = np.sin(omega * v / radius + phase) - np.sin(phase)
        return offset + slope * v + amp * wave

    w = make_manifold(base, kind, radius, frame, f, n=n)
    ok, _ = admissibility_check(w, sp)
    if not ok:
        raise OutputNotAdmissible("random manifold construction out of bounds")
    return w


def admissibility_check(w: AdmissibleManifold, sp):
    """The three graph bounds; returns (ok, details with slacks).

    center:  |phi(0)| <= 1e-3 * radius
    slope:   max |Dphi| <= sqrt(eps)
    regularity: max |Dphi| + discrete Hoelder-(delta/2) seminorm <= 1/2,
    the seminorm taken over node pairs at least HOLDER_MIN_LAG cells apart.
    """
    center = abs(w.value_at_center())
    center_cap = CENTER_FRACTION * w.radius
    slope = float(np.max(np.abs(w.dphi)))
    slope_cap = float(np.sqrt(sp.eps))
    expo = sp.delta / 2.0
    min_sep = HOLDER_MIN_LAG * w.spacing
    hol_ub = holder_seminorm_upper_bound(w.dphi, expo, min_sep)
    if slope + hol_ub <= 0.5:
        hol = hol_ub  # upper bound already certifies the cap
        exact = False
    else:
        hol = holder_seminorm(w.dphi, w.grid(), expo, min_sep)
        exact = True
    reg = slope + hol
    details = {
        "center": center,
        "center_cap": center_cap,
        "slope": slope,
        "slope_cap": slope_cap,
        "regularity": reg,
        "regularity_cap": 0.5,
        "holder_exact": exact,
        "tightest": min(
            ("center", center_cap - center),
            ("slope", slope_cap - slope),
            ("regularity", 0.5 - reg),
            key=lambda kv: kv[1],
        )[0],
    }
    ok = center <= center_cap and slope <= slope_cap and reg <= 0.5
    return ok, details


# --- local charts ---------------------------------------------------------------


@dataclass
class LocalMapData:
    """Chart map data for one step x -> y of the directed system.

    Blocks are the entries of the derivative at the chart origin in the
    splitting frames (domain frame at x, sign-aligned range frame at y);
    ``offset`` is the image of the origin, ``remainder`` the nonlinear part
    (vanishing with its derivative at the origin), and ``push`` evaluates the
    full chart map on frame coordinates, vectorized over rows.
    """

    x: np.ndarray
    y: np.ndarray
    d_uu: float
    d_us: float
    d_su: float
    d_ss: float
    offset: np.ndarray
    remainder: callable
    push: callable
    dpush: callable
    frame_x: splitting_mod.Splitting
    frame_y: splitting_mod.Splitting
    q_x: float
    q_y: float
    budget_x: float
    gap: float
    holder_expo: float


def _flip_columns(spl, flip_u, flip_s):
    return replace(
        spl,
        e_u=-spl.e_u if flip_u else spl.e_u,
        e_s=-spl.e_s if flip_s else spl.e_s,
    )


def local_map(system, sp, x, y, splitting_x=None, splitting_y=None, gap_bound=None):
    """Chart map data for the pair (x, y) with y near the image of x.

    ``system`` is the directed map (pass ``system.inverse()`` with swapped
    splittings for the backward charts).  The target must satisfy
    d(f(x), y) < gap_bound; when no bound is supplied the certified chart
    gap at x is computed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = system.forward(x)
    gap = float(geometry.torus_dist(fx, y))
    if gap_bound is None:
        gap_bound = scales.target_gap(sp, system, x, side="u", refine=True)
    if gap >= gap_bound:
        raise TargetTooFar(f"d(f(x), y) = {gap:.3g} >= allowed gap {gap_bound:.3g}")
    if splitting_x is None:
        splitting_x = splitting_mod.compute_splitting(system, x)
    if splitting_y is None:
        splitting_y = splitting_mod.compute_splitting(system, y)

    d_x = geometry.boundary_dist(x, system.domain)
    d_y = geometry.boundary_dist(y, system.domain)
    q_x = float(scales.chart_radius(sp, d_x))
    q_y = float(scales.chart_radius(sp, d_y))
    budget_x = float(sp.eps * scales.budget_scale(sp, d_x))

    R_x = splitting_x.frame()
    J = system.jacobian(x)
    B = np.linalg.solve(splitting_y.frame(), J @ R_x)
    flip_u, flip_s = B[0, 0] < 0, B[1, 1] < 0
    frame_y = _flip_columns(splitting_y, flip_u, flip_s)
    R_y = frame_y.frame()
    R_y_inv = np.linalg.inv(R_y)
    B = R_y_inv @ J @ R_x
    offset = R_y_inv @ geometry.log_map(y, fx)

    def push(vcoords):
        vcoords = np.atleast_2d(np.asarray(vcoords, dtype=float))
        pts = geometry.wrap(x + vcoords @ R_x.T)
        images = system.forward(pts)
        return geometry.shortest_rep(images - y) @ R_y_inv.T

    def dpush(vcoords):
        vcoords = np.atleast_2d(np.asarray(vcoords, dtype=float))
        pts = geometry.wrap(x + vcoords @ R_x.T)
        return np.einsum("ij,njk,kl->nil", R_y_inv, system.jacobian(pts), R_x)

    def remainder(vcoords):
        vcoords = np.atleast_2d(np.asarray(vcoords, dtype=float))
        return push(vcoords) - vcoords @ B.T - offset

    return LocalMapData(
        x=x, y=y,
        d_uu=float(B[0, 0]), d_us=float(B[0, 1]),
        d_su=float(B[1, 0]), d_ss=float(B[1, 1]),
        offset=offset,
        remainder=remainder,
        push=push,
        dpush=dpush,
        frame_x=splitting_x,
        frame_y=frame_y,
        q_x=q_x, q_y=q_y,
        budget_x=budget_x,
        gap=gap,
        holder_expo=sp.delta / 2.0,
    )


def local_map_backward(system, sp, x, y, splitting_x=None, splitting_y=None, gap_bound=None):
    """Chart data of the inverse map for the step y -> x.

    Precondition d(f^-1(y), x) < gap_bound with the stable-side gap at y.
    The returned data is a forward chart of ``system.inverse()``, so all
    graph machinery applies unchanged with u and s roles swapped.
    """
    return local_map(
        system.inverse(), sp, np.asarray(y, float), np.asarray(x, float),
        splitting_x=None if splitting_y is None else splitting_y.swapped(),
        splitting_y=None if splitting_x is None else splitting_x.swapped(),
        gap_bound=gap_bound,
    )


def block_estimates(lm: LocalMapData, sp, n_interior=5):
    """Check the chart-derivative bounds of the local map against the budget.

    Four block bounds (off-diagonals small, diagonals tracking the rates),
    the remainder derivative bound over a sample of the chart square, and
    the Hoelder increment bound on the remainder derivative.  Returns a dict
    with per-bound slacks and the overall verdict.
    """
    bud = lm.budget_x
    m_u, n_s = float(lm.frame_x.m_u), float(lm.frame_x.n_s)
    vals = {
        "off_us": bud - abs(lm.d_us),
        "off_su": bud - abs(lm.d_su),
        "diag_uu": bud - abs(abs(lm.d_uu) - m_u),
        "diag_ss": bud - abs(abs(lm.d_ss) - n_s),
    }
    # remainder derivative on a coarse interior sample of the chart square,
    # exact through the system jacobian
    ax = np.linspace(-lm.q_x, lm.q_x, n_interior)
    vv, ww = np.meshgrid(ax, ax, indexing="ij")
    sample = np.stack([vv.ravel(), ww.ravel()], axis=-1)
    B = np.array([[lm.d_uu, lm.d_us], [lm.d_su, lm.d_ss]])
    Dphi = lm.dpush(sample) - B
    norms = spectral_norm_2x2(Dphi)
    vals["remainder_lipschitz"] = bud - float(np.max(norms))
    diff = spectral_norm_2x2(Dphi[:, None] - Dphi[None, :])
    sep = np.linalg.norm(sample[:, None] - sample[None, :], axis=-1)
    mask = sep > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(mask, diff / np.where(mask, sep, 1.0) ** lm.holder_expo, 0.0)
    vals["remainder_holder"] = bud - float(np.max(quot))
    worst = min(vals, key=vals.get)
    return {
        "passed": bool(all(v >= 0 for v in vals.values())),
        "slacks": vals,
        "worst_bound": worst,
        "worst_slack": float(vals[worst]),
        "budget": bud,
    }


def refine_gaps(system, sp, points, base_gaps, side="u", splittings=None):
    """Certified chart gaps: halve until probe-target blocks meet the budget.

    For each point the probes are the exact image and four offsets of the
    candidate gap along the image frame.  Only the block bounds depend on
    the gap; the remainder bounds depend on the chart square alone, so a
    remainder failure cannot be cured by halving and raises immediately.
    """
    sys_dir = system if side == "u" else system.inverse()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    gaps = np.array(base_gaps, dtype=float).copy()
    if splittings is None:
        spl_x = splitting_mod.compute_splitting_batch(
            sys_dir, points, n_iters=_PROBE_ITERS, tol=_PROBE_TOL,
            stall_tol=splitting_mod.RATE_STALL,
        )
    else:
        spl_x = splittings if side == "u" else splittings.swapped()
    images = np.atleast_2d(sys_dir.forward(points))
    J = sys_dir.jacobian(points)
    # invariance makes the pushforwards of the base directions excellent
    # warm starts for the image and probe splittings
    seed_u = np.einsum("nij,nj->ni", J, spl_x.e_u)
    seed_u /= np.linalg.norm(seed_u, axis=-1, keepdims=True)
    seed_s = np.einsum("nij,nj->ni", J, spl_x.e_s)
    seed_s /= np.linalg.norm(seed_s, axis=-1, keepdims=True)
    spl_img = splitting_mod.compute_splitting_batch(
        sys_dir, images, n_iters=_PROBE_ITERS, tol=_PROBE_TOL,
        stall_tol=splitting_mod.RATE_STALL, seeds_u=seed_u, seeds_s=seed_s,
    )
    R_x = spl_x.frame()
    bud = sp.eps * scales.budget_scale(
        sp, np.atleast_1d(geometry.boundary_dist(points, system.domain))
    )

    # remainder bound via jacobian variation over the chart square (gap-free)
    d_x = np.atleast_1d(geometry.boundary_dist(points, system.domain))
    q_x = scales.chart_radius(sp, d_x)
    offs = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0], [0.7, 0.0], [0.0, -0.7]])
    chart_offs = np.einsum("nij,kj->nki", R_x, offs) * q_x[:, None, None]
    sq = points[:, None, :] + chart_offs
    Jsq = sys_dir.jacobian(geometry.wrap(sq.reshape(-1, 2))).reshape(n, offs.shape[0], 2, 2)
    dev = np.einsum("nij,nkjl,nlm->nkim", np.linalg.inv(spl_img.frame()), Jsq - J[:, None], R_x)
    rem = np.max(spectral_norm_2x2(dev), axis=-1)
    pair_diff = spectral_norm_2x2(dev[:, :, None] - dev[:, None, :])
    pair_sep = np.linalg.norm(chart_offs[:, :, None] - chart_offs[:, None, :], axis=-1)
    expo = sp.delta / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        hol = np.max(
            np.where(pair_sep > 0, pair_diff / np.where(pair_sep > 0, pair_sep, 1.0) ** expo, 0.0),
            axis=(-2, -1),
        )
    bad = (rem > bud) | (hol > bud)
    if np.any(bad):
        raise CannotSatisfyEstimates(
            f"remainder bounds exceed the budget at {int(np.sum(bad))} "
            f"point(s); worst ratio {float(np.max(np.maximum(rem, hol) / bud)):.3g} "
            f"(chart too large; shrink eps)"
        )

    active = np.ones(n, dtype=bool)
    for _ in range(scales.MAX_GAP_HALVINGS):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        # the exact image is probe zero; its splitting is already in hand
        probes = np.concatenate(
            [
                geometry.wrap(images[idx] + gaps[idx, None] * 0.9 * spl_img.e_u[idx]),
                geometry.wrap(images[idx] - gaps[idx, None] * 0.9 * spl_img.e_u[idx]),
                geometry.wrap(images[idx] + gaps[idx, None] * 0.9 * spl_img.e_s[idx]),
                geometry.wrap(images[idx] - gaps[idx, None] * 0.9 * spl_img.e_s[idx]),
            ],
            axis=0,
        )
        spl_p = splitting_mod.compute_splitting_batch(
            sys_dir, probes, n_iters=_PROBE_ITERS, tol=_PROBE_TOL,
            stall_tol=splitting_mod.RATE_STALL,
            seeds_u=np.tile(spl_img.e_u[idx], (4, 1)),
            seeds_s=np.tile(spl_img.e_s[idx], (4, 1)),
        )
        k = idx.size
        Rp = np.concatenate(
            [spl_img.frame()[idx][None], spl_p.frame().reshape(4, k, 2, 2)], axis=0
        )
        B = np.linalg.solve(Rp, np.einsum("nij,njk->nik", J[idx], R_x[idx])[None])
        dev_uu = np.abs(np.abs(B[..., 0, 0]) - spl_x.m_u[idx])
        dev_ss = np.abs(np.abs(B[..., 1, 1]) - spl_x.n_s[idx])
        dev_us = np.abs(B[..., 0, 1])
        dev_su = np.abs(B[..., 1, 0])
        worst = np.max(
            np.stack([dev_uu, dev_ss, dev_us, dev_su], axis=0), axis=(0, 1)
        )
        ok = worst <= bud[idx]
        active[idx[ok]] = False
        gaps[idx[~ok]] *= 0.5
    if np.any(active):
        raise CannotSatisfyEstimates(
            f"block estimates still failing after {scales.MAX_GAP_HALVINGS} halvings "
            f"at {int(np.sum(active))} point(s)"
        )
    return gaps


# --- graph transforms -----------------------------------------------------------


def _transform_core(lm: LocalMapData, w: AdmissibleManifold, sp, step_bound=None):
    """Push a graph through the chart map and re-solve for a graph."""
    if step_bound is not None and lm.gap >= step_bound:
        raise TargetTooFar(
            f"chart gap {lm.gap:.3g} violates the step bound {step_bound:.3g}"
        )
    w_local = w if w.frame is lm.frame_x else w.aligned_to(lm.frame_x)
    vgrid = w_local.grid()
    out = lm.push(np.stack([vgrid, w_local.phi], axis=-1))
    G, L = out[:, 0], out[:, 1]
    dG = np.diff(G)
    if np.any(dG <= 0):
        raise GraphFoldover("expanding coordinate of the image is not increasing")
    if G[0] > -lm.q_y or G[-1] < lm.q_y:
        raise OutputNotAdmissible(
            f"image spans [{G[0]:.3g}, {G[-1]:.3g}], does not cover the "
            f"target chart radius {lm.q_y:.3g}",
            bound="coverage",
        )
    targets = np.linspace(-lm.q_y, lm.q_y, w_local.n)
    g_interp = GridInterpolant.on_symmetric_grid(w_local.radius, G)
    v_star = invert_monotone(g_interp, targets, n_bisect=_BISECT_ITERS, check=False)
    l_interp = GridInterpolant.on_symmetric_grid(w_local.radius, L)
    phi_out = l_interp(v_star)
    dphi_out = fd_derivative(phi_out, 2.0 * lm.q_y / (w_local.n - 1))
    result = AdmissibleManifold(
        base=lm.y, kind=w.kind, radius=lm.q_y,
        frame=lm.frame_y, phi=phi_out, dphi=dphi_out,
    )
    ok, details = admissibility_check(result, sp)
    if not ok:
        raise OutputNotAdmissible(
            f"transform output violates the {details['tightest']} bound",
            bound=details["tightest"],
        )
    return result


def graph_transform_u(lm: LocalMapData, w: AdmissibleManifold, sp, step_bound=None):
    """Unstable transform: u-graph at x to u-graph at y through the map.

    ``lm`` must be the forward chart for (x, y); the pseudo-orbit step bound
    may be passed to enforce the tight gap precondition.
    """
    if w.kind != "u":
        raise ValueError("graph_transform_u expects a u-manifold")
    return _transform_core(lm, w, sp, step_bound)


def graph_transform_s(lm_back: LocalMapData, w: AdmissibleManifold, sp, step_bound=None):
    """Stable transform: s-graph at y pulled back to an s-graph at x.

    ``lm_back`` is the backward chart (from ``local_map_backward``), whose
    expanding coordinate is the stable one, so the same core applies.
    """
    if w.kind != "s":
        raise ValueError("graph_transform_s expects an s-manifold")
    return _transform_core(lm_back, w, sp, step_bound)


def contraction_factor(lm: LocalMapData, w1, w2, sp, step_bound=None):
    """Measured sup-norm contraction of the transform on a manifold pair.

    Returns ||T w1 - T w2||_inf / ||w1 - w2||_inf on the common output grid;
    the theory bounds this by sqrt of the contracting rate at the base plus
    a grid-resolution allowance.
    """
    denom = w1.sup_diff(w2)
    if denom < 1e-15:
        raise IdenticalInputs("input manifolds coincide within 1e-15")
    t1 = _transform_core(lm, w1, sp, step_bound)
    t2 = _transform_core(lm, w2, sp, step_bound)
    return t1.sup_diff(t2) / denom


def linear_graph_slope_image(lm: LocalMapData, slope):
    """Closed-form slope map for affine charts: s -> (d_su + d_ss s)/(d_uu + d_us s)."""
    return (lm.d_su + lm.d_ss * slope) / (lm.d_uu + lm.d_us * slope)
