"""Global constants and the boundary-weighted scale functions.

Two pointwise scales drive every estimate in the toolkit: a smallness budget
proportional to a power of the boundary distance, and a chart radius that
shrinks faster.  Both are capped at their interior value once the boundary is
farther than ``r0``.  The module also certifies, on samples, the inequalities
that make the downstream machinery contract: budget below the hyperbolicity
margins, and stability of the chart radius under moves of one chart size.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .errors import NonpositiveBoundaryDistance, CannotSatisfyEstimates

#: Interior halving attempts before giving up on the chart gap.
MAX_GAP_HALVINGS = 20


@dataclass(frozen=True)
class ScaleParams:
    """Configuration constants for one system run.

    alpha   Hoelder exponent of the map's derivative, in (0, 1].
    beta    boundary exponent of the budget scale.
    gamma   boundary exponent of the chart radius, > max(1, beta/alpha).
    delta   regularity slack, 0 < delta < min(1, alpha - beta/gamma).
    eps     global smallness parameter.
    r0      boundary-distance cap.
    c_u/c_s configured floors for the boundary growth constants (> 1).
    c_f     uniform bound on the derivative norms of the map and its inverse.
    c_0     optional budget-margin constant; fitted by reports when None.
    rho     injectivity radius of the flat unit torus.
    """

    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 1.1
    delta: float = 0.2
    eps: float = 0.3
    r0: float = 0.25
    c_u: float = 1.05
    c_s: float = 1.05
    c_f: float = 2.618034
    c_0: float | None = None
    rho: float = geometry.INJECTIVITY_RADIUS

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.gamma <= max(1.0, self.beta / self.alpha):
            raise ValueError(
                f"gamma must exceed max(1, beta/alpha) = "
                f"{max(1.0, self.beta / self.alpha):.6g}, got {self.gamma}"
            )
        room = min(1.0, self.alpha - self.beta / self.gamma)
        if not (0 < self.delta < room):
            raise ValueError(
                f"delta must lie in (0, {room:.6g}) for regularity margin "
                f"alpha - beta/gamma = {self.alpha - self.beta / self.gamma:.6g}, "
                f"got {self.delta}"
            )
        if not (0 < self.eps < 1):
            raise ValueError("eps must lie in (0, 1)")
        if not (0 < self.r0):
            raise ValueError("r0 must be positive")
        if self.c_u <= 1 or self.c_s <= 1:
            raise ValueError("c_u and c_s must exceed 1")
        if self.c_f <= 1:
            raise ValueError("c_f must exceed 1")
        if (self.alpha - self.delta) * self.gamma < self.beta:
            raise ValueError(
                "(alpha - delta) * gamma must be >= beta so the chart radius "
                "stays below the budget"
            )

    @property
    def regularity_margin(self):
        """alpha - beta/gamma - delta; positive by construction."""
        return self.alpha - self.beta / self.gamma - self.delta

    def with_eps(self, eps):
        return replace(self, eps=eps)


def budget_scale(sp: ScaleParams, d_boundary):
    """Pointwise smallness budget: eps * min(r0, d)^beta, nondecreasing in d."""
    d = np.asarray(d_boundary, dtype=float)
    if np.any(d <= 0):
        raise NonpositiveBoundaryDistance("boundary distance must be positive")
    return sp.eps * np.minimum(sp.r0, d) ** sp.beta


def chart_radius(sp: ScaleParams, d_boundary):
    """Local chart/box radius: eps^(2/(alpha-delta)) * min(r0, d)^gamma.

    Stays strictly below both d^gamma and the budget's scale: Q < d^gamma
    follows from eps < 1 and Q^(alpha-delta) <= eps * budget from
    (alpha - delta) * gamma >= beta, both enforced at construction.
    """
    d = np.asarray(d_boundary, dtype=float)
    if np.any(d <= 0):
        raise NonpositiveBoundaryDistance("boundary distance must be positive")
    return sp.eps ** (2.0 / (sp.alpha - sp.delta)) * np.minimum(sp.r0, d) ** sp.gamma


def base_gap(sp: ScaleParams, d_boundary):
    """Unrefined chart gap: half of min(eps*budget, rho - sqrt(2)*c_f*Q)."""
    b = sp.eps * budget_scale(sp, d_boundary)
    q = chart_radius(sp, d_boundary)
    g = 0.5 * np.minimum(b, sp.rho - math.sqrt(2.0) * sp.c_f * q)
    if np.any(g <= 0):
        raise CannotSatisfyEstimates(
            "chart radius too large for the injectivity radius; shrink eps"
        )
    return g


def target_gap(sp: ScaleParams, system, x, side="u", refine=True, splitting=None):
    """Allowed chart-target offset at x (forward side 'u', backward side 's').

    Starts from the half-min formula and halves until the local block
    estimates pass at probe targets, so the returned gap is certified rather
    than merely asserted.  Raises after MAX_GAP_HALVINGS failed halvings.
    """
    gaps = target_gap_batch(
        sp,
        system,
        np.asarray(x, dtype=float)[None, :],
        side=side,
        refine=refine,
        splittings=None if splitting is None else splitting[None],
    )
    return float(gaps[0])


def target_gap_batch(sp: ScaleParams, system, points, side="u", refine=True, splittings=None):
    """Vectorized ``target_gap`` over a batch of points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = geometry.boundary_dist(points, system.domain)
    gaps = base_gap(sp, np.atleast_1d(d))
    if not refine:
        return gaps
    from . import graphs  # local import: graphs depends on scales

    return graphs.refine_gaps(system, sp, points, gaps, side=side, splittings=splittings)


# --- sample reports ----------------------------------------------------------


@dataclass
class RateMarginReport:
    """Budget-vs-rates certification on a sample set."""

    passed: bool
    worst_slack: float
    worst_point: np.ndarray
    fitted_margin_constant: float
    smallness_conditions: dict
    n_samples: int

    def summary(self):
        return {
            "passed": bool(self.passed),
            "worst_slack": float(self.worst_slack),
            "worst_point": [float(c) for c in self.worst_point],
            "fitted_margin_constant": float(self.fitted_margin_constant),
            "smallness_conditions": {
                k: (bool(v[0]), float(v[1])) for k, v in self.smallness_conditions.items()
            },
            "n_samples": int(self.n_samples),
        }


def check_rate_margins(sp: ScaleParams, system, samples, splittings=None):
    """Certify eps*budget(x) < min(m_u - 1, m_s_inv - 1, 1 - n_s) on samples.

    Also fits the largest constant C0 with C0*budget(x) below the same
    margin at every sample, and evaluates the smallness thresholds on eps
    implied by the interior and near-boundary regimes.
    """
    from . import splitting as splitting_mod

    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if splittings is None:
        splittings = splitting_mod.compute_splitting_batch(
            system, samples, n_iters=splitting_mod.RATE_ITERS,
            tol=splitting_mod.RATE_TOL, stall_tol=splitting_mod.RATE_STALL,
        )
    d = np.atleast_1d(geometry.boundary_dist(samples, system.domain))
    bud = sp.eps * budget_scale(sp, d)
    margins = np.minimum(
        splittings.m_u - 1.0,
        np.minimum(splittings.m_s_inv - 1.0, 1.0 - splittings.n_s),
    )
    slack = margins - bud
    i_worst = int(np.argmin(slack))
    passed = bool(slack[i_worst] > 0)

    eps_x = budget_scale(sp, d)
    fitted_c0 = float(np.min(margins / eps_x))

    # Proof-side sufficient thresholds on eps, reported as diagnostics only:
    # they are crude certificates (the direct inequality above is the gate)
    # and the last two matter only when the boundary is nonempty.
    interior = d >= sp.r0
    a = float(np.min(margins[interior])) if np.any(interior) else float(np.min(margins))
    b = ((sp.c_f - 1.0) / sp.c_s + 1.0) ** (1.0 / sp.gamma)
    conditions = {
        "interior_budget": (sp.eps < math.sqrt(a / sp.r0**sp.beta), math.sqrt(a / sp.r0**sp.beta)),
        "unit": (sp.eps < 1.0, 1.0),
        "interior_contraction": (
            sp.eps < math.sqrt((1.0 - 1.0 / (a + 1.0)) / sp.r0**sp.beta),
            math.sqrt((1.0 - 1.0 / (a + 1.0)) / sp.r0**sp.beta),
        ),
        "stable_constant": (sp.eps < sp.c_s, sp.c_s),
        "transport": (sp.eps < 1.0 / (b**sp.beta * sp.c_f), 1.0 / (b**sp.beta * sp.c_f)),
    }
    return RateMarginReport(
        passed=passed,
        worst_slack=float(slack[i_worst]),
        worst_point=samples[i_worst],
        fitted_margin_constant=fitted_c0,
        smallness_conditions=conditions,
        n_samples=samples.shape[0],
    )


@dataclass
class RadiusComparabilityReport:
    passed: bool
    worst_ratio_low: float
    worst_ratio_high: float
    worst_pair: tuple
    smallness_ok: bool
    n_pairs: int

    def summary(self):
        return {
            "passed": bool(self.passed),
            "worst_ratio_low": float(self.worst_ratio_low),
            "worst_ratio_high": float(self.worst_ratio_high),
            "smallness_ok": bool(self.smallness_ok),
            "n_pairs": int(self.n_pairs),
        }


def check_radius_comparability(sp: ScaleParams, domain, pairs):
    """Check Q(y)/Q(x) in [1/2, 2] for pairs with d(x, y) <= Q(x).

    Pairs violating the precondition are skipped, not failed.  Also checks
    the two smallness thresholds on eps that the two-sided bound relies on.
    """
    xs = np.atleast_2d(np.asarray([p[0] for p in pairs], dtype=float))
    ys = np.atleast_2d(np.asarray([p[1] for p in pairs], dtype=float))
    qx = chart_radius(sp, np.atleast_1d(geometry.boundary_dist(xs, domain)))
    qy = chart_radius(sp, np.atleast_1d(geometry.boundary_dist(ys, domain)))
    admissible = geometry.torus_dist(xs, ys) <= qx
    ratio = qy / qx
    ratio = ratio[admissible]
    if ratio.size == 0:
        raise ValueError("no pair satisfies the closeness precondition")
    lo, hi = float(np.min(ratio)), float(np.max(ratio))
    expo = (sp.alpha - sp.delta) / 2.0
    small_ok = sp.eps < (1.0 - 2.0 ** (-1.0 / sp.gamma)) ** expo and sp.eps < (
        2.0 ** (1.0 / sp.gamma) - 1.0
    ) ** expo
    idx = int(np.argmin(np.minimum(ratio - 0.5, 2.0 - ratio)))
    sel = np.flatnonzero(admissible)
    return RadiusComparabilityReport(
        passed=bool(lo >= 0.5 and hi <= 2.0 and small_ok),
        worst_ratio_low=lo,
        worst_ratio_high=hi,
        worst_pair=(xs[sel[idx]], ys[sel[idx]]),
        smallness_ok=bool(small_ok),
        n_pairs=int(ratio.size),
    )


def epsilon_threshold_sweep(sp: ScaleParams, system, samples, factors=None):
    """Scale eps up by successive factors until the rate margins fail.

    Returns the list of (eps, passed) pairs and the first failing eps; the
    verdict is monotone because the budget is strictly increasing in eps.
    """
    from . import splitting as splitting_mod

    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    splittings = splitting_mod.compute_splitting_batch(
        system, samples, n_iters=splitting_mod.RATE_ITERS,
        tol=splitting_mod.RATE_TOL, stall_tol=splitting_mod.RATE_STALL,
    )
    if factors is None:
        factors = [2.0**k for k in range(0, 8)]
    ladder = []
    first_fail = None
    for f in factors:
        eps = sp.eps * f
        try:
            trial = sp.with_eps(eps)
        except ValueError as exc:
            # construction-level smallness broke first
            ladder.append((eps, False, f"invalid-params: {exc}"))
            if first_fail is None:
                first_fail = eps
            continue
        report = check_rate_margins(trial, system, samples, splittings=splittings)
        reason = "ok" if report.passed else "rate-margin"
        ladder.append((eps, report.passed, reason))
        if not report.passed and first_fail is None:
            first_fail = eps
    return {"ladder": ladder, "first_failing_eps": first_fail}
