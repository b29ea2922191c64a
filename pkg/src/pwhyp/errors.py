"""Exception hierarchy shared by all modules.

Every failure mode that callers are expected to catch has its own class so
the CLI can name the violated invariant in its exit diagnostics.
"""


class ToolkitError(Exception):
    """Base class for all package-specific errors."""


# --- geometry ---------------------------------------------------------------

class NormExceedsInjectivityRadius(ToolkitError):
    """Tangent vector too long for the exponential map to be injective."""


class PointsTooFar(ToolkitError):
    """Logarithm map requested for points farther apart than the injectivity radius."""


class PointOnBoundary(ToolkitError):
    """Boundary distance requested at an excluded point."""


# --- scales ------------------------------------------------------------------

class NonpositiveBoundaryDistance(ToolkitError):
    """Scale functions are only defined for positive boundary distance."""


class CannotSatisfyEstimates(ToolkitError):
    """Halving the chart gap never made the local block estimates pass."""


# --- systems -----------------------------------------------------------------

class IntegrationFailure(ToolkitError):
    """Fixed-step integrator produced a non-finite state."""


class BudgetExceeded(ToolkitError):
    """Perturbation larger than the pointwise budget; carries the worst point."""

    def __init__(self, message, point=None, ratio=None):
        super().__init__(message)
        self.point = point
        self.ratio = ratio


class SupportTouchesBoundary(ToolkitError):
    """Bump support intersects the protective neighborhood of the boundary."""


# --- splitting ---------------------------------------------------------------

class OrbitLeavesDomain(ToolkitError):
    """An orbit segment left the invariant open set."""


class NoConvergence(ToolkitError):
    """Direction iteration did not reach the Cauchy threshold."""


class DegenerateFrame(ToolkitError):
    """Stable/unstable directions too close to collinear."""


class NonpositiveAperture(ToolkitError):
    """Cone aperture formula gave a nonpositive value; budget too large here."""


# --- graphs ------------------------------------------------------------------

class TargetTooFar(ToolkitError):
    """Chart target point violates the gap precondition."""


class GraphFoldover(ToolkitError):
    """Image of a graph is not a graph: expanding coordinate not monotone."""


class OutputNotAdmissible(ToolkitError):
    """Graph transform output violates an admissibility bound."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class IdenticalInputs(ToolkitError):
    """Contraction factor undefined for indistinguishable manifolds."""


# --- shadowing ---------------------------------------------------------------

class CannotSatisfyBothConditions(ToolkitError):
    """Kick resampling failed to satisfy forward and backward step bounds."""


class NotCauchyWithinWindow(ToolkitError):
    """Manifold limit not resolved within the available orbit window."""


class ContractionStalled(ToolkitError):
    """Fixed-point iteration for the shadow stopped making progress."""


class ContainmentFailure(ToolkitError):
    """Shadow orbit left a per-step box; carries the first violating index."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


# --- stability ---------------------------------------------------------------

class PseudoOrbitInvalid(ToolkitError):
    """Orbit window of the perturbed map fails the pseudo-orbit conditions."""


class ProbeInconclusive(ToolkitError):
    """Probe hit its resolution or window limit without a verdict."""


# --- cli ---------------------------------------------------------------------

class ConfigError(ToolkitError):
    """Invalid or inconsistent run configuration."""


class AssertionFailure(ToolkitError):
    """A run-level assertion failed; carries the name of the invariant."""

    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant
