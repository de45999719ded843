"""Domain exceptions shared across modules.

Every exception carries a stable ``code`` (its class name) that the CLI prints
so scripts can match on it.
"""


class FlapregError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self):
        return type(self).__name__


class LinkageDefinitionError(FlapregError, ValueError):
    """Malformed or inconsistent linkage definition."""


class NonConvergence(FlapregError):
    """Newton iteration did not reach tolerance.

    ``crank_angle`` is the angle that failed; ``last_pose`` the last good pose
    of a sweep (``None`` for a single solve).
    """

    def __init__(self, message, crank_angle=None, last_pose=None, residual=None):
        super().__init__(message)
        self.crank_angle = crank_angle
        self.last_pose = last_pose
        self.residual = residual


class SingularJacobian(FlapregError):
    """Constraint Jacobian is rank deficient (toggle or locked configuration)."""

    def __init__(self, message, crank_angle=None):
        super().__init__(message)
        self.crank_angle = crank_angle


class SweepError(FlapregError):
    """A length sweep failed at one swept value; wraps the underlying error."""

    def __init__(self, message, length_mm, cause):
        super().__init__(message)
        self.length_mm = length_mm
        self.cause = cause

    @property
    def code(self):
        return type(self.cause).__name__


class DegeneratePath(FlapregError):
    """Marker path collapsed to a single point."""


class TriangleDegenerate(FlapregError):
    """Triangle mechanism radicand is non-positive."""


class Infeasible(FlapregError):
    """No mechanism in the search space meets the requirement."""

    def __init__(self, message, best_force_gf=None, best_stroke_mm=None):
        super().__init__(message)
        self.best_force_gf = best_force_gf
        self.best_stroke_mm = best_stroke_mm


class TargetUnreachable(FlapregError):
    """Actuator stalled before reaching its target position."""

    def __init__(self, message, stall_position_um, trace=None):
        super().__init__(message)
        self.stall_position_um = stall_position_um
        self.trace = trace


class InsufficientCycles(FlapregError):
    """Record too short to contain the required number of flap cycles."""


class NoPeriodicity(FlapregError):
    """No dominant flapping fundamental in the expected band."""


class NoCyclesFound(FlapregError):
    """Angle record has no usable stroke reversals."""


class EmptyWindow(FlapregError):
    """A cycle window contains no force samples."""
