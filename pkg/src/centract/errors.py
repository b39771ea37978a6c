"""Exception types raised by the library."""


class CentractError(Exception):
    """Base class for all library errors."""


class GeometryError(CentractError, ValueError):
    """A geometric primitive was called outside its domain."""


class CutLocus(GeometryError):
    """The short geodesic between two points is not unique."""


class OutsideGroupoid(GeometryError):
    """A tangent element is not in the standard central groupoid."""


class OutsideImage(GeometryError):
    """A point pair is not in the image of the symmetric exponential map."""


class BaseMismatch(GeometryError):
    """Tangent data is not based at the expected point or space."""


class ConstraintDrift(GeometryError):
    """A point or vector has drifted too far from its embedding constraint."""


class ConsistencyViolation(CentractError, ValueError):
    """A central action fails the consistency condition of its space."""


class ChartSingularity(CentractError, ValueError):
    """A polar-chart formula was evaluated at its pole."""


class StencilOutsideDomain(CentractError, ValueError):
    """A finite-difference stencil left the action's domain."""


class NoConvergence(CentractError, RuntimeError):
    """An iterative solver failed to converge.

    Attributes:
        residual: the last residual norm (maximum over a batch).
        iterations: the number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InvalidMidpoints(CentractError, ValueError):
    """Midpoints do not determine a standard geodesic polygon.

    Attributes:
        constraint: short name of the violated constraint.
    """

    def __init__(self, message, constraint=""):
        super().__init__(message)
        self.constraint = constraint


class ParallelogramViolation(InvalidMidpoints):
    """Flat quadrilateral midpoints are not the vertices of a parallelogram."""


class OutOfRegime(InvalidMidpoints):
    """Quadrilateral is outside the convex small-triangle regime."""


class DegenerateTriplet(CentractError, ValueError):
    """The composed reflections are the identity; vertices are not unique."""


class NonreducibleLoop(CentractError, ValueError):
    """A closed polygon on the torus winds around a handle."""


class InvalidSpec(CentractError, ValueError):
    """An action specification violates its invariants."""


class OutOfDomain(CentractError, ValueError):
    """A point lies outside the domain of a transformation or action."""


class NotComposable(CentractError, ValueError):
    """Groupoid elements whose endpoints do not match."""


class BranchMismatch(CentractError, RuntimeError):
    """Two routes of a chained composition landed on different branches."""


class MultipleBranchesWarning(UserWarning):
    """Restarts found more than one stationary point."""
