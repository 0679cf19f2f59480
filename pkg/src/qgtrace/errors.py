"""Exception hierarchy shared by all modules."""


class QGraphError(Exception):
    """Base class for every error raised by qgtrace."""


class InvalidGraphError(QGraphError):
    """The metric graph violates a structural invariant."""


class InvalidCouplingError(QGraphError):
    """Coupling constants are malformed or of the wrong matching type."""


class NonInvertibleCouplingError(InvalidCouplingError):
    """A delta-prime trace formula needs every coupling constant nonzero."""


class PoleProximityError(QGraphError):
    """The spectral point sits on (or too close to) a pole of the M-matrix."""


class LimitPointError(QGraphError):
    """lambda = 0 must be handled by the dedicated limit routine."""


class LoopPresentError(QGraphError):
    """The operation is only defined for loop-free graphs."""


class SingularEdgeError(QGraphError):
    """The per-edge interpolation problem is singular at this spectral point."""


class ContinuityError(QGraphError):
    """A kernel element breaks the vertex continuity of its coupling type."""


class WindowError(QGraphError):
    """The spectral search window is degenerate or unusable."""


class NumericalError(QGraphError):
    """Bracketing, fitting or conditioning failed."""


class NoMatchError(QGraphError):
    """Coupling recovery found no parameter reproducing the target spectrum."""


class NotOrderedError(QGraphError):
    """Two coupling matrices were expected to be entrywise ordered."""
