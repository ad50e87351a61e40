"""Exception types raised by the fitting, embedding and metric routines."""


class PNSMError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateRetraction(PNSMError):
    """The nearest point on the embedding set is not unique."""


class OffManifold(PNSMError):
    """A point does not lie on the embedded manifold within tolerance."""


class EigenFailure(PNSMError):
    """The symmetric eigensolver did not converge."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EmptyNeighborhood(PNSMError):
    """No sample lies within the radius of the query point."""


class AmbiguousDirection(PNSMError):
    """The top eigenvalue of an aggregated projector is not simple."""


class FrameDegenerate(PNSMError):
    """The curve's second derivative vanishes, so its normal frame is undefined."""


class FitFailure(PNSMError):
    """More than half of the points failed to project at some level."""


class LabelError(PNSMError, ValueError):
    pass


class ShapeMismatch(PNSMError, ValueError):
    pass


class DisconnectedGraph(UserWarning):
    """Neighbour graph is disconnected; the largest component is used."""


class SupportWarning(UserWarning):
    """Projected points left the estimator's support (the union of c*r balls)."""
