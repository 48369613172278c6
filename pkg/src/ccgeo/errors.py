class CCGeoError(Exception):
    """Base class for errors raised by ccgeo."""


class DomainError(CCGeoError, ValueError):
    """Input outside the domain where an operation is defined."""


class ChartIntegrityError(CCGeoError):
    """Chart data violate a structural invariant (positivity, SPD, vanishing on the boundary)."""


class NumericError(CCGeoError):
    """A numerical sub-procedure (quadrature, fit) failed to converge."""


class InboundRegimeError(DomainError):
    """State has w0 <= 0, so x0 cannot serve as the curve parameter."""


class IllConditionedWindowError(NumericError):
    """Fitting window too short for the log basis to be resolved."""


class DiagnosticsError(CCGeoError):
    """Not enough data to compute a diagnostic."""


class IntegrationFailure(CCGeoError):
    """An integration ended for a reason other than the requested one.

    The partial trajectory is attached as ``trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
