"""Exception types raised by the numerical engines."""


class HbarGeoError(Exception):
    """Base class for every error raised by this package."""


class DegenerateMaximum(HbarGeoError):
    pass


class MultipleMaxima(HbarGeoError):
    pass


class NoConvergence(HbarGeoError):
    def __init__(self, max_steps, message=None):
        self.max_steps = max_steps
        super().__init__(message or f"no convergence within {max_steps} steps")


class NotInterior(HbarGeoError):
    pass


class BadLevel(HbarGeoError):
    pass


class OutOfWindow(HbarGeoError):
    pass


class BlowUp(HbarGeoError):
    pass


class NoConnection(HbarGeoError):
    pass


class NotConverging(HbarGeoError):
    pass


class ContractionFailure(HbarGeoError):
    pass


class BadBeta(HbarGeoError):
    pass


class EmptyInterior(HbarGeoError):
    pass


class NotOnBoundary(HbarGeoError):
    pass


class NotAVertex(HbarGeoError):
    pass
