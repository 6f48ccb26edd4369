"""Exception types raised by the construction and audit routines."""


class MassPartError(Exception):
    """Base class for all package errors."""


class DegenerateInput(MassPartError):
    pass


class ParallelProjection(MassPartError):
    pass


class EmptyMeasure(MassPartError):
    pass


class BadSpec(MassPartError):
    pass


class InsufficientSupport(MassPartError):
    pass


class NotWellSeparated(MassPartError):
    pass


class SchemaMismatch(MassPartError):
    pass


class NoConvergence(MassPartError):
    """A numerical solver stopped without meeting its tolerance.

    ``residual`` is the best residual reached and ``best`` the
    corresponding iterate (a frame, a parameter vector, ...), when the
    solver had one to report.
    """

    def __init__(self, message, residual=float("nan"), best=None):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
        self.best = best
