"""Exception hierarchy shared by all modules."""


class MusielakParabolicError(Exception):
    """Base class for every error raised by this package."""


class DivergentModularError(MusielakParabolicError):
    def __init__(self, cell):
        super().__init__(f"non-finite modular integrand on cell {cell}")
        self.cell = cell


class UnboundedNormError(MusielakParabolicError):
    pass


class ConjugateInfiniteError(MusielakParabolicError):
    pass


class InvalidResolutionError(MusielakParabolicError, ValueError):
    pass


class TraceViolationError(MusielakParabolicError, ValueError):
    pass


class AssemblyNaNError(MusielakParabolicError):
    def __init__(self, cell):
        super().__init__(f"non-finite integrand during assembly on cell {cell}")
        self.cell = cell


class StructureViolationError(MusielakParabolicError, ValueError):
    pass


class ConfigError(MusielakParabolicError, ValueError):
    pass


class NonconvergenceError(MusielakParabolicError):
    """Raised when Newton and the Picard fallback both fail.

    Carries the last iterate and the step report so callers can inspect
    where the solve stalled.
    """

    def __init__(self, message, last_iterate=None, report=None, step=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.report = report
        self.step = step


class ProbeFailureError(MusielakParabolicError):
    pass


class OracleFailureError(MusielakParabolicError):
    pass


class StudyPreconditionError(MusielakParabolicError, ValueError):
    pass
