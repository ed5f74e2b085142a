"""Exception hierarchy shared by every module of the package."""


class KaczmarzError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(KaczmarzError, ValueError):
    pass


class ParameterError(KaczmarzError, ValueError):
    pass


class IndexSetError(KaczmarzError, IndexError):
    pass


class ParseError(KaczmarzError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class UnsupportedFormatError(ParseError):
    pass


class DegenerateProblemError(KaczmarzError, ValueError):
    pass


class InconsistentSystemError(KaczmarzError, ArithmeticError):
    """A_tau^T xi vanished while xi did not; the system cannot be consistent."""


class SolverFailure(KaczmarzError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DivergenceError(SolverFailure):
    pass


class CapabilityError(KaczmarzError, RuntimeError):
    """Requested computation exceeds a documented size cap."""


class VerificationFailure(KaczmarzError, AssertionError):
    def __init__(self, message, record=None, trace=None):
        super().__init__(message)
        self.record = record
        self.trace = trace


class SweepFailure(SolverFailure):
    pass
