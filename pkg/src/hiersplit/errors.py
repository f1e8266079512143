"""Exception hierarchy shared by all solver layers."""


class HiersplitError(Exception):
    """Base class for errors raised by this package."""


class StructuralError(HiersplitError, ValueError):
    """Ill-formed problem data: dimension mismatch, empty dataset, bad operator."""


class ConfigError(HiersplitError, ValueError):
    """Invalid solver configuration (step sizes, relaxation, scaling bounds)."""


class NumericalError(HiersplitError, RuntimeError):
    """Numerical failure: indefinite factorization, root solver breakdown."""


class DataError(HiersplitError, ValueError):
    """Malformed input files (CSV parse failures, wrong shapes)."""


class DivergenceError(HiersplitError, RuntimeError):
    """Iterate norm exceeded the divergence guard.

    Signals a violated boundedness hypothesis of the fixed-point set; see the
    sufficient boundedness conditions documented in ``splitting`` and ``hsdm``.
    Carries the partial iteration trace for diagnosis.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
