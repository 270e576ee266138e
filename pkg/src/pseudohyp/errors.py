"""Exception hierarchy shared by the solver modules and the CLI exit-code contract."""


class PseudoHypError(Exception):
    """Base class for all package errors."""


class OrderError(PseudoHypError, ValueError):
    """A fractional order lies outside the band an operation accepts."""


class ConfigError(PseudoHypError, ValueError):
    """Invalid scenario configuration (maps to exit code 2)."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where = f" [key {key!r}" + (f", line {line}" if line is not None else "") + "]"
        super().__init__(message + where)


class NumericalError(PseudoHypError, RuntimeError):
    """Numerical failure: blow-up, factorization breakdown, divergence (exit code 1)."""


class SolveError(NumericalError):
    """The bordered step system could not be factorized or solved."""


class BlowUpError(NumericalError):
    """A marched field became nonfinite or exceeded the growth guard."""


class SeriesError(NumericalError):
    """A Mittag-Leffler series argument is outside the direct-summation range."""


class DivergenceError(NumericalError):
    """Picard increments grew for several consecutive iterations."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
