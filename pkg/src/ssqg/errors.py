"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class SSQGError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class DomainError(SSQGError, ValueError):
    """Argument outside the domain of the mathematical object."""

    exit_code = 64


class PreconditionError(SSQGError, ValueError):
    """Inputs are well-formed but violate a precondition of the operation."""

    exit_code = 64


class ConfigError(SSQGError, ValueError):
    """Invalid run configuration; ``problems`` lists every offending key."""

    exit_code = 64

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CertificationError(SSQGError):
    """A search or bound required for a certificate could not be established."""

    exit_code = 2


class NumericalError(SSQGError, ArithmeticError):
    """Non-finite values reached a numerical routine."""

    exit_code = 3


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""

    exit_code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class BlowUpError(SSQGError, FloatingPointError):
    """The solver produced non-finite or runaway values.

    ``state`` is the last finite state and ``diagnostics`` the rows recorded
    up to that point, so callers can still persist partial output.
    """

    exit_code = 4

    def __init__(self, message, state=None, diagnostics=None):
        super().__init__(message)
        self.state = state
        self.diagnostics = list(diagnostics or [])
