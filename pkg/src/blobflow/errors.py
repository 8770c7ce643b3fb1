"""Exception hierarchy.

Every error carries a stable machine-readable ``code`` and the process exit
status used by the command line front end.
"""


class BlobflowError(Exception):
    code = "error"
    exit_code = 1


class InputError(BlobflowError, ValueError):
    """Invalid user input or violated precondition."""

    code = "input"
    exit_code = 2


class ConfigError(InputError):
    code = "config"


class DomainError(InputError):
    """Argument outside the domain of a function (e.g. non-positive x)."""

    code = "domain"


class BracketError(InputError):
    code = "bracket"


class HypothesisError(InputError):
    """A structural assumption on the energy density failed a spot check."""

    code = "hypothesis"


class UnsupportedConfigurationError(InputError):
    code = "unsupported"


class NumericalError(BlobflowError, ArithmeticError):
    code = "numerical"
    exit_code = 3


class StepRejected(NumericalError):
    code = "step_rejected"


class ConvergenceError(NumericalError):
    code = "convergence"


class QuadratureError(NumericalError):
    code = "quadrature"


class OracleMismatch(BlobflowError):
    code = "oracle_mismatch"
    exit_code = 4
