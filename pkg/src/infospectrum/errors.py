"""Exception hierarchy shared by every module of the package."""


class InfospectrumError(Exception):
    """Base class for all errors raised by this package."""


class InvalidModelError(InfospectrumError, ValueError):
    """A model or measure violates its structural invariants."""


class AlphabetMismatchError(InvalidModelError):
    """A sequence or a paired model uses symbols outside the common alphabet."""


class SingularSupportError(InvalidModelError):
    """The null puts mass where the alternative has none, so the CGF is infinite."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DegeneracyError(InfospectrumError):
    """A chain that must be irreducible is not."""


class NumericalError(InfospectrumError, ArithmeticError):
    """An iterative solver failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DomainError(InfospectrumError, ValueError):
    """A point lies outside the effective domain of a rate function."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class InfeasibleError(InfospectrumError, ValueError):
    """Linear constraints of an I-projection admit no distribution."""


class UnsupportedModelError(InfospectrumError, NotImplementedError):
    """The requested operation is not defined for this model kind."""


class PreconditionError(InfospectrumError):
    """A theorem precondition (limit existence, spectrum tail condition) fails."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ResourceError(InfospectrumError):
    """An enumeration would exceed its configured budget."""
