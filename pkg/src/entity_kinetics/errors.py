"""Exception types shared across the package."""


class KineticsError(Exception):
    """Base class for all package errors."""


class ArityError(KineticsError, ValueError):
    """Tensor or operator arguments have incompatible arity."""


class CapacityError(KineticsError, ValueError):
    """A dense object would exceed the configured size cap."""


class ModelError(KineticsError, ValueError):
    """An interaction model failed validation or could not be loaded.

    The offending checks are available as ``diagnostics``.
    """

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class InvariantError(KineticsError, AssertionError):
    """A numerical invariant (mass, positivity, stochasticity) was violated."""
