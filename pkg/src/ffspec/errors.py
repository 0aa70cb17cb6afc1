"""Exception hierarchy shared across the package."""


class FFSpecError(Exception):
    """Base class for all package errors."""


class ParameterError(FFSpecError, ValueError):
    """A configuration or argument value is outside its allowed domain."""


class InputError(FFSpecError, ValueError):
    """A data sample is malformed (e.g. NaN or infinite)."""


class StateError(FFSpecError, RuntimeError):
    """An operation was requested on a state that cannot support it yet."""


class DomainError(FFSpecError, ValueError):
    """Model parameters fall outside the model's valid region."""


class EvaluationError(FFSpecError, ArithmeticError):
    """A model evaluation produced a non-positive or non-finite spectrum."""


class NumericalError(FFSpecError, ArithmeticError):
    """An optimisation step produced non-finite values and was rejected."""
