"""Exception hierarchy shared by every module."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class SingularityError(ArithmeticError):
    """A density vanished where a ratio needs it."""


class PreconditionError(ValueError):
    """A numerical precondition (regularity, log-concavity, ...) does not hold."""


class NotLogConcaveError(PreconditionError):
    """The gamma-scaled virtual value changes sign more than twice."""


class DegenerateSignalError(PreconditionError):
    """The signal carries no usable posterior mass."""


class NoSolutionError(ValueError):
    """A pseudo-inverse target is above the range of the function."""


class ConfigError(ValueError):
    """Bad experiment configuration or unparseable prior token."""
