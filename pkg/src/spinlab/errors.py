"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SpinlabError(Exception):
    exit_code = 1


class InvalidInput(SpinlabError, ValueError):
    exit_code = 2


class DomainError(InvalidInput):
    """A logarithm or ratio was requested outside its domain."""


class CapacityError(SpinlabError):
    exit_code = 3


class EmptyEventError(SpinlabError):
    """Conditioning on an event of probability zero."""
    exit_code = 2


class GenerationFailure(SpinlabError):
    exit_code = 4


class ConstructionFailure(SpinlabError):
    exit_code = 4


class SearchFailure(SpinlabError):
    exit_code = 4

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UnusableGadget(SpinlabError):
    """Pair constants give no cut signal (Theta <= Gamma) or epsilon >= 1."""
    exit_code = 4
