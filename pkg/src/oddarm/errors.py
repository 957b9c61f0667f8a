"""Exception types shared across the package."""


class OddArmError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(OddArmError, ValueError):
    """Array arguments have incompatible shapes."""


class DomainError(OddArmError, ValueError):
    """Scalar argument outside the function's domain."""


class RowSumError(OddArmError, ValueError):
    """A matrix row does not sum to one within tolerance."""


class NegativeEntryError(OddArmError, ValueError):
    """A matrix entry is negative."""


class ReducibleError(OddArmError, ValueError):
    """The positive-entry digraph of the matrix is not strongly connected."""


class PeriodicError(OddArmError, ValueError):
    """The chain has period greater than one."""


class SingularSystemError(OddArmError, ArithmeticError):
    """The stationary-distribution linear system could not be solved."""


class DegenerateDenominatorError(OddArmError, ArithmeticError):
    """A mixture row has (near-)zero total weight."""


class ConfigError(OddArmError, ValueError):
    """An arm configuration violates its invariants."""


class ValidationError(OddArmError, ValueError):
    """An experiment configuration violates its invariants."""


class ParseError(OddArmError, ValueError):
    """A configuration document is malformed."""


class StepCapExceeded(OddArmError, RuntimeError):
    """A trial reached the step cap without stopping.

    Carries the number of pulls taken so the caller can report the
    truncation instead of silently discarding it.
    """

    def __init__(self, steps, message=None):
        super().__init__(message or f"step cap reached after {steps} pulls without stopping")
        self.steps = steps
