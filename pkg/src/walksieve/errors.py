"""Exception hierarchy shared by the library and the CLI."""


class WalkSieveError(Exception):
    """Base class for all library errors."""


class StructuralError(WalkSieveError, ValueError):
    """Operands do not live in the same group (modulus or ground set differ)."""


class ParameterError(WalkSieveError, ValueError):
    """A numeric parameter is outside its admissible range."""


class CapacityError(WalkSieveError, RuntimeError):
    """An exact enumeration would exceed its configured cap."""


class InvariantViolation(WalkSieveError, AssertionError):
    """A checked mathematical invariant failed."""


class NiceImageFailure(InvariantViolation):
    """The cross-shaped inclusion for a pair of blocks does not hold.

    ``pair`` is the first required element of the pair quotient that is
    missing from the image of the generator set.
    """

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair
