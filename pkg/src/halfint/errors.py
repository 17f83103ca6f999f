"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class DomainError(ValueError):
    """A numeric argument lies outside the supported domain."""


class PoleError(ArithmeticError):
    """Evaluation requested at (or too near) a pole.

    Carries the offending location in ``args[1]`` when known.
    """


class RegionError(ValueError):
    """An evaluation route was called outside its region of validity."""


class TruncationError(RuntimeError):
    """Requested tolerance is unreachable at the available truncation."""


class IllConditionedSpaceError(RuntimeError):
    """Numerical rank of a space is unstable; increase truncation parameters."""


class DegeneracyError(RuntimeError):
    """A numerically non-diagonalizable block was encountered."""


class IndeterminateError(RuntimeError):
    """A measurement fell below the noise floor at every probe point."""


class ConsistencyError(RuntimeError):
    """An internal cross-check failed, signalling a convention bug upstream."""


class NotInEError(RuntimeError):
    """Central L-value below threshold: the central-identity check does not apply."""
