"""Exception hierarchy shared by all modules."""


class KernelBiasError(Exception):
    """Base class for errors raised by this package."""


class ArgumentError(KernelBiasError, ValueError):
    """An argument violates an operation's precondition."""


class FormatError(KernelBiasError, ValueError):
    """Input file could not be parsed."""


class DimensionError(KernelBiasError, ValueError):
    """Inconsistent dimensions between rows, points or matrices."""


class DegenerateDimensionError(ArgumentError):
    """A feature has zero variance so a bandwidth would vanish."""


class EnergyError(KernelBiasError, ValueError):
    """An energy is undefined for the given partition (e.g. empty cluster)."""


class SizeError(KernelBiasError, ValueError):
    """An exhaustive search instance is too large."""


class DomainError(KernelBiasError, ValueError):
    """A function was evaluated outside its domain."""
