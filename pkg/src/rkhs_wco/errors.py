"""Exception hierarchy shared by all modules."""


class RkhsWcoError(Exception):
    """Base class for errors raised by this package."""


class StructuralError(RkhsWcoError, ValueError):
    """Operands disagree in dimension, truncation order or arity."""


class DomainError(RkhsWcoError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class SingularityError(RkhsWcoError, ZeroDivisionError):
    """A series or kernel value that must be inverted vanishes."""


class ZeroDenominator(SingularityError):
    """``K(phi(z), a)`` vanished at a sample point.

    This is itself a refutation: a co-isometric operator forces the kernel
    section through ``phi(0)`` to be zero-free along ``phi``.
    """

    def __init__(self, point, value):
        self.point = point
        self.value = value
        super().__init__(f"K(phi(z), a) = {value!r} vanishes at z = {point!r}")


class UnsupportedError(RkhsWcoError):
    """The requested operation does not apply to this kind of space or symbol."""
