"""Exception types shared across the package."""


class BosonicCapacityError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(BosonicCapacityError, ValueError):
    """An argument lies outside the domain of a function."""


class TruncationError(BosonicCapacityError):
    """A Fock-space truncation is too small for the requested accuracy."""


class ModeCountError(BosonicCapacityError, ValueError):
    """An operation received a state with the wrong number of modes."""


class InvalidStateError(BosonicCapacityError, ValueError):
    """A matrix fails the density-matrix invariants."""


class InconsistentSpecError(BosonicCapacityError, ValueError):
    """Channel parameters violate a maximum-entropy consistency condition."""


class NumericalError(BosonicCapacityError):
    """A numerical routine failed or produced an out-of-tolerance result."""


class CoverageError(BosonicCapacityError):
    """A quadrature rule captures too little of a density's mass."""
