"""Exception types shared across the package."""


class ApscastError(Exception):
    """Base class for all package-specific errors."""


class ContractError(ApscastError):
    """An argument violates a documented precondition (wrong shape, bad
    domain, incompatible objects)."""


class NumericalConsistencyError(ApscastError):
    """A computed quantity violates a mathematical identity by more than
    floating-point noise, e.g. a squared projection residual that comes out
    negative beyond tolerance.  Usually indicates a pseudo-inverse cutoff
    that is too aggressive for the conditioning of the Gram matrix."""
