"""Exception hierarchy shared by the library and the command line."""


class CyclicQEDError(Exception):
    """Base class for all package errors."""


class ConfigError(CyclicQEDError, ValueError):
    """A scenario or parameter configuration is malformed.

    ``key`` names the offending configuration entry when one is known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ResonanceError(CyclicQEDError, ValueError):
    """A perturbative denominator is too close to zero."""

    def __init__(self, message, symbol=None):
        super().__init__(message)
        self.symbol = symbol


class SolverError(CyclicQEDError, RuntimeError):
    """A numerical solver failed (singular system, step underflow, ...)."""


class InvariantError(CyclicQEDError, AssertionError):
    """An internal physical invariant was violated beyond tolerance."""
