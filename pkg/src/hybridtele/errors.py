"""Exception types raised across the package."""


class HybridError(Exception):
    """Base class for every error raised by hybridtele."""


class RegistryMismatch(HybridError, ValueError):
    """Two states do not carry the same spin/mode labels."""


class RegistryCollision(HybridError, ValueError):
    """A tensor product would reuse a spin or mode label."""


class ZeroNorm(HybridError, ValueError):
    """A superposition has (numerically) vanishing norm."""


class UnknownIndex(HybridError, KeyError):
    """A spin or mode label is not present in the state."""


class UnknownMode(UnknownIndex):
    pass


class SameMode(HybridError, ValueError):
    pass


class SingularDenominator(HybridError, ZeroDivisionError):
    pass


class CutoffTooSmall(HybridError, ValueError):
    """The Fock truncation cannot represent the requested amplitudes."""


class DegenerateGeometry(HybridError, ValueError):
    """The Upsilon and Xi peak families cannot be told apart (alpha == beta)."""


class InvalidCombination(HybridError, ValueError):
    """Both homodyne outcomes fell in the same class; no correction exists."""


class FailedTrial(HybridError):
    """A Monte-Carlo trial was heralded as failed."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class NotNormalized(HybridError, ValueError):
    pass


class Unattainable(HybridError, ValueError):
    pass


class ConfigError(HybridError, ValueError):
    pass


class ValidationFailure(HybridError):
    def __init__(self, failures):
        super().__init__("; ".join(failures))
        self.failures = list(failures)
