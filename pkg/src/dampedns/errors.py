"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Sample or coefficient arrays do not match the grid they are paired with."""


class SupportError(ValueError):
    """A force profile's frequency support is empty or does not fit on the grid."""


class NonIntegrableError(ValueError):
    """A requested continuum norm diverges for the given profile."""


class ConfigError(ValueError):
    """Invalid experiment or simulation configuration."""


class BlowUpError(RuntimeError):
    """The velocity norm left the region allowed by the energy ceiling."""


class NonFiniteError(RuntimeError):
    """A diagnostic evaluated to NaN or infinity."""


class InsufficientHorizonError(ValueError):
    """Too little post-transient data to form long-time averages."""


class InvariantError(RuntimeError):
    """A state invariant (divergence-free, Hermitian) was violated mid-run."""
