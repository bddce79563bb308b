"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration (bad key, bad value, inconsistent options)."""


class DataFormatError(IOError):
    """Corrupt or unrecognised data file."""


class DegenerateDataError(ValueError):
    """Input data cannot support the requested computation (all zero, zero
    median magnitude, degenerate spectrum)."""


class RankDeficientError(ValueError):
    """A matrix that must have full column rank does not."""


class NumericError(RuntimeError):
    """A numerical routine failed (non-convergence, singular system)."""
