"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2 and numerical degeneracy exits 3.
"""


class MixLassoError(Exception):
    """Base class for all package-specific errors."""


class UsageError(MixLassoError):
    """Bad command line or configuration values."""


class DataError(MixLassoError):
    """Unusable input data: parse failures, dimension mismatches, bad files."""


class DegeneracyError(MixLassoError):
    """A numerical quantity left its valid range (weights, scales, masses)."""


class SingularModelError(DegeneracyError):
    """A posterior precision matrix failed its positive-definite factorization."""
