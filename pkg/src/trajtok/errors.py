"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, ``DataError``
exits 2, ``NumericsError`` exits 3.
"""


class TrajtokError(Exception):
    """Base class for all package errors."""


class DataError(TrajtokError):
    """Malformed, inconsistent, or missing input data."""


class NumericsError(TrajtokError):
    """Numerical failure (NaN loss, non-finite input, divergence)."""


class ArtifactError(DataError):
    """Artifact container cannot be read, or its format/version is unsupported."""
