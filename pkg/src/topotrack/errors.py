"""Shared exception types."""

from __future__ import annotations

__all__ = [
    "TopotrackError",
    "SeriesFormatError",
    "ArtifactError",
    "ArtifactVersionError",
    "ArtifactChecksumError",
    "FilterError",
    "SeedFilteredError",
]


class TopotrackError(Exception):
    """Base class for package errors."""


class SeriesFormatError(TopotrackError, ValueError):
    """Malformed or inconsistent scalar series input."""


class ArtifactError(TopotrackError):
    """Missing, partial or otherwise unusable precompute artifact."""


class ArtifactVersionError(ArtifactError):
    """Artifact written by an incompatible format version."""


class ArtifactChecksumError(ArtifactError):
    """Artifact payload does not match its recorded checksum."""


class FilterError(TopotrackError, ValueError):
    """Invalid graph filter, e.g. an unknown property name."""


class SeedFilteredError(FilterError):
    """Query seeds removed by the active filter."""

    def __init__(self, seeds):
        self.seeds = list(seeds)
        super().__init__(f"seed nodes removed by filter: {self.seeds}")
