"""Exception hierarchy; exit_code is what the CLI returns for each class."""

from __future__ import annotations


class GasSphereError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(GasSphereError):
    """Invalid configuration, parameters, or input data."""

    exit_code = 2


class SolverFailureError(GasSphereError):
    """A numerical solve failed to converge or produce a usable result."""

    exit_code = 3


class MeshTanglingError(GasSphereError):
    """The Lagrangian mesh lost monotonicity (some r_n - r_{n-1} <= 0)."""

    exit_code = 4


class BlowUpError(GasSphereError):
    """The discrete energy functional exceeded its runaway threshold."""

    exit_code = 5


class UnsupportedIndexError(ConfigError):
    """Polytropic index outside the compact-support range."""


class DomainError(ConfigError):
    """Evaluation point outside the profile's support [0, R]."""


class InsufficientResolutionError(ConfigError):
    """Too few table points in the requested window for a meaningful fit."""


class MassMismatchError(ConfigError):
    """Initial density does not carry the same total mass as the background."""


class InvalidDensityError(ConfigError):
    """Initial density fails positivity or integrability requirements."""


class InvalidPerturbationError(ConfigError):
    """Built initial data violates admissibility (non-monotone radii)."""
