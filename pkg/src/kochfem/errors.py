"""Exception types, one per pipeline stage, so the CLI can map failures to exit codes."""

from __future__ import annotations


class KochfemError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(KochfemError):
    """Invalid or degenerate boundary geometry."""


class MeshError(KochfemError):
    """Triangulation or refinement failure."""


class SolverError(KochfemError):
    """Linear-solver breakdown or non-convergence.

    Carries the relative-residual history so callers can diagnose stalls.
    """

    def __init__(self, message: str, residual_history=None):
        super().__init__(message)
        self.residual_history = residual_history


class ConfigError(KochfemError):
    """Malformed or out-of-range run configuration (CLI exit code 2)."""
