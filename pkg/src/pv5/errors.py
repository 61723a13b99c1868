"""Exception hierarchy. Every error raised on purpose derives from PV5Error."""

from __future__ import annotations


class PV5Error(Exception):
    """Base class."""


class PoleError(PV5Error, ValueError):
    """Argument at a pole of Gamma or of a special-function parameter."""


class BranchError(PV5Error, ValueError):
    """Requested branch is unsupported or cannot be continued unambiguously."""


class OriginSingularityError(PV5Error, ValueError):
    """Evaluation at a logarithmic or algebraic singularity at the origin."""


class SingularStateError(PV5Error, ValueError):
    """State with y in {0, 1}, t = 0 or a non-finite component."""


class DegenerateSeedError(PV5Error, ValueError):
    """Asymptotic seed whose formulas have vanishing denominators."""


class SingularityEncounteredError(PV5Error, ArithmeticError):
    """Integration met a singularity it could not route around."""

    def __init__(self, where, message: str):
        super().__init__(message)
        self.where = where

    @property
    def t(self):
        return self.where


class StepUnderflowError(SingularityEncounteredError):
    """Adaptive step collapsed below the minimum."""


class ToleranceError(PV5Error, ValueError):
    """Tolerances outside the admissible range."""


class SingularPointError(PV5Error, ValueError):
    """Spectral parameter at (or too close to) a regular singular point."""


class RadiusTooSmallError(PV5Error, ValueError):
    """Canonical-frame radius below the minimum for the requested accuracy."""


class StructureViolationError(PV5Error, ArithmeticError):
    """Computed Stokes matrix is not unipotent-triangular within tolerance."""


class CZeroError(PV5Error, ValueError):
    """Lower-left coefficient vanishes, scalar reduction undefined."""


class DomainViolationError(PV5Error, ValueError):
    """Contour leaves the domain where an approximation is asserted."""


class NoSolutionError(PV5Error, ValueError):
    """Connection equations have no solution within the strip convention."""


class ConfigError(PV5Error, ValueError):
    """Invalid run configuration."""
