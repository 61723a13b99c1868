"""Numerical toolkit for the connection problem of a degenerate Painleve V equation.

Modules:
    specialfn  Gamma, Whittaker M/W and modified Bessel I_1/K_1 on chosen sheets
    pvcore     the first-order system, asymptotic seeds, integration, read-out
    lax        lambda-system, gauges, canonical frames, Stokes multipliers
    uniform    scalar reductions, model approximants, closed-form multipliers
    cli        command line front end
"""

from .errors import PV5Error
from .lax import StokesData, isomonodromy_scan, stokes_multipliers, zero_curvature_residual
from .pvcore import (
    SIGMA_STAR,
    PVState,
    SeedInf,
    SeedZero,
    Trajectory,
    extract_r,
    extract_sigma,
    integrate,
    seed_at_infinity,
    seed_at_zero,
)
from .specialfn import SectorArg
from .uniform import connection_solve

__all__ = [
    "PV5Error",
    "PVState",
    "SIGMA_STAR",
    "SectorArg",
    "SeedInf",
    "SeedZero",
    "StokesData",
    "Trajectory",
    "connection_solve",
    "extract_r",
    "extract_sigma",
    "integrate",
    "isomonodromy_scan",
    "seed_at_infinity",
    "seed_at_zero",
    "stokes_multipliers",
    "zero_curvature_residual",
]
__version__ = "0.1.0"
