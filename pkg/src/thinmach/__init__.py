"""Numerical verification of the combined low-Mach / thin-layer limit of
the compressible Euler system.

The package couples a finite-volume solver for the Mach-scaled 3D Euler
equations on a thin periodic layer with a pseudo-spectral 2D incompressible
Euler solver and an exact acoustic propagator, and measures their distance
with a relative-energy functional across Mach-number sweeps.
"""

from .grids import (
    Grid2D,
    Grid3D,
    ScalarField2D,
    ScalarField3D,
    SnapshotSeries,
    VectorField2D,
    VectorField3D,
    norm,
    time_norm,
    vertical_average,
)
from .pressure import DensityCutoff, GammaLaw, LinearLaw, make_law, relative_potential
from .harness import RunConfig, acoustic_bench, run_single, sweep, validate

__version__ = "0.1.0"

__all__ = [
    "Grid2D",
    "Grid3D",
    "ScalarField2D",
    "ScalarField3D",
    "SnapshotSeries",
    "VectorField2D",
    "VectorField3D",
    "norm",
    "time_norm",
    "vertical_average",
    "DensityCutoff",
    "GammaLaw",
    "LinearLaw",
    "make_law",
    "relative_potential",
    "RunConfig",
    "acoustic_bench",
    "run_single",
    "sweep",
    "validate",
    "__version__",
]
