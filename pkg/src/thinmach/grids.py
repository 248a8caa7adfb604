"""Grids, field containers, vertical averaging and discrete norms.

The 3D grid covers a thin periodic layer [0,L)^2 x (0,delta): both horizontal
directions are periodic, the vertical direction is bounded by impermeable
walls at x3 = 0 and x3 = delta.  The 2D grid is the horizontal trace of a
compatible 3D grid.  All fields are cell-centered; 2D fields additionally
admit exact spectral derivatives (both directions periodic), which is what
the Sobolev-order argument of :func:`norm` relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

__all__ = [
    "Grid3D",
    "Grid2D",
    "ScalarField3D",
    "VectorField3D",
    "ScalarField2D",
    "VectorField2D",
    "SnapshotSeries",
    "InsufficientSamplesError",
    "vertical_average",
    "norm",
    "time_norm",
]


class InsufficientSamplesError(ValueError):
    """A time norm with q < inf needs at least two snapshots."""


@dataclass(frozen=True)
class Grid3D:
    """Cell-centered grid on the thin layer, periodic in x1, x2."""

    nx: int
    ny: int
    nz: int
    L: float
    delta: float

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("cell counts must be >= 1")
        if self.L <= 0 or self.delta <= 0:
            raise ValueError("period length and layer thickness must be positive")

    @property
    def dx(self):
        return self.L / self.nx

    @property
    def dy(self):
        return self.L / self.ny

    @property
    def dz(self):
        return self.delta / self.nz

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def cell_volume(self):
        return self.dx * self.dy * self.dz

    def horizontal(self) -> "Grid2D":
        return Grid2D(self.nx, self.ny, self.L)

    def x1(self):
        return (np.arange(self.nx) + 0.5) * self.dx

    def x2(self):
        return (np.arange(self.ny) + 0.5) * self.dy

    def x3(self):
        return (np.arange(self.nz) + 0.5) * self.dz


@dataclass(frozen=True)
class Grid2D:
    """Cell-centered doubly periodic grid on [0,L)^2."""

    nx: int
    ny: int
    L: float

    def __post_init__(self):
        if min(self.nx, self.ny) < 1:
            raise ValueError("cell counts must be >= 1")
        if self.L <= 0:
            raise ValueError("period length must be positive")

    @property
    def dx(self):
        return self.L / self.nx

    @property
    def dy(self):
        return self.L / self.ny

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def cell_area(self):
        return self.dx * self.dy

    def x1(self):
        return (np.arange(self.nx) + 0.5) * self.dx

    def x2(self):
        return (np.arange(self.ny) + 0.5) * self.dy

    def mesh(self):
        return np.meshgrid(self.x1(), self.x2(), indexing="ij")

    def wavenumbers(self):
        """Physical wavenumber arrays (k1 as column, k2 as row)."""
        return _wavenumbers(self.nx, self.ny, self.L)

    def derivative_wavenumbers(self):
        """Wavenumbers with the Nyquist line zeroed.

        Odd spectral derivatives of real samples are parity-ambiguous on
        the Nyquist modes; every first-derivative operator in the package
        uses these arrays so curl, divergence and projection identities
        close exactly on real fields.
        """
        return _deriv_wavenumbers(self.nx, self.ny, self.L)


@lru_cache(maxsize=None)
def _wavenumbers(nx, ny, L):
    k1 = 2.0 * np.pi * np.fft.fftfreq(nx, d=L / nx).reshape(nx, 1)
    k2 = 2.0 * np.pi * np.fft.fftfreq(ny, d=L / ny).reshape(1, ny)
    k1.setflags(write=False)
    k2.setflags(write=False)
    return k1, k2


@lru_cache(maxsize=None)
def _deriv_wavenumbers(nx, ny, L):
    k1, k2 = (k.copy() for k in _wavenumbers(nx, ny, L))
    if nx % 2 == 0:
        k1[nx // 2, 0] = 0.0
    if ny % 2 == 0:
        k2[0, ny // 2] = 0.0
    k1.setflags(write=False)
    k2.setflags(write=False)
    return k1, k2


def _prepare(values, shape, what):
    v = np.asarray(values, dtype=float)
    if v.shape != shape:
        raise ValueError(f"{what}: expected shape {shape}, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what}: values must be finite")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class ScalarField3D:
    grid: Grid3D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _prepare(self.values, self.grid.shape, "ScalarField3D"))


@dataclass(frozen=True)
class VectorField3D:
    """Three-component cell field, values shaped (3, nx, ny, nz)."""

    grid: Grid3D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _prepare(self.values, (3,) + self.grid.shape, "VectorField3D")
        )


@dataclass(frozen=True)
class ScalarField2D:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _prepare(self.values, self.grid.shape, "ScalarField2D"))


@dataclass(frozen=True)
class VectorField2D:
    """Vector cell field with 2 or 3 components, values (ncomp, nx, ny).

    Three components arise as vertical averages of 3D fields; purely
    horizontal fields carry two.
    """

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[0] not in (2, 3) or v.shape[1:] != self.grid.shape:
            raise ValueError(f"VectorField2D: bad shape {v.shape} for grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("VectorField2D: values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def ncomp(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SnapshotSeries:
    """Time-ordered snapshots on a common grid.

    Entries may be fields or solver states; anything with a ``grid``
    attribute qualifies.
    """

    times: tuple
    entries: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        entries = tuple(self.entries)
        if len(times) != len(entries):
            raise ValueError("times and entries must have equal length")
        if len(times) == 0:
            raise ValueError("series must be nonempty")
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        grids = {e.grid for e in entries}
        if len(grids) > 1:
            raise ValueError("all snapshots must share one grid")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.times)

    @property
    def grid(self):
        return self.entries[0].grid


def vertical_average(f):
    """Columnwise mean over the vertical cells, (1/delta) * integral dx3.

    Midpoint quadrature of the vertical integral divided by the thickness;
    exact for fields constant in x3.
    """
    if isinstance(f, ScalarField3D):
        return ScalarField2D(f.grid.horizontal(), f.values.mean(axis=2))
    if isinstance(f, VectorField3D):
        return VectorField2D(f.grid.horizontal(), f.values.mean(axis=3))
    raise TypeError(f"cannot vertically average {type(f).__name__}")


def _pointwise_magnitude(values, is_vector):
    if is_vector:
        return np.sqrt(np.sum(values * values, axis=0))
    return np.abs(values)


def _quadrature_lp(values, is_vector, p, weight):
    mag = _pointwise_magnitude(values, is_vector)
    if np.isinf(p):
        return float(mag.max(initial=0.0))
    return float((np.sum(mag**p) * weight) ** (1.0 / p))


def _spectral_derivative(values, grid, a, b):
    """d^a/dx1^a d^b/dx2^b of a periodic 2D array, computed in Fourier space."""
    k1, k2 = grid.wavenumbers()
    fhat = np.fft.fft2(values)
    fhat = fhat * (1j * k1) ** a * (1j * k2) ** b
    return np.fft.ifft2(fhat).real


def _multi_indices(k):
    return [(a, b) for a, b in product(range(k + 1), repeat=2) if a + b <= k]


def norm(f, p=2.0, k=0):
    """Discrete W^{k,p} norm with cell quadrature.

    k = 0 works for every field type; k > 0 requires a 2D field, whose
    derivatives are taken spectrally (for p = 2 via Parseval, exactly).
    """
    p = float(p)
    if not (p >= 1.0):
        raise ValueError("p must lie in [1, inf]")
    if k < 0:
        raise ValueError("sobolev order must be nonnegative")

    if isinstance(f, (ScalarField3D, VectorField3D)):
        if k > 0:
            raise ValueError("derivative norms are unavailable on wall-bounded 3D fields")
        weight = f.grid.cell_volume
        return _quadrature_lp(f.values, isinstance(f, VectorField3D), p, weight)

    if isinstance(f, (ScalarField2D, VectorField2D)):
        grid = f.grid
        weight = grid.cell_area
        is_vector = isinstance(f, VectorField2D)
        if k == 0:
            return _quadrature_lp(f.values, is_vector, p, weight)
        comps = f.values if is_vector else f.values[None, :, :]
        if p == 2.0:
            # Parseval: cell sums equal weighted spectral sums exactly.
            k1, k2 = grid.wavenumbers()
            w = np.zeros(grid.shape)
            for a, b in _multi_indices(k):
                w += k1 ** (2 * a) * k2 ** (2 * b)
            total = 0.0
            scale = grid.L**2 / (grid.nx * grid.ny) ** 2
            for c in comps:
                total += np.sum(w * np.abs(np.fft.fft2(c)) ** 2) * scale
            return float(np.sqrt(total))
        terms = []
        for a, b in _multi_indices(k):
            dv = np.stack([_spectral_derivative(c, grid, a, b) for c in comps])
            mag = np.sqrt(np.sum(dv * dv, axis=0))
            if np.isinf(p):
                terms.append(mag.max(initial=0.0))
            else:
                terms.append(np.sum(mag**p) * weight)
        if np.isinf(p):
            return float(max(terms))
        return float(sum(terms) ** (1.0 / p))

    raise TypeError(f"cannot take the norm of {type(f).__name__}")


def time_norm(series: SnapshotSeries, q=2.0, spatial_p=2.0, k=0):
    """L^q-in-time norm of the spatial W^{k,p} norm over a snapshot series.

    Composite trapezoid quadrature in time; q = inf takes the max over
    snapshots.
    """
    q = float(q)
    if not (q >= 1.0):
        raise ValueError("q must lie in [1, inf]")
    values = np.array([norm(e, spatial_p, k) for e in series.entries])
    if np.isinf(q):
        return float(values.max())
    if len(series) < 2:
        raise InsufficientSamplesError(
            "time integration with q < inf needs at least two snapshots"
        )
    return float(np.trapezoid(values**q, np.array(series.times)) ** (1.0 / q))
