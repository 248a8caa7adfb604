"""Generators for well- and ill-prepared initial data on the layer.

A recipe holds band-limited harmonic profiles for the solenoidal velocity
(specified through its streamfunction, so the curl construction is
divergence-free by design), the density perturbation and the acoustic
potential.  Profiles are multiplied by a smooth plateau window so all
perturbations live in a central sub-box of the torus, honoring the
far-field contract; the velocity is rebuilt as the spectral curl of the
windowed streamfunction, which restores exact spectral solenoidality at
the cost of interpolation ringing outside the box that shrinks with grid
refinement.

The 3D build lifts the horizontal fields without x3 dependence:
rho = rho_tilde + eps * s_eta, m = rho * (v0 + grad psi_eta, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .acoustic import AcousticState2D, RegularizationParams, acoustic_state, regularize
from .compressible import FluidState3D
from .grids import Grid2D, Grid3D, ScalarField2D, ScalarField3D, VectorField2D, VectorField3D
from .incompressible import IncompressibleState2D, state_from_vorticity
from .pressure import relative_potential

__all__ = [
    "HarmonicProfile",
    "DataRecipe",
    "RecipeError",
    "support_window",
    "build_initial_3d",
    "limit_initial_2d",
    "acoustic_initial",
    "convergence_hypothesis_value",
]


class RecipeError(ValueError):
    """The recipe cannot produce admissible data (e.g. density would vanish)."""


@dataclass(frozen=True)
class HarmonicProfile:
    """Band-limited profile sum_j amp_j cos(2 pi (k1_j x + k2_j y)/L + phase_j)."""

    modes: tuple = ()

    def __post_init__(self):
        clean = []
        for m in self.modes:
            k1, k2, amp, phase = m
            clean.append((int(k1), int(k2), float(amp), float(phase)))
        object.__setattr__(self, "modes", tuple(clean))

    @property
    def empty(self):
        return len(self.modes) == 0 or all(m[2] == 0.0 for m in self.modes)

    def sample(self, grid: Grid2D) -> np.ndarray:
        x, y = grid.mesh()
        out = np.zeros(grid.shape)
        for k1, k2, amp, phase in self.modes:
            out += amp * np.cos(2.0 * np.pi * (k1 * x + k2 * y) / grid.L + phase)
        return out

    def rescaled(self, factors) -> "HarmonicProfile":
        if len(factors) != len(self.modes):
            raise ValueError("one factor per mode required")
        return HarmonicProfile(
            tuple((k1, k2, amp * f, ph) for (k1, k2, amp, ph), f in zip(self.modes, factors))
        )


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def support_window(grid: Grid2D, fraction=0.5, transition=0.6) -> np.ndarray:
    """Plateau bump: 1 on the inner part of the central box of side
    fraction * L, quintic decay to exactly 0 at the box boundary."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError("support fraction must lie in (0, 1]")
    half = 0.5 * fraction * grid.L
    c = 0.5 * grid.L

    def w(coord):
        s = np.abs(coord - c) / half
        return 1.0 - _smoothstep((s - (1.0 - transition)) / transition)

    x, y = grid.mesh()
    return w(x) * w(y)


@dataclass(frozen=True)
class DataRecipe:
    """Specification of the initial perturbations.

    kind 'well-prepared' forbids acoustic content (s0, psi0 empty); the
    ill-prepared kind carries order-one s0 and/or psi0.
    """

    kind: str
    v0_stream: HarmonicProfile
    s0: HarmonicProfile
    psi0: HarmonicProfile
    epsilon: float
    eta: float
    support_fraction: float = 0.5
    windowed: bool = True

    def __post_init__(self):
        if self.kind not in ("well-prepared", "ill-prepared"):
            raise RecipeError(f"unknown recipe kind {self.kind!r}")
        if self.kind == "well-prepared" and not (self.s0.empty and self.psi0.empty):
            raise RecipeError("well-prepared data cannot carry s0 or psi0")
        if self.epsilon <= 0:
            raise RecipeError("epsilon must be positive")
        if self.eta <= 0:
            raise RecipeError("eta must be positive")

    def regularization(self) -> RegularizationParams:
        return RegularizationParams(self.eta)

    def perturbed(self, rng: np.random.Generator, relative=1e-2) -> "DataRecipe":
        """Seeded relative noise on every mode amplitude (ensemble members)."""

        def jitter(profile):
            if not profile.modes:
                return profile
            f = 1.0 + relative * rng.standard_normal(len(profile.modes))
            return profile.rescaled(f)

        return replace(
            self, v0_stream=jitter(self.v0_stream), s0=jitter(self.s0), psi0=jitter(self.psi0)
        )


def _windowed_sample(profile: HarmonicProfile, recipe: DataRecipe, grid: Grid2D):
    values = profile.sample(grid)
    if recipe.windowed:
        values = values * support_window(grid, recipe.support_fraction)
    return values


def velocity_field_2d(recipe: DataRecipe, grid: Grid2D) -> VectorField2D:
    """Solenoidal v0 as the spectral curl of the windowed streamfunction."""
    stream = _windowed_sample(recipe.v0_stream, recipe, grid)
    k1, k2 = grid.derivative_wavenumbers()
    s_hat = np.fft.fft2(stream)
    # drop the parity-ambiguous Nyquist lines so curl and the
    # vorticity-to-velocity reconstruction are exact inverses
    if grid.nx % 2 == 0:
        s_hat[grid.nx // 2, :] = 0.0
    if grid.ny % 2 == 0:
        s_hat[:, grid.ny // 2] = 0.0
    u1 = np.fft.ifft2(-1j * k2 * s_hat).real
    u2 = np.fft.ifft2(1j * k1 * s_hat).real
    v = VectorField2D(grid, np.stack([u1, u2]))
    div_hat = 1j * (k1 * np.fft.fft2(u1) + k2 * np.fft.fft2(u2))
    scale = max(float(np.abs(s_hat).max()), 1.0)
    if float(np.abs(div_hat).max()) > 1e-12 * scale * grid.nx * grid.ny:
        raise RecipeError("constructed v0 is not solenoidal")
    return v


def s0_field(recipe: DataRecipe, grid: Grid2D, regularized=True) -> ScalarField2D:
    raw = ScalarField2D(grid, _windowed_sample(recipe.s0, recipe, grid))
    if not regularized:
        return raw
    return regularize(raw, recipe.regularization())


def psi0_field(recipe: DataRecipe, grid: Grid2D, regularized=True) -> ScalarField2D:
    raw = ScalarField2D(grid, _windowed_sample(recipe.psi0, recipe, grid))
    if not regularized:
        return raw
    return regularize(raw, recipe.regularization())


def _psi_gradient(psi: ScalarField2D) -> np.ndarray:
    k1, k2 = psi.grid.derivative_wavenumbers()
    p_hat = np.fft.fft2(psi.values)
    g1 = np.fft.ifft2(1j * k1 * p_hat).real
    g2 = np.fft.ifft2(1j * k2 * p_hat).real
    return np.stack([g1, g2])


def mean_velocity_2d(recipe: DataRecipe, grid: Grid2D) -> VectorField2D:
    """The full initial horizontal velocity v0 + grad psi_eta."""
    v = velocity_field_2d(recipe, grid).values
    g = _psi_gradient(psi0_field(recipe, grid))
    return VectorField2D(grid, v + g)


def build_initial_3d(recipe: DataRecipe, grid: Grid3D, law) -> FluidState3D:
    """Lift the horizontal data to the layer without x3 dependence."""
    g2 = grid.horizontal()
    s_eta = s0_field(recipe, g2).values
    rho2 = law.rho_tilde + recipe.epsilon * s_eta
    if float(rho2.min()) <= 0.0:
        raise RecipeError(
            f"density would reach {rho2.min():g} <= 0; shrink eps * |s0| below rho_tilde"
        )
    u2 = mean_velocity_2d(recipe, g2).values

    rho = np.repeat(rho2[:, :, None], grid.nz, axis=2)
    mom = np.zeros((3,) + grid.shape)
    mom[0] = (rho2 * u2[0])[:, :, None]
    mom[1] = (rho2 * u2[1])[:, :, None]
    return FluidState3D(ScalarField3D(grid, rho), VectorField3D(grid, mom), 0.0)


def limit_initial_2d(recipe: DataRecipe, grid: Grid2D) -> IncompressibleState2D:
    """The solenoidal part of the initial velocity, as a vorticity state.

    The acoustic gradient never enters here; it is routed to the wave
    propagator instead.
    """
    v = velocity_field_2d(recipe, grid)
    k1, k2 = grid.derivative_wavenumbers()
    w_hat = 1j * (k1 * np.fft.fft2(v.values[1]) - k2 * np.fft.fft2(v.values[0]))
    omega = np.fft.ifft2(w_hat).real
    return state_from_vorticity(ScalarField2D(grid, omega))


def acoustic_initial(recipe: DataRecipe, grid: Grid2D, law) -> AcousticState2D:
    """Regularized (s, psi) pair feeding the exact wave propagator."""
    return acoustic_state(
        s0_field(recipe, grid), psi0_field(recipe, grid), recipe.epsilon, law
    )


def convergence_hypothesis_value(state: FluidState3D, recipe: DataRecipe, law,
                                 epsilon, delta) -> float:
    """Data-preparation gap: (1/delta) * int [ rho |m/rho - u0|^2 / 2
    + H(rho, rho0)/eps^2 ] dx against the recipe's own reference fields.

    Zero (up to round-off) when the state was built exactly from the
    recipe; quadratic in any perturbation of the data.
    """
    grid = state.grid
    g2 = grid.horizontal()
    s_eta = s0_field(recipe, g2).values
    rho0 = law.rho_tilde + epsilon * s_eta
    u2 = mean_velocity_2d(recipe, g2).values

    rho = state.rho.values
    mom = state.mom.values
    u_ref = np.zeros((3,) + grid.shape)
    u_ref[0] = u2[0][:, :, None]
    u_ref[1] = u2[1][:, :, None]
    dev = mom / rho - u_ref
    kinetic = 0.5 * rho * np.sum(dev * dev, axis=0)
    pressure = relative_potential(law, rho, rho0[:, :, None]) / epsilon**2
    return float(np.sum(kinetic + pressure) * grid.cell_volume / delta)
