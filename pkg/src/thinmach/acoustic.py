"""Exact spectral propagator for the scaled 2D acoustic system.

The system couples the density perturbation s and the velocity potential
psi through

    eps * ds/dt + rho_tilde * Lap(psi) = 0,
    eps * d(grad psi)/dt + (a^2 / rho_tilde) * grad s = 0,

so each Fourier mode is a harmonic oscillator with frequency
a |k| / eps.  The propagator applies the exact mode rotation: the quadratic
energy (1/2) * int [a^2 s^2 + rho_tilde^2 |grad psi|^2] is invariant per
mode, propagation over t1 then t2 equals propagation over t1 + t2, and
negated time inverts it.

Spectral coefficients are normalized so that f(x) = sum_k fhat_k e^{ikx}
on the cell centers (``fft2 / (nx*ny)``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .grids import Grid2D, ScalarField2D, SnapshotSeries, VectorField2D, time_norm

__all__ = [
    "AcousticState2D",
    "RegularizationParams",
    "UnderSampledWarning",
    "acoustic_state",
    "acoustic_energy",
    "propagate",
    "regularize",
    "regularize_state",
    "dispersive_norms",
]


class UnderSampledWarning(UserWarning):
    """Raised when time sampling cannot resolve the fastest oscillation."""


def _coefficients(values):
    n = values.shape[0] * values.shape[1]
    return np.fft.fft2(values) / n


def _values(coeffs):
    n = coeffs.shape[0] * coeffs.shape[1]
    return np.fft.ifft2(coeffs * n).real


@dataclass(frozen=True)
class AcousticState2D:
    """Spectral state (s_hat, psi_hat) of the perturbation pair."""

    grid: Grid2D
    s_hat: np.ndarray
    psi_hat: np.ndarray
    time: float
    epsilon: float
    rho_tilde: float
    a2: float

    def __post_init__(self):
        for name in ("s_hat", "psi_hat"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name}: expected shape {self.grid.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.rho_tilde <= 0 or self.a2 <= 0:
            raise ValueError("rho_tilde and a2 must be positive")

    def s_field(self) -> ScalarField2D:
        return ScalarField2D(self.grid, _values(self.s_hat))

    def psi_field(self) -> ScalarField2D:
        return ScalarField2D(self.grid, _values(self.psi_hat))

    def psi_gradient(self) -> VectorField2D:
        k1, k2 = self.grid.derivative_wavenumbers()
        g1 = _values(1j * k1 * self.psi_hat)
        g2 = _values(1j * k2 * self.psi_hat)
        return VectorField2D(self.grid, np.stack([g1, g2]))

    def psi_laplacian(self) -> ScalarField2D:
        k1, k2 = self.grid.wavenumbers()
        return ScalarField2D(self.grid, _values(-(k1**2 + k2**2) * self.psi_hat))

    def s_gradient(self) -> VectorField2D:
        k1, k2 = self.grid.derivative_wavenumbers()
        g1 = _values(1j * k1 * self.s_hat)
        g2 = _values(1j * k2 * self.s_hat)
        return VectorField2D(self.grid, np.stack([g1, g2]))


def acoustic_state(s: ScalarField2D, psi: ScalarField2D, epsilon, law, time=0.0):
    """Build a spectral state from real-space perturbation fields."""
    if s.grid != psi.grid:
        raise ValueError("s and psi live on different grids")
    return AcousticState2D(
        grid=s.grid,
        s_hat=_coefficients(s.values),
        psi_hat=_coefficients(psi.values),
        time=float(time),
        epsilon=float(epsilon),
        rho_tilde=float(law.rho_tilde),
        a2=float(law.sound_speed_sq),
    )


def acoustic_energy(state: AcousticState2D) -> float:
    """(1/2) * int [a^2 |s|^2 + rho_tilde^2 |grad psi|^2] dx, spectrally."""
    k1, k2 = state.grid.wavenumbers()
    ksq = k1**2 + k2**2
    area = state.grid.L**2
    e = state.a2 * np.abs(state.s_hat) ** 2 + state.rho_tilde**2 * ksq * np.abs(state.psi_hat) ** 2
    return float(0.5 * area * e.sum())


def propagate(state: AcousticState2D, t: float) -> AcousticState2D:
    """Advance the state by a time increment t with the exact mode rotation."""
    k1, k2 = state.grid.wavenumbers()
    ksq = k1**2 + k2**2
    a = math.sqrt(state.a2)
    omega = a * np.sqrt(ksq) / state.epsilon
    alpha = state.rho_tilde * ksq / state.epsilon          # ds/dt = alpha * psi
    beta = state.a2 / (state.epsilon * state.rho_tilde)    # dpsi/dt = -beta * s

    c = np.cos(omega * t)
    s_over = np.where(omega > 0.0, np.sin(omega * t) / np.where(omega > 0.0, omega, 1.0), t)
    s_new = c * state.s_hat + alpha * s_over * state.psi_hat
    psi_new = c * state.psi_hat - beta * s_over * state.s_hat
    return replace(state, s_hat=s_new, psi_hat=psi_new, time=state.time + t)


@dataclass(frozen=True)
class RegularizationParams:
    """Sharp spectral cutoff at wavenumber K = ceil(1/eta)."""

    eta: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    @property
    def cutoff_wavenumber(self):
        return float(math.ceil(1.0 / self.eta))


def _truncation_mask(grid: Grid2D, params: RegularizationParams):
    k1, k2 = grid.wavenumbers()
    return np.sqrt(k1**2 + k2**2) <= params.cutoff_wavenumber


def regularize(field: ScalarField2D, params: RegularizationParams) -> ScalarField2D:
    """Project onto modes with |k| <= K(eta).

    Idempotent, linear, an L^2 contraction; the result has every Sobolev
    norm finite with the bound ||out||_{W^{m,2}} <= (1+K^2)^{m/2} ||in||.
    """
    mask = _truncation_mask(field.grid, params)
    return ScalarField2D(field.grid, _values(_coefficients(field.values) * mask))


def regularize_state(state: AcousticState2D, params: RegularizationParams) -> AcousticState2D:
    mask = _truncation_mask(state.grid, params)
    return replace(state, s_hat=state.s_hat * mask, psi_hat=state.psi_hat * mask)


def max_frequency(state: AcousticState2D, tol=1e-14) -> float:
    """Largest oscillator frequency among modes that actually carry data."""
    k1, k2 = state.grid.wavenumbers()
    kk = np.sqrt(k1**2 + k2**2)
    active = (np.abs(state.s_hat) > tol) | (np.abs(state.psi_hat) > tol)
    if not active.any():
        return 0.0
    return float(math.sqrt(state.a2) * kk[active].max() / state.epsilon)


def dispersive_norms(state0: AcousticState2D, horizon, samples, q, p, k=0,
                     enforce_scaling=True):
    """Space-time norm ||psi|| + ||s|| in L^q(0,horizon; W^{k,p}).

    The admissible exponent pairs satisfy 2/q = 1/2 - 1/p with p in (2,inf);
    pass enforce_scaling=False to evaluate other pairs.
    """
    q = float(q)
    p = float(p)
    if enforce_scaling:
        if not (2.0 < p < np.inf) or abs(2.0 / q - (0.5 - 1.0 / p)) > 1e-12:
            raise ValueError(
                f"(q, p) = ({q:g}, {p:g}) violates 2/q = 1/2 - 1/p with p in (2, inf)"
            )
    if samples < 2:
        raise ValueError("need at least two time samples")
    step = horizon / samples
    wmax = max_frequency(state0)
    if wmax * step > np.pi / 4.0:
        warnings.warn(
            f"sampling interval {step:g} under-resolves the fastest oscillation "
            f"(omega_max = {wmax:g}); refine samples",
            UnderSampledWarning,
        )
    times = np.linspace(0.0, horizon, samples)
    s_fields = []
    psi_fields = []
    for t in times:
        st = propagate(state0, float(t))
        s_fields.append(st.s_field())
        psi_fields.append(st.psi_field())
    # snapshot times must be strictly increasing and the series starts at t0
    offset = [float(t) for t in times]
    s_series = SnapshotSeries(tuple(offset), tuple(s_fields))
    psi_series = SnapshotSeries(tuple(offset), tuple(psi_fields))
    return time_norm(psi_series, q, p, k) + time_norm(s_series, q, p, k)
