"""Pseudo-spectral vorticity-streamfunction solver for 2D incompressible Euler.

State is the vorticity w = d1 v2 - d2 v1 stored spectrally (rfft2 layout).
The streamfunction solves Lap(psi) = w with zero mean and the velocity is
v = (-d2 psi, d1 psi), which keeps div v = 0 to machine precision by
construction.  Time stepping is RK4 on dw/dt = -v . grad w with 2/3-rule
dealiasing; the k = 0 mode of the advection term is pinned to zero so the
mean vorticity is preserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .grids import Grid2D, ScalarField2D, VectorField2D

__all__ = [
    "IncompressibleState2D",
    "UnderResolvedError",
    "state_from_vorticity",
    "helmholtz_project",
    "euler_step",
    "advance",
    "recover_pressure",
    "velocity_tendency",
    "kinetic_energy",
    "enstrophy",
]


class UnderResolvedError(RuntimeError):
    """Spectral energy piled up near the dealiasing cutoff."""


@lru_cache(maxsize=None)
def _spectral_setup(nx, ny, L):
    """Wavenumbers, inverse Laplacian and dealiasing mask in rfft2 layout."""
    k1 = 2.0 * np.pi * np.fft.fftfreq(nx, d=L / nx).reshape(nx, 1)
    k2 = 2.0 * np.pi * np.fft.rfftfreq(ny, d=L / ny).reshape(1, ny // 2 + 1)
    ksq = k1**2 + k2**2
    inv_ksq = np.zeros_like(ksq)
    nz = ksq > 0
    inv_ksq[nz] = 1.0 / ksq[nz]
    # first derivatives drop the parity-ambiguous Nyquist line
    k1 = k1.copy()
    k2 = k2.copy()
    if nx % 2 == 0:
        k1[nx // 2, 0] = 0.0
    if ny % 2 == 0:
        k2[0, -1] = 0.0
    m1 = np.abs(np.fft.fftfreq(nx) * nx).reshape(nx, 1)
    m2 = np.abs(np.fft.rfftfreq(ny) * ny).reshape(1, ny // 2 + 1)
    keep = (m1 <= nx / 3.0) & (m2 <= ny / 3.0)
    # top third of the retained band, used by the resolution monitor
    cut1, cut2 = nx / 3.0, ny / 3.0
    high = keep & ((m1 > 2.0 * cut1 / 3.0) | (m2 > 2.0 * cut2 / 3.0))
    return k1, k2, inv_ksq, keep, high


def _setup(grid: Grid2D):
    return _spectral_setup(grid.nx, grid.ny, grid.L)


@dataclass(frozen=True)
class IncompressibleState2D:
    grid: Grid2D
    omega_hat: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.omega_hat, dtype=complex)
        expected = (self.grid.nx, self.grid.ny // 2 + 1)
        if arr.shape != expected:
            raise ValueError(f"omega_hat: expected rfft2 shape {expected}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "omega_hat", arr)

    def vorticity(self) -> ScalarField2D:
        return ScalarField2D(self.grid, np.fft.irfft2(self.omega_hat, s=self.grid.shape))

    def streamfunction(self) -> ScalarField2D:
        _, _, inv_ksq, _, _ = _setup(self.grid)
        return ScalarField2D(self.grid, np.fft.irfft2(-inv_ksq * self.omega_hat, s=self.grid.shape))

    def velocity(self) -> VectorField2D:
        u1, u2 = _velocity_arrays(self.grid, self.omega_hat)
        return VectorField2D(self.grid, np.stack([u1, u2]))


def _velocity_arrays(grid, omega_hat):
    k1, k2, inv_ksq, _, _ = _setup(grid)
    psi_hat = -inv_ksq * omega_hat
    u1 = np.fft.irfft2(-1j * k2 * psi_hat, s=grid.shape)
    u2 = np.fft.irfft2(1j * k1 * psi_hat, s=grid.shape)
    return u1, u2


def state_from_vorticity(field: ScalarField2D, time=0.0) -> IncompressibleState2D:
    omega_hat = np.fft.rfft2(field.values)
    mean = abs(omega_hat[0, 0]) / (field.grid.nx * field.grid.ny)
    if mean > 1e-10:
        raise ValueError(f"vorticity must have zero mean on the torus (got {mean:g})")
    omega_hat = omega_hat.copy()
    omega_hat[0, 0] = 0.0
    return IncompressibleState2D(field.grid, omega_hat, float(time))


def helmholtz_project(u: VectorField2D) -> VectorField2D:
    """Divergence-free part of a periodic field: uhat - k (k.uhat)/|k|^2.

    The mean (k = 0) mode passes through; a third component, if present,
    is untouched (it has no horizontal divergence).  Idempotent, and the
    removed part is L^2-orthogonal to the output.
    """
    grid = u.grid
    k1, k2 = grid.derivative_wavenumbers()
    ksq = k1**2 + k2**2
    inv = np.zeros_like(ksq)
    nz = ksq > 0
    inv[nz] = 1.0 / ksq[nz]
    u1_hat = np.fft.fft2(u.values[0])
    u2_hat = np.fft.fft2(u.values[1])
    # uhat - k (k.uhat)/|k|^2 with k.uhat = -i * div_hat
    div_hat = 1j * (k1 * u1_hat + k2 * u2_hat)
    u1_hat = u1_hat + 1j * k1 * div_hat * inv
    u2_hat = u2_hat + 1j * k2 * div_hat * inv
    out = list(u.values)
    out[0] = np.fft.ifft2(u1_hat).real
    out[1] = np.fft.ifft2(u2_hat).real
    return VectorField2D(grid, np.stack(out))


def spectral_divergence(u: VectorField2D) -> ScalarField2D:
    k1, k2 = u.grid.derivative_wavenumbers()
    d = 1j * (k1 * np.fft.fft2(u.values[0]) + k2 * np.fft.fft2(u.values[1]))
    return ScalarField2D(u.grid, np.fft.ifft2(d).real)


def _advection_hat(grid, omega_hat, return_umax=False):
    k1, k2, inv_ksq, keep, _ = _setup(grid)
    psi_hat = -inv_ksq * omega_hat
    u1 = np.fft.irfft2(-1j * k2 * psi_hat, s=grid.shape)
    u2 = np.fft.irfft2(1j * k1 * psi_hat, s=grid.shape)
    wx = np.fft.irfft2(1j * k1 * omega_hat, s=grid.shape)
    wy = np.fft.irfft2(1j * k2 * omega_hat, s=grid.shape)
    rhs_hat = -np.fft.rfft2(u1 * wx + u2 * wy)
    rhs_hat *= keep
    rhs_hat[0, 0] = 0.0
    if return_umax:
        umax = float(np.sqrt(u1 * u1 + u2 * u2).max())
        return rhs_hat, umax
    return rhs_hat


def euler_step(state: IncompressibleState2D, dt: float) -> IncompressibleState2D:
    """One RK4 step of the dealiased vorticity equation."""
    grid = state.grid
    w = state.omega_hat
    r1, umax = _advection_hat(grid, w, return_umax=True)
    h = min(grid.dx, grid.dy)
    if umax * dt > h:
        raise ValueError(
            f"dt = {dt:g} exceeds the advective CFL limit {h / max(umax, 1e-300):g}"
        )
    r2 = _advection_hat(grid, w + 0.5 * dt * r1)
    r3 = _advection_hat(grid, w + 0.5 * dt * r2)
    r4 = _advection_hat(grid, w + dt * r3)
    w_new = w + (dt / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
    new = replace(state, omega_hat=w_new, time=state.time + dt)
    frac = under_resolution_fraction(new)
    if frac > 1e-3:
        raise UnderResolvedError(
            f"{frac:.2e} of the kinetic energy sits in the top third of the retained band"
        )
    return new


def under_resolution_fraction(state: IncompressibleState2D) -> float:
    """Kinetic-energy fraction in the highest third of the retained spectrum."""
    _, _, inv_ksq, keep, high = _setup(state.grid)
    ny = state.grid.ny
    # rfft2 stores half the spectrum; weight interior columns twice
    e2 = np.abs(state.omega_hat) ** 2 * inv_ksq
    col_weight = np.full(state.omega_hat.shape[1], 2.0)
    col_weight[0] = 1.0
    if ny % 2 == 0:
        col_weight[-1] = 1.0
    e2 = e2 * col_weight
    total = float((e2 * keep).sum())
    if total == 0.0:
        return 0.0
    return float((e2 * high).sum() / total)


def advance(state: IncompressibleState2D, t_target: float, cfl=0.4,
            dt_max=None) -> IncompressibleState2D:
    """Step to t_target with uniform RK4 substeps under an advective CFL."""
    remaining = t_target - state.time
    if remaining < -1e-12:
        raise ValueError("cannot step backwards")
    if remaining <= 1e-14:
        return state
    u = state.velocity().values
    umax = float(np.sqrt(u[0] ** 2 + u[1] ** 2).max())
    h = min(state.grid.dx, state.grid.dy)
    dt_cfl = cfl * h / max(umax, 1e-12)
    dt_cap = min(dt_cfl, dt_max) if dt_max else dt_cfl
    n = max(1, int(np.ceil(remaining / dt_cap)))
    dt = remaining / n
    for _ in range(n):
        state = euler_step(state, dt)
    return replace(state, time=t_target)


def recover_pressure(state: IncompressibleState2D) -> ScalarField2D:
    """Mean-zero pressure from Lap(P) = -div(v . grad v), spectrally."""
    grid = state.grid
    k1f, k2f = grid.derivative_wavenumbers()
    u1, u2 = _velocity_arrays(grid, state.omega_hat)
    du1 = np.fft.fft2(u1)
    du2 = np.fft.fft2(u2)
    u1x = np.fft.ifft2(1j * k1f * du1).real
    u1y = np.fft.ifft2(1j * k2f * du1).real
    u2x = np.fft.ifft2(1j * k1f * du2).real
    u2y = np.fft.ifft2(1j * k2f * du2).real
    n1 = u1 * u1x + u2 * u1y
    n2 = u1 * u2x + u2 * u2y
    div_n = 1j * (k1f * np.fft.fft2(n1) + k2f * np.fft.fft2(n2))
    ksq = k1f**2 + k2f**2
    p_hat = np.zeros_like(div_n)
    nz = ksq > 0
    p_hat[nz] = div_n[nz] / ksq[nz]
    return ScalarField2D(grid, np.fft.ifft2(p_hat).real)


def velocity_tendency(state: IncompressibleState2D) -> VectorField2D:
    """dv/dt = -P[(v . grad) v]; analytic through the momentum equation."""
    grid = state.grid
    u1, u2 = _velocity_arrays(grid, state.omega_hat)
    k1f, k2f = grid.derivative_wavenumbers()
    du1 = np.fft.fft2(u1)
    du2 = np.fft.fft2(u2)
    n1 = u1 * np.fft.ifft2(1j * k1f * du1).real + u2 * np.fft.ifft2(1j * k2f * du1).real
    n2 = u1 * np.fft.ifft2(1j * k1f * du2).real + u2 * np.fft.ifft2(1j * k2f * du2).real
    projected = helmholtz_project(VectorField2D(grid, np.stack([n1, n2])))
    return VectorField2D(grid, -projected.values)


def kinetic_energy(state: IncompressibleState2D) -> float:
    u = state.velocity().values
    return float(0.5 * np.sum(u[0] ** 2 + u[1] ** 2) * state.grid.cell_area)


def enstrophy(state: IncompressibleState2D) -> float:
    w = state.vorticity().values
    return float(0.5 * np.sum(w * w) * state.grid.cell_area)
