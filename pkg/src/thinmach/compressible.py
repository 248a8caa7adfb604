"""Finite-volume solver for the Mach-scaled compressible Euler layer.

Conserved variables are density and momentum; the momentum flux carries the
stiff p(rho)/eps^2 term.  Interface fluxes are local Lax-Friedrichs
(Rusanov) with the wave-speed bound |u.n| + sqrt(p'(rho))/eps, time
stepping is two-stage SSP-RK2.  Horizontal directions wrap periodically;
the vertical walls use reflecting ghost cells (density and tangential
momentum mirrored, normal momentum negated), which makes the wall mass
flux vanish identically and keeps x3-independent data exactly
x3-independent.

Discrete bookkeeping: mass and horizontal momentum telescope to exact
conservation, vertical momentum does not (the walls push back), and the
total energy sum(|m|^2/(2 rho) + H(rho, rho_tilde)/eps^2) dV never
increases, which is what the dissipation-defect proxy integrates.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, replace

import numpy as np

from .grids import Grid3D, ScalarField3D, SnapshotSeries, VectorField3D
from .pressure import relative_potential

__all__ = [
    "FluidState3D",
    "SolverParams",
    "ConservationLog",
    "RunResult",
    "VacuumStateError",
    "WallClockExceededError",
    "EnergyIncreaseError",
    "rusanov_flux",
    "stable_dt",
    "step",
    "run",
    "total_energy",
    "dissipation_defect",
]

VACUUM_FLOOR = 1e-10

_WALL_MIRROR = np.array([1.0, 1.0, -1.0]).reshape(3, 1, 1, 1)


class VacuumStateError(RuntimeError):
    """Density fell below the vacuum floor; rerun with a smaller cfl."""


class WallClockExceededError(RuntimeError):
    """The run hit its wall-clock budget before reaching end_time."""


class EnergyIncreaseError(RuntimeError):
    """Discrete total energy increased beyond round-off; scheme is broken."""


@dataclass(frozen=True)
class FluidState3D:
    """Conserved fields on the layer: density (> 0) and momentum."""

    rho: ScalarField3D
    mom: VectorField3D
    time: float = 0.0

    def __post_init__(self):
        if self.rho.grid != self.mom.grid:
            raise ValueError("density and momentum live on different grids")
        if float(self.rho.values.min()) <= 0.0:
            raise ValueError("density must be positive cell-wise")

    @property
    def grid(self) -> Grid3D:
        return self.rho.grid

    def velocity(self) -> VectorField3D:
        return VectorField3D(self.grid, self.mom.values / self.rho.values)


@dataclass(frozen=True)
class SolverParams:
    epsilon: float
    law: object
    cfl: float = 0.45
    end_time: float = 1.0
    snapshot_interval: float = 0.25
    wall_clock_budget: float | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (0.0 < self.cfl < 1.0):
            raise ValueError("cfl must lie in (0, 1)")


@dataclass
class ConservationLog:
    """Per-step totals: mass, momentum components, scaled total energy."""

    times: np.ndarray
    mass: np.ndarray
    momentum: np.ndarray  # shape (n, 3)
    energy: np.ndarray


@dataclass
class RunResult:
    series: SnapshotSeries
    log: ConservationLog


def _physical_flux(rho, mom, axis, law, epsilon):
    un = mom[axis] / rho
    mass_flux = mom[axis]
    mom_flux = mom * un
    mom_flux[axis] = mom_flux[axis] + law.p(rho) / epsilon**2
    return mass_flux, mom_flux


def rusanov_flux(rho_l, mom_l, rho_r, mom_r, axis, law, epsilon):
    """Rusanov interface flux between left/right states along an axis.

    Accepts scalars or arrays (momentum leading dimension 3).  Consistent:
    equal states return the exact physical flux.
    """
    rho_l = np.asarray(rho_l, dtype=float)
    rho_r = np.asarray(rho_r, dtype=float)
    mom_l = np.asarray(mom_l, dtype=float)
    mom_r = np.asarray(mom_r, dtype=float)
    if np.any(rho_l <= 0.0) or np.any(rho_r <= 0.0):
        raise VacuumStateError("non-positive density handed to the flux")
    fm_l, f_l = _physical_flux(rho_l, mom_l, axis, law, epsilon)
    fm_r, f_r = _physical_flux(rho_r, mom_r, axis, law, epsilon)
    c_l = np.sqrt(law.p_prime(rho_l)) / epsilon
    c_r = np.sqrt(law.p_prime(rho_r)) / epsilon
    lam = np.maximum(np.abs(mom_l[axis] / rho_l) + c_l, np.abs(mom_r[axis] / rho_r) + c_r)
    mass_flux = 0.5 * (fm_l + fm_r) - 0.5 * lam * (rho_r - rho_l)
    mom_flux = 0.5 * (f_l + f_r) - 0.5 * lam * (mom_r - mom_l)
    return mass_flux, mom_flux


def _rhs(rho, mom, grid: Grid3D, law, epsilon):
    drho = np.zeros_like(rho)
    dmom = np.zeros_like(mom)
    spacings = (grid.dx, grid.dy, grid.dz)

    for axis in (0, 1):  # periodic horizontal sweeps
        rho_r = np.roll(rho, -1, axis=axis)
        mom_r = np.roll(mom, -1, axis=axis + 1)
        fm, f = rusanov_flux(rho, mom, rho_r, mom_r, axis, law, epsilon)
        h = spacings[axis]
        drho -= (fm - np.roll(fm, 1, axis=axis)) / h
        dmom -= (f - np.roll(f, 1, axis=axis + 1)) / h

    # vertical sweep with reflecting slip walls
    ghost_bot_rho = rho[:, :, :1]
    ghost_top_rho = rho[:, :, -1:]
    ghost_bot_mom = mom[:, :, :, :1] * _WALL_MIRROR
    ghost_top_mom = mom[:, :, :, -1:] * _WALL_MIRROR
    rho_ext_l = np.concatenate([ghost_bot_rho, rho], axis=2)
    rho_ext_r = np.concatenate([rho, ghost_top_rho], axis=2)
    mom_ext_l = np.concatenate([ghost_bot_mom, mom], axis=3)
    mom_ext_r = np.concatenate([mom, ghost_top_mom], axis=3)
    fm, f = rusanov_flux(rho_ext_l, mom_ext_l, rho_ext_r, mom_ext_r, 2, law, epsilon)
    drho -= (fm[:, :, 1:] - fm[:, :, :-1]) / grid.dz
    dmom -= (f[:, :, :, 1:] - f[:, :, :, :-1]) / grid.dz

    return drho, dmom


def stable_dt(state: FluidState3D, params: SolverParams) -> float:
    """cfl * min over cells and axes of spacing / (|u_axis| + sqrt(p')/eps)."""
    grid = state.grid
    rho = state.rho.values
    mom = state.mom.values
    c = np.sqrt(params.law.p_prime(rho)) / params.epsilon
    dt = np.inf
    for axis, h in enumerate((grid.dx, grid.dy, grid.dz)):
        if h <= 0:
            raise ValueError("degenerate grid spacing")
        speed = np.abs(mom[axis] / rho) + c
        dt = min(dt, h / float(speed.max()))
    return params.cfl * dt


def _check_positive(rho):
    m = float(rho.min())
    if m <= VACUUM_FLOOR:
        raise VacuumStateError(
            f"density reached {m:.3e} (vacuum floor {VACUUM_FLOOR:g}); try a smaller cfl"
        )


def step(state: FluidState3D, params: SolverParams, dt: float) -> FluidState3D:
    """One SSP-RK2 (Heun) step of the finite-volume update."""
    grid = state.grid
    rho0 = state.rho.values
    mom0 = state.mom.values

    dr, dm = _rhs(rho0, mom0, grid, params.law, params.epsilon)
    rho1 = rho0 + dt * dr
    mom1 = mom0 + dt * dm
    _check_positive(rho1)

    dr, dm = _rhs(rho1, mom1, grid, params.law, params.epsilon)
    rho2 = 0.5 * rho0 + 0.5 * (rho1 + dt * dr)
    mom2 = 0.5 * mom0 + 0.5 * (mom1 + dt * dm)
    _check_positive(rho2)

    return FluidState3D(
        ScalarField3D(grid, rho2), VectorField3D(grid, mom2), state.time + dt
    )


def total_energy(state: FluidState3D, law, epsilon) -> float:
    """sum over cells of (|m|^2 / (2 rho) + H(rho, rho_tilde)/eps^2) dV."""
    rho = state.rho.values
    mom = state.mom.values
    kinetic = 0.5 * np.sum(mom * mom, axis=0) / rho
    pressure = relative_potential(law, rho, law.rho_tilde) / epsilon**2
    return float(np.sum(kinetic + pressure) * state.grid.cell_volume)


def _totals(state: FluidState3D, law, epsilon):
    dv = state.grid.cell_volume
    mass = float(state.rho.values.sum() * dv)
    mom = state.mom.values.sum(axis=(1, 2, 3)) * dv
    return mass, mom, total_energy(state, law, epsilon)


def run(initial: FluidState3D, params: SolverParams) -> RunResult:
    """Advance to end_time, recording snapshots every snapshot_interval.

    Steps are clipped so snapshot times are hit exactly; per-step totals go
    to the conservation log.  A wall-clock budget overrun raises rather
    than silently truncating the series.
    """
    if params.end_time < 0:
        raise ValueError("end_time must be nonnegative")
    t_start = _time.perf_counter()

    n_snaps = max(0, int(round(params.end_time / params.snapshot_interval))) \
        if params.snapshot_interval > 0 else 0
    targets = [k * params.snapshot_interval for k in range(1, n_snaps + 1)]
    if not targets or abs(targets[-1] - params.end_time) > 1e-9 * max(params.end_time, 1.0):
        if params.end_time > 0:
            targets = [t for t in targets if t < params.end_time - 1e-12]
            targets.append(params.end_time)

    state = initial
    snap_times = [state.time]
    snaps = [state]
    log_t, log_m, log_p, log_e = [state.time], [], [], []
    mass, mom, en = _totals(state, params.law, params.epsilon)
    log_m.append(mass)
    log_p.append(mom)
    log_e.append(en)

    for target in targets:
        while state.time < target - 1e-12:
            if params.wall_clock_budget is not None:
                if _time.perf_counter() - t_start > params.wall_clock_budget:
                    raise WallClockExceededError(
                        f"wall-clock budget {params.wall_clock_budget:g}s exceeded "
                        f"at t = {state.time:g} of {params.end_time:g}"
                    )
            dt = min(stable_dt(state, params), target - state.time)
            state = step(state, params, dt)
            mass, mom, en = _totals(state, params.law, params.epsilon)
            log_t.append(state.time)
            log_m.append(mass)
            log_p.append(mom)
            log_e.append(en)
        state = replace(state, time=target)
        snap_times.append(target)
        snaps.append(state)

    if len(snaps) == 1:
        series = SnapshotSeries((snap_times[0],), (snaps[0],))
    else:
        series = SnapshotSeries(tuple(snap_times), tuple(snaps))
    log = ConservationLog(
        times=np.array(log_t),
        mass=np.array(log_m),
        momentum=np.array(log_p),
        energy=np.array(log_e),
    )
    return RunResult(series=series, log=log)


def dissipation_defect(series: SnapshotSeries, law, epsilon, delta):
    """(1/delta) * (E_total(0) - E_total(tau)) sampled at the snapshot times.

    Nonnegative and nondecreasing for a dissipative scheme; a negative
    excursion beyond 1e-12 * E(0) means the scheme lost its energy
    inequality and is reported as an error.
    """
    energies = np.array([total_energy(s, law, epsilon) for s in series.entries])
    d = (energies[0] - energies) / delta
    floor = -1e-12 * max(energies[0], 1.0) / delta
    if np.any(d < floor):
        raise EnergyIncreaseError(
            f"dissipation defect went negative ({d.min():.3e}); energy increased"
        )
    return np.array(series.times), d
