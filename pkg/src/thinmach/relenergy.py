"""Relative energy, remainder terms, uniform bounds and ensemble averaging.

The convergence metric is the thickness-normalized Bregman-type distance

    E(rho, m | r, U) = (1/delta) * int [ rho |m/rho - U|^2 / 2
                                         + H(rho, r) / eps^2 ] dx,

with H the convexity gap of the pressure potential.  The reference pair
(r, U) is either the flat pair (rho_tilde, (v, 0)) of the limit theorem or
the corrected pair (rho_tilde + eps*s, (v + grad psi, 0)) built from the
acoustic solution.  For ensembles the functional averages over members,
which is the empirical reading of the measure-valued pairing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acoustic import AcousticState2D
from .compressible import FluidState3D, total_energy
from .grids import Grid2D, Grid3D, ScalarField2D, ScalarField3D, VectorField2D, norm, vertical_average
from .incompressible import IncompressibleState2D, velocity_tendency
from .pressure import DensityCutoff, relative_potential

__all__ = [
    "ReferencePair",
    "ReferenceFrame",
    "RelativeEnergyReport",
    "BoundReport",
    "EnsembleMeasure",
    "Box2D",
    "flat_reference",
    "corrected_reference",
    "reference_frame",
    "relative_energy",
    "remainder_terms",
    "uniform_bound_report",
    "ensemble_observable",
]


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned horizontal box; used to localize the energy integral."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def mask(self, grid):
        x, y = np.meshgrid(
            (np.arange(grid.nx) + 0.5) * grid.L / grid.nx,
            (np.arange(grid.ny) + 0.5) * grid.L / grid.ny,
            indexing="ij",
        )
        return (x >= self.x_lo) & (x < self.x_hi) & (y >= self.y_lo) & (y < self.y_hi)

    @staticmethod
    def central(L, side_fraction=0.25):
        half = 0.5 * side_fraction * L
        return Box2D(0.5 * L - half, 0.5 * L + half, 0.5 * L - half, 0.5 * L + half)


@dataclass(frozen=True)
class ReferencePair:
    """Smooth reference (r, U) lifted to the layer; U has no third component."""

    r: np.ndarray    # (nx, ny, nz)
    U: np.ndarray    # (3, nx, ny, nz)
    grid: Grid3D
    time: float = 0.0

    def __post_init__(self):
        if self.r.shape != self.grid.shape or self.U.shape != (3,) + self.grid.shape:
            raise ValueError("reference arrays do not match the grid")
        if float(self.r.min()) <= 0.0:
            raise ValueError("reference density must be positive")
        if float(np.abs(self.U[2]).max()) != 0.0:
            raise ValueError("reference velocity must have zero third component")


@dataclass(frozen=True)
class ReferenceFrame:
    """Reference pair plus the analytic derivatives the remainder needs."""

    pair: ReferencePair
    dt_U: np.ndarray      # (3, nx, ny, nz)
    grad_U: np.ndarray    # (3, 3, nx, ny, nz), grad_U[i, j] = d_i U_j
    div_U: np.ndarray     # (nx, ny, nz)
    dt_r: np.ndarray      # (nx, ny, nz)
    grad_r: np.ndarray    # (3, nx, ny, nz)

    @property
    def time(self):
        return self.pair.time


@dataclass(frozen=True)
class RelativeEnergyReport:
    value: float
    kinetic_part: float
    pressure_part: float
    ess_pressure: float
    res_pressure: float
    time: float
    dissipation_defect: float = 0.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("relative energy must be nonnegative")


@dataclass(frozen=True)
class EnsembleMeasure:
    """Uniformly weighted empirical measure over same-grid, same-time states."""

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("ensemble must be nonempty")
        g = members[0].grid
        t = members[0].time
        if any(m.grid != g or abs(m.time - t) > 1e-12 for m in members[1:]):
            raise ValueError("members must share grid and time")
        object.__setattr__(self, "members", members)

    @property
    def grid(self):
        return self.members[0].grid

    @property
    def time(self):
        return self.members[0].time


def _lift2d(values2d, nz):
    return np.repeat(np.asarray(values2d)[:, :, None], nz, axis=2)


def _lift_vec(values2d, nz):
    out = np.zeros((3, values2d.shape[1], values2d.shape[2], nz))
    out[0] = _lift2d(values2d[0], nz)
    out[1] = _lift2d(values2d[1], nz)
    return out


def flat_reference(v_state: IncompressibleState2D, grid: Grid3D, law) -> ReferencePair:
    """(rho_tilde, (v, 0)): the limit theorem's comparison pair."""
    v = v_state.velocity().values
    return ReferencePair(
        r=np.full(grid.shape, float(law.rho_tilde)),
        U=_lift_vec(v, grid.nz),
        grid=grid,
        time=v_state.time,
    )


def corrected_reference(v_state: IncompressibleState2D, ac: AcousticState2D,
                        grid: Grid3D, law) -> ReferencePair:
    """(rho_tilde + eps*s, (v + grad psi, 0)): the corrected comparison pair."""
    if abs(v_state.time - ac.time) > 1e-9:
        raise ValueError("2D Euler and acoustic snapshots are misaligned in time")
    v = v_state.velocity().values
    g = ac.psi_gradient().values
    r2 = law.rho_tilde + ac.epsilon * ac.s_field().values
    if float(r2.min()) <= 0.0:
        raise ValueError("corrected reference density lost positivity")
    return ReferencePair(
        r=_lift2d(r2, grid.nz),
        U=_lift_vec(v + g, grid.nz),
        grid=grid,
        time=v_state.time,
    )


def _horizontal_gradients(grid2: Grid2D, values):
    k1, k2 = grid2.derivative_wavenumbers()
    f_hat = np.fft.fft2(values)
    return (np.fft.ifft2(1j * k1 * f_hat).real, np.fft.ifft2(1j * k2 * f_hat).real)


def reference_frame(v_state: IncompressibleState2D, ac: AcousticState2D,
                    grid: Grid3D, law) -> ReferenceFrame:
    """Corrected reference plus analytic time/space derivatives.

    The wave-system identities eps * ds/dt = -rho_tilde * Lap(psi) and
    eps * d(grad psi)/dt = -a^2 grad s supply the reference time
    derivatives exactly, no finite differencing involved.
    """
    pair = corrected_reference(v_state, ac, grid, law)
    g2 = ac.grid
    nz = grid.nz
    eps = ac.epsilon

    v_dot = velocity_tendency(v_state).values
    grad_psi_dot = -(ac.a2 / (eps * ac.rho_tilde)) * ac.s_gradient().values
    dt_U = _lift_vec(v_dot + grad_psi_dot, nz)

    v = v_state.velocity().values
    g = ac.psi_gradient().values
    U2 = v + g
    grad_U = np.zeros((3, 3) + grid.shape)
    for j in range(2):
        d1, d2 = _horizontal_gradients(g2, U2[j])
        grad_U[0, j] = _lift2d(d1, nz)
        grad_U[1, j] = _lift2d(d2, nz)
    div_U = grad_U[0, 0] + grad_U[1, 1]

    dt_r = _lift2d(-ac.rho_tilde * ac.psi_laplacian().values, nz)
    gs = ac.s_gradient().values
    grad_r = np.zeros((3,) + grid.shape)
    grad_r[0] = _lift2d(eps * gs[0], nz)
    grad_r[1] = _lift2d(eps * gs[1], nz)

    return ReferenceFrame(pair=pair, dt_U=dt_U, grad_U=grad_U, div_U=div_U,
                          dt_r=dt_r, grad_r=grad_r)


def _single_state_parts(state: FluidState3D, ref: ReferencePair, law, epsilon,
                        cutoff, mask3):
    rho = state.rho.values
    mom = state.mom.values
    if float(rho.min()) <= 0.0:
        raise ValueError("state density must be positive")
    dev = mom / rho - ref.U
    kinetic = 0.5 * rho * np.sum(dev * dev, axis=0)
    # H >= 0 pointwise; the three-term form can round to -1e-17 near rho = r
    h = np.maximum(relative_potential(law, rho, ref.r), 0.0) / epsilon**2
    w = cutoff(rho)
    ess = w * h
    res = h - ess
    if mask3 is not None:
        kinetic = kinetic * mask3
        ess = ess * mask3
        res = res * mask3
    dv = state.grid.cell_volume
    return float(kinetic.sum() * dv), float(ess.sum() * dv), float(res.sum() * dv)


def relative_energy(state, ref: ReferencePair, law, epsilon, delta,
                    restrict_to: Box2D | None = None,
                    dissipation=0.0) -> RelativeEnergyReport:
    """Evaluate the relative energy of a state or ensemble against (r, U)."""
    members = state.members if isinstance(state, EnsembleMeasure) else (state,)
    grid = members[0].grid
    if grid != ref.grid:
        raise ValueError("state and reference grids differ")
    cutoff = DensityCutoff(law.rho_tilde)
    mask3 = None
    if restrict_to is not None:
        mask3 = restrict_to.mask(grid)[:, :, None].astype(float)

    kin = ess = res = 0.0
    for m in members:
        k, e, r_ = _single_state_parts(m, ref, law, epsilon, cutoff, mask3)
        kin += k
        ess += e
        res += r_
    n = len(members)
    kin /= n * delta
    ess /= n * delta
    res /= n * delta
    pressure = ess + res
    return RelativeEnergyReport(
        value=kin + pressure,
        kinetic_part=kin,
        pressure_part=pressure,
        ess_pressure=ess,
        res_pressure=res,
        time=members[0].time,
        dissipation_defect=float(dissipation),
    )


def _remainders_single(state: FluidState3D, frame: ReferenceFrame, law, epsilon, delta):
    rho = state.rho.values
    mom = state.mom.values
    U = frame.pair.U
    r = frame.pair.r
    u = mom / rho
    drift = rho * U - mom

    # material derivative of the reference velocity along the state velocity
    conv = frame.dt_U + np.einsum("i...,ij...->j...", u, frame.grad_U)
    r1 = np.sum(conv * drift, axis=0)

    p2 = law.potential_second(r)
    dt_pprime = p2 * frame.dt_r
    grad_pprime = p2[None] * frame.grad_r
    r2 = (r - rho) * dt_pprime - law.p(rho) * frame.div_U \
        - np.sum(mom * grad_pprime, axis=0)

    dv = state.grid.cell_volume
    return (
        float(r1.sum() * dv / delta),
        float(r2.sum() * dv / delta / epsilon**2),
    )


def remainder_terms(states, frames, law, epsilon, delta):
    """Per-snapshot remainder terms (R1, R2) of the relative-energy balance.

    R1 collects the convective coupling, R2 the pressure coupling with its
    1/eps^2 weight; the concentration term is identically zero for point
    ensembles of bounded discrete solutions.  Returns (times, R1, R2).
    """
    if len(states) != len(frames):
        raise ValueError("state and reference series have different lengths")
    times, r1s, r2s = [], [], []
    for st, fr in zip(states, frames):
        if abs(st.time - fr.time) > 1e-9:
            raise ValueError(
                f"misaligned snapshot times: state {st.time:g}, reference {fr.time:g}"
            )
        members = st.members if isinstance(st, EnsembleMeasure) else (st,)
        acc1 = acc2 = 0.0
        for m in members:
            a, b = _remainders_single(m, fr, law, epsilon, delta)
            acc1 += a
            acc2 += b
        times.append(st.time)
        r1s.append(acc1 / len(members))
        r2s.append(acc2 / len(members))
    return np.array(times), np.array(r1s), np.array(r2s)


@dataclass(frozen=True)
class BoundReport:
    """Vertically averaged norms mirroring the uniform a-priori bounds."""

    rho_ess_norm: float      # || [(rho_bar - rho_tilde)/eps]_ess ||_L2
    rho_res_norm: float      # eps^(-2/gamma) || [rho_bar]_res ||_Lgamma
    mbar_norm: float         # || [m_bar]_ess ||_L2 + || [m_bar]_res ||_L(2g/(g+1))
    energy_bound: float      # (1/delta) * total scaled energy
    time: float


def uniform_bound_report(state, law, epsilon, delta,
                         cutoff: DensityCutoff | None = None) -> BoundReport:
    """Evaluate the vertically averaged bound quantities for a state/ensemble."""
    members = state.members if isinstance(state, EnsembleMeasure) else (state,)
    grid = members[0].grid
    g2 = grid.horizontal()
    cutoff = cutoff or DensityCutoff(law.rho_tilde)
    gamma = getattr(law, "gamma", 2.0)

    rho_ess_dev = np.zeros(g2.shape)
    rho_res = np.zeros(g2.shape)
    m_ess = np.zeros((3,) + g2.shape)
    m_res = np.zeros((3,) + g2.shape)
    energy = 0.0
    for m in members:
        rho_bar = vertical_average(m.rho).values
        m_bar = vertical_average(m.mom).values
        w = cutoff(rho_bar)
        rho_ess_dev += w * (rho_bar - law.rho_tilde) / epsilon
        rho_res += (1.0 - w) * rho_bar
        m_ess += w * m_bar
        m_res += (1.0 - w) * m_bar
        energy += total_energy(m, law, epsilon)
    n = len(members)

    rho_ess_norm = norm(ScalarField2D(g2, rho_ess_dev / n), p=2)
    rho_res_norm = epsilon ** (-2.0 / gamma) * norm(ScalarField2D(g2, rho_res / n), p=gamma)
    q = 2.0 * gamma / (gamma + 1.0)
    mbar = norm(VectorField2D(g2, m_ess / n), p=2) + norm(VectorField2D(g2, m_res / n), p=q)
    return BoundReport(
        rho_ess_norm=rho_ess_norm,
        rho_res_norm=rho_res_norm,
        mbar_norm=mbar,
        energy_bound=energy / (n * delta),
        time=members[0].time,
    )


def ensemble_observable(measure: EnsembleMeasure, observable) -> ScalarField3D:
    """Cell-wise ensemble mean of observable(rho, mom); linear in the
    observable, and pointwise evaluation for a single member."""
    acc = None
    for m in measure.members:
        v = np.asarray(observable(m.rho.values, m.mom.values), dtype=float)
        if v.shape != m.grid.shape:
            raise ValueError("observable must return one value per cell")
        acc = v if acc is None else acc + v
    return ScalarField3D(measure.grid, acc / len(measure.members))


def kinetic_density(rho, mom):
    """|m|^2 / rho with the vacuum convention: finite states only; a cell
    with rho = 0 and m != 0 is rejected because its energy is infinite."""
    rho = np.asarray(rho, dtype=float)
    mom = np.asarray(mom, dtype=float)
    msq = np.sum(mom * mom, axis=0)
    bad = (rho == 0.0) & (msq > 0.0)
    if np.any(bad):
        raise ValueError("vacuum cell with nonzero momentum has infinite energy")
    out = np.zeros_like(rho)
    ok = rho > 0.0
    out[ok] = msq[ok] / rho[ok]
    return out
