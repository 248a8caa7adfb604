"""Relative energy, remainder terms, uniform bounds, ensemble averaging."""

import numpy as np
import pytest

from thinmach import acoustic, compressible, incompressible
from thinmach.compressible import FluidState3D
from thinmach.grids import Grid3D, ScalarField3D, VectorField3D
from thinmach.harness import RunConfig
from thinmach.initialdata import acoustic_initial, build_initial_3d, limit_initial_2d
from thinmach.pressure import GammaLaw
from thinmach.relenergy import (
    Box2D,
    EnsembleMeasure,
    ReferencePair,
    corrected_reference,
    ensemble_observable,
    kinetic_density,
    reference_frame,
    relative_energy,
    remainder_terms,
    uniform_bound_report,
)

LAW = GammaLaw(2.0, 1.0, 1.0)


def _grid(n=8, nz=2, L=2.0, delta=0.5):
    return Grid3D(n, n, nz, L, delta)


def _state(grid, rho, mom, time=0.0):
    return FluidState3D(ScalarField3D(grid, rho), VectorField3D(grid, mom), time)


def _flat_ref(grid, r=1.0):
    return ReferencePair(np.full(grid.shape, r), np.zeros((3,) + grid.shape), grid)


def test_zero_at_reference():
    grid = _grid()
    U = np.zeros((3,) + grid.shape)
    U[0] = 0.7
    r = np.full(grid.shape, 1.2)
    ref = ReferencePair(r, U, grid)
    st = _state(grid, r.copy(), r * U)
    rep = relative_energy(st, ref, LAW, 0.5, grid.delta)
    assert rep.value == 0.0
    assert rep.kinetic_part == 0.0
    assert rep.pressure_part == 0.0


def test_kinetic_hand_value():
    # rho = 1, m = (c, 0, 0) against (1, 0): E = c^2 L^2 / 2
    grid = _grid(n=10, L=3.0)
    c = 0.37
    mom = np.zeros((3,) + grid.shape)
    mom[0] = c
    st = _state(grid, np.ones(grid.shape), mom)
    rep = relative_energy(st, _flat_ref(grid), LAW, 0.5, grid.delta)
    assert rep.value == pytest.approx(0.5 * c**2 * 9.0, rel=1e-13)
    assert rep.pressure_part == 0.0


def test_pressure_hand_value_epsilon_cancels():
    # rho = 1 + e, m = 0, eps = e: pressure part = L^2 independent of e
    grid = _grid(n=6, L=3.0)
    for e in (1e-2, 1e-3):
        st = _state(grid, np.full(grid.shape, 1.0 + e), np.zeros((3,) + grid.shape))
        rep = relative_energy(st, _flat_ref(grid), LAW, e, grid.delta)
        assert rep.value == pytest.approx(9.0, rel=1e-10)
        assert rep.kinetic_part == 0.0


def test_kinetic_part_quadratic_in_deviation():
    grid = _grid()
    mom = np.zeros((3,) + grid.shape)
    mom[1] = 0.2
    st1 = _state(grid, np.ones(grid.shape), mom)
    st2 = _state(grid, np.ones(grid.shape), 2 * mom)
    r1 = relative_energy(st1, _flat_ref(grid), LAW, 0.5, grid.delta)
    r2 = relative_energy(st2, _flat_ref(grid), LAW, 0.5, grid.delta)
    assert r2.kinetic_part == pytest.approx(4.0 * r1.kinetic_part, rel=1e-12)


def test_parts_sum_and_split():
    rng = np.random.default_rng(20)
    grid = _grid()
    rho = 1.0 + 0.3 * rng.random(grid.shape)
    rho[0, 0, 0] = 10.0  # one residual cell outside the cutoff support
    st = _state(grid, rho, rng.standard_normal((3,) + grid.shape) * 0.1)
    rep = relative_energy(st, _flat_ref(grid), LAW, 0.5, grid.delta)
    assert rep.value == pytest.approx(rep.kinetic_part + rep.pressure_part, rel=1e-14)
    assert rep.pressure_part == pytest.approx(rep.ess_pressure + rep.res_pressure, rel=1e-14)
    assert rep.res_pressure > 0.0

    inside = 1.0 + 0.2 * rng.random(grid.shape)  # everywhere in the plateau
    st2 = _state(grid, inside, np.zeros((3,) + grid.shape))
    rep2 = relative_energy(st2, _flat_ref(grid), LAW, 0.5, grid.delta)
    assert rep2.res_pressure == 0.0


def test_ess_pressure_equivalent_to_scaled_density_norm():
    # with rho in the plateau: c1 ||(rho-1)/eps||^2 <= pressure <= c2 ||...||^2
    rng = np.random.default_rng(21)
    for law in (LAW, GammaLaw(1.4, 1.0, 1.0)):
        grid = _grid(n=12, L=2.0)
        eps = 0.25
        rho = 1.0 + eps * (0.8 * rng.random(grid.shape) - 0.4)
        st = _state(grid, rho, np.zeros((3,) + grid.shape))
        rep = relative_energy(st, _flat_ref(grid), law, eps, grid.delta)
        dev_sq = (1.0 / grid.delta) * np.sum(((rho - 1.0) / eps) ** 2) * grid.cell_volume
        p2 = law.potential_second(np.array([0.5, 1.0, 2.0]))
        c1, c2 = 0.5 * p2.min(), 0.5 * p2.max()
        assert c1 * dev_sq * (1 - 1e-12) <= rep.pressure_part <= c2 * dev_sq * (1 + 1e-12)


def test_restriction_to_box():
    grid = Grid3D(16, 16, 2, 4.0, 0.5)
    mom = np.zeros((3,) + grid.shape)
    mom[0] = 1.0
    st = _state(grid, np.ones(grid.shape), mom)
    full = relative_energy(st, _flat_ref(grid), LAW, 0.5, grid.delta)
    box = Box2D.central(4.0, 0.25)
    part = relative_energy(st, _flat_ref(grid), LAW, 0.5, grid.delta, restrict_to=box)
    assert part.value == pytest.approx(full.value / 16.0, rel=1e-12)


def test_ensemble_mean_and_observable():
    grid = _grid()
    a = _state(grid, np.full(grid.shape, 1.0), np.zeros((3,) + grid.shape))
    b = _state(grid, np.full(grid.shape, 3.0), np.zeros((3,) + grid.shape))
    ens = EnsembleMeasure((a, b))
    mean_rho = ensemble_observable(ens, lambda rho, mom: rho)
    assert np.all(mean_rho.values == 2.0)
    single = ensemble_observable(EnsembleMeasure((a,)), lambda rho, mom: rho)
    assert np.all(single.values == 1.0)

    rep = relative_energy(ens, _flat_ref(grid), LAW, 1.0, grid.delta)
    ra = relative_energy(a, _flat_ref(grid), LAW, 1.0, grid.delta)
    rb = relative_energy(b, _flat_ref(grid), LAW, 1.0, grid.delta)
    assert rep.value == pytest.approx(0.5 * (ra.value + rb.value), rel=1e-13)


def test_strict_positivity_when_any_member_differs():
    grid = _grid()
    ref = _flat_ref(grid)
    match = _state(grid, np.ones(grid.shape), np.zeros((3,) + grid.shape))
    mom = np.zeros((3,) + grid.shape)
    mom[0, 2, 1, 0] = 0.3  # a single deviant cell in one member
    deviant = _state(grid, np.ones(grid.shape), mom)
    rep = relative_energy(EnsembleMeasure((match, deviant)), ref, LAW, 0.5, grid.delta)
    assert rep.value > 0.0


def test_ensemble_jensen():
    rng = np.random.default_rng(22)
    grid = _grid(n=5, nz=3)
    members = tuple(
        _state(grid, 1.0 + 0.4 * rng.random(grid.shape),
               rng.standard_normal((3,) + grid.shape))
        for _ in range(8)
    )
    ens = EnsembleMeasure(members)
    mean_abs = ensemble_observable(ens, lambda rho, mom: np.sqrt((mom**2).sum(axis=0)))
    mean_sq = ensemble_observable(ens, lambda rho, mom: (mom**2).sum(axis=0))
    assert np.all(mean_abs.values**2 <= mean_sq.values + 1e-12)


def test_ensemble_validation():
    grid = _grid()
    a = _state(grid, np.ones(grid.shape), np.zeros((3,) + grid.shape), time=0.0)
    b = _state(grid, np.ones(grid.shape), np.zeros((3,) + grid.shape), time=1.0)
    with pytest.raises(ValueError):
        EnsembleMeasure((a, b))
    with pytest.raises(ValueError):
        EnsembleMeasure(())


def test_kinetic_density_vacuum_convention():
    rho = np.array([[[1.0]], [[0.0]]])
    mom_ok = np.zeros((3, 2, 1, 1))
    assert np.all(kinetic_density(rho, mom_ok) == 0.0)
    mom_bad = mom_ok.copy()
    mom_bad[0, 1] = 1.0
    with pytest.raises(ValueError):
        kinetic_density(rho, mom_bad)


def _reference_setup(cfg, eps, eta):
    law = cfg.law()
    g3 = cfg.grid3(eps)
    g2 = cfg.grid2()
    rec = cfg.recipe(eps, eta)
    st = build_initial_3d(rec, g3, law)
    v0 = limit_initial_2d(rec, g2)
    ac0 = acoustic_initial(rec, g2, law)
    return law, g3, g2, rec, st, v0, ac0


def test_remainders_vanish_for_steady_shear_reference():
    cfg = RunConfig.from_dict({
        "grid": {"L": 12.0, "nx": 24, "ny": 24, "nz": 2},
        "epsilon_list": [0.25], "eta_list": [0.5],
        "end_time": 0.1, "snapshot_interval": 0.05,
        "recipe": {"kind": "well-prepared", "v0_stream_modes": [[0, 1, 0.3, 0.0]],
                   "s0_modes": [], "psi0_modes": [], "windowed": False},
    })
    law, g3, g2, rec, st, v0, ac0 = _reference_setup(cfg, 0.25, 0.5)
    frame = reference_frame(v0, ac0, g3, law)
    _, r1, r2 = remainder_terms([st], [frame], law, 0.25, g3.delta)
    assert abs(r1[0]) <= 1e-12
    assert abs(r2[0]) <= 1e-10


def test_remainders_vanish_for_rest():
    cfg = RunConfig.from_dict({
        "grid": {"L": 12.0, "nx": 8, "ny": 8, "nz": 2},
        "epsilon_list": [0.25], "eta_list": [0.5],
        "recipe": {"kind": "well-prepared", "v0_stream_modes": [],
                   "s0_modes": [], "psi0_modes": [], "windowed": False},
    })
    law, g3, g2, rec, st, v0, ac0 = _reference_setup(cfg, 0.25, 0.5)
    frame = reference_frame(v0, ac0, g3, law)
    _, r1, r2 = remainder_terms([st], [frame], law, 0.25, g3.delta)
    assert r1[0] == 0.0
    assert r2[0] == 0.0


def test_remainders_reject_misaligned_times():
    cfg = RunConfig.from_dict({
        "grid": {"L": 12.0, "nx": 8, "ny": 8, "nz": 2},
        "epsilon_list": [0.25], "eta_list": [0.5],
        "recipe": {"kind": "well-prepared", "v0_stream_modes": [],
                   "s0_modes": [], "psi0_modes": [], "windowed": False},
    })
    law, g3, g2, rec, st, v0, ac0 = _reference_setup(cfg, 0.25, 0.5)
    frame = reference_frame(v0, acoustic.propagate(ac0, 0.0), g3, law)
    from dataclasses import replace
    late = replace(st, time=0.5)
    with pytest.raises(ValueError):
        remainder_terms([late], [frame], law, 0.25, g3.delta)


def test_relative_energy_inequality_with_dissipation_slack():
    # E(tau) - E(0) <= int (R1 + R2) dt + D(tau): the scheme's dissipation
    # bounds its own deviation from the exact balance
    cfg = RunConfig.from_dict({
        "grid": {"L": 12.0, "nx": 24, "ny": 24, "nz": 2},
        "epsilon_list": [0.25], "eta_list": [0.5],
        "end_time": 0.2, "snapshot_interval": 0.01,
        "recipe": {"kind": "ill-prepared", "v0_stream_modes": [[0, 1, 0.3, 0.0]],
                   "s0_modes": [[1, 0, 0.25, 0.0]], "psi0_modes": [[1, 1, 0.2, 0.0]],
                   "windowed": False},
    })
    eps, eta, delta = 0.25, 0.5, 0.25
    law, g3, g2, rec, st0, v_state, ac0 = _reference_setup(cfg, eps, eta)
    params = compressible.SolverParams(epsilon=eps, law=law, cfl=cfg.cfl,
                                       end_time=0.2, snapshot_interval=0.01)
    res = compressible.run(st0, params)
    _, D = compressible.dissipation_defect(res.series, law, eps, delta)

    E, frames, states = [], [], []
    for k, tau in enumerate(res.series.times):
        v_state = incompressible.advance(v_state, tau)
        ac = acoustic.propagate(ac0, tau)
        fr = reference_frame(v_state, ac, g3, law)
        st = res.series.entries[k]
        E.append(relative_energy(st, fr.pair, law, eps, delta).value)
        frames.append(fr)
        states.append(st)
    times, r1, r2 = remainder_terms(states, frames, law, eps, delta)
    E = np.array(E)
    for i in range(1, len(times)):
        rhs = np.trapezoid((r1 + r2)[: i + 1], times[: i + 1]) + D[i]
        assert E[i] - E[0] <= rhs + 1e-10


def test_corrected_reference_matches_build():
    cfg = RunConfig.from_dict({
        "grid": {"L": 12.0, "nx": 16, "ny": 16, "nz": 2},
        "epsilon_list": [0.25], "eta_list": [0.5],
        "recipe": {"kind": "ill-prepared", "v0_stream_modes": [[0, 1, 0.3, 0.0]],
                   "s0_modes": [[1, 0, 0.25, 0.0]], "psi0_modes": [[1, 1, 0.2, 0.0]],
                   "windowed": False},
    })
    law, g3, g2, rec, st, v0, ac0 = _reference_setup(cfg, 0.25, 0.5)
    ref = corrected_reference(v0, ac0, g3, law)
    rep = relative_energy(st, ref, law, 0.25, g3.delta)
    assert rep.value <= 1e-12


def test_uniform_bound_report():
    grid = Grid3D(32, 32, 2, 4.0, 0.5)
    rest = _state(grid, np.ones(grid.shape), np.zeros((3,) + grid.shape))
    rep = uniform_bound_report(rest, LAW, 0.25, grid.delta)
    assert rep.rho_ess_norm == 0.0
    assert rep.rho_res_norm == 0.0
    assert rep.mbar_norm == 0.0

    # rho = 1 + eps cos(2 pi x / L): ess norm equals ||cos||_L2, eps-free
    x = grid.x1()
    norms = []
    for eps in (0.25, 0.125):
        rho2 = 1.0 + eps * np.cos(2 * np.pi * x / 4.0)
        rho = np.broadcast_to(rho2[:, None, None], grid.shape).copy()
        st = _state(grid, rho, np.zeros((3,) + grid.shape))
        norms.append(uniform_bound_report(st, LAW, eps, grid.delta).rho_ess_norm)
    expected = np.sqrt(0.5 * 16.0)  # ||cos||_L2 on [0,4]^2
    assert norms[0] == pytest.approx(expected, rel=1e-12)
    assert norms[0] == pytest.approx(norms[1], rel=1e-12)

    spike = np.ones(grid.shape)
    spike[3, 4, :] = 10.0
    st = _state(grid, spike, np.zeros((3,) + grid.shape))
    rep = uniform_bound_report(st, LAW, 0.25, grid.delta)
    assert rep.rho_res_norm > 0.0
