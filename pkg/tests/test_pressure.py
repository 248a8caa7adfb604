"""Pressure laws, the potential, cutoffs and hypothesis checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from thinmach.grids import Grid3D, ScalarField3D
from thinmach.pressure import (
    DensityCutoff,
    GammaLaw,
    LinearLaw,
    QuadratureLaw,
    check_hypotheses,
    make_law,
    relative_potential,
    split_by_density,
)


def test_potential_vanishes_at_reference():
    for law in (GammaLaw(2.0), GammaLaw(1.4), GammaLaw(3.0, 0.7, 2.0), LinearLaw(1.0)):
        assert law.potential(law.rho_tilde) == pytest.approx(0.0, abs=1e-14)


def test_potential_closed_forms():
    law = GammaLaw(2.0, 1.0, 1.0)  # P(rho) = rho^2 - rho
    assert law.potential(1.0) == 0.0
    assert law.potential(2.0) == pytest.approx(2.0, rel=1e-14)
    law14 = GammaLaw(1.4, 1.0, 1.0)
    assert law14.potential(2.0) == pytest.approx((2**1.4 - 2) / 0.4, rel=1e-14)


@pytest.mark.parametrize("gamma,coeff", [(2.0, 1.0), (1.4, 1.0), (1.4, 0.5), (3.0, 2.0)])
def test_potential_matches_quadrature_oracle(gamma, coeff):
    law = GammaLaw(gamma, coeff, 1.0)
    for rho in np.logspace(-2, 2, 17):
        oracle, _ = quad(lambda z: coeff * z**gamma / z**2, 1.0, rho,
                         epsabs=1e-13, epsrel=1e-13)
        oracle *= rho
        assert law.potential(rho) == pytest.approx(oracle, rel=1e-10, abs=1e-12)


def test_quadrature_law_agrees_with_closed_form():
    gl = GammaLaw(1.4, 1.0, 1.0)
    ql = QuadratureLaw(lambda r: r**1.4, lambda r: 1.4 * r**0.4, 1.0)
    for rho in (0.05, 0.5, 1.0, 3.0, 40.0):
        assert ql.potential(rho) == pytest.approx(gl.potential(rho), rel=1e-10, abs=1e-12)
        assert ql.potential_prime(rho) == pytest.approx(gl.potential_prime(rho), rel=1e-10)


def test_potential_second_identity():
    # P''(rho) = p'(rho)/rho
    for law in (GammaLaw(2.0), GammaLaw(1.4, 0.5), LinearLaw(2.0)):
        rho = np.linspace(0.2, 5.0, 23)
        assert np.allclose(law.potential_second(rho), law.p_prime(rho) / rho, rtol=1e-12)


def test_relative_potential_hand_values():
    law = GammaLaw(2.0, 1.0, 1.0)
    assert relative_potential(law, 1.5, 1.0) == pytest.approx(0.25, rel=1e-14)
    assert relative_potential(law, 0.0, 1.0) == pytest.approx(1.0, rel=1e-14)
    for r in (0.3, 1.0, 2.7):
        assert relative_potential(law, r, r) == pytest.approx(0.0, abs=1e-14)


def test_relative_potential_gamma2_is_squared_distance():
    law = GammaLaw(2.0, 1.0, 1.0)
    rho = np.linspace(0.0, 4.0, 41)
    assert np.allclose(relative_potential(law, rho, 1.3), (rho - 1.3) ** 2, atol=1e-13)


@given(
    rho=st.floats(0.0, 50.0),
    r=st.floats(0.05, 20.0),
    gamma=st.floats(1.05, 3.0),
)
@settings(max_examples=200, deadline=None)
def test_relative_potential_nonnegative(rho, r, gamma):
    law = GammaLaw(gamma, 1.0, 1.0)
    assert relative_potential(law, rho, r) >= -1e-11 * (1 + abs(rho) ** gamma)


def test_relative_potential_flat_minimum():
    # |H(r +- h, r)| <= C h^2 with C comparable to P''(r)
    for law in (GammaLaw(2.0), GammaLaw(1.4)):
        for r in (0.8, 1.0, 1.9):
            c = 2.0 * float(law.potential_second(r))
            for h in (1e-3, 1e-4):
                assert abs(relative_potential(law, r + h, r)) <= c * h**2
                assert abs(relative_potential(law, r - h, r)) <= c * h**2


def test_convexity_essential_range():
    # |rho - rt|^2 <= C * H on [rt/2, 2 rt]; for gamma = 2 the ratio is exactly 1
    law2 = GammaLaw(2.0)
    rho = np.linspace(0.5, 2.0, 1000)
    h = relative_potential(law2, rho, 1.0)
    dev = (rho - 1.0) ** 2
    m = dev > 0
    assert np.allclose(dev[m] / h[m], 1.0, rtol=1e-10)
    law14 = GammaLaw(1.4)
    h = relative_potential(law14, rho, 1.0)
    ratios = dev[m] / h[m]
    assert ratios.max() < 10.0 and ratios.min() > 0.1


def test_convexity_residual_range():
    # 1 + |rho - rt| + P(rho) <= C * H outside [rt/2, 2 rt], bounded C
    law = GammaLaw(2.0)
    rho = np.concatenate([np.linspace(0.001, 0.49, 500), np.linspace(2.01, 100.0, 500)])
    h = relative_potential(law, rho, 1.0)
    num = 1.0 + np.abs(rho - 1.0) + law.potential(rho)
    assert np.all(h > 0)
    assert (num / h).max() < 100.0


def test_check_hypotheses_gamma_law_passes():
    law = GammaLaw(1.4, 1.0, 1.0)
    rep = check_hypotheses(law, [0.1, 1.0, 10.0, 100.0])
    assert rep.passed
    assert rep.inf_p_over_rho_gamma == pytest.approx(1.0, rel=1e-12)
    assert rep.failures == ()


def test_check_hypotheses_decreasing_law_fails_everywhere():
    law = LinearLaw(-1.0)
    samples = [0.1, 1.0, 10.0, 100.0]
    rep = check_hypotheses(law, samples)
    assert not rep.passed
    flagged = {rho for rho, _ in rep.failures}
    assert set(samples) <= flagged


def test_check_hypotheses_ratio_limit_gamma2():
    # p/P = rho^2/(rho^2 - rho) decreases toward gamma - 1 = 1 for gamma = 2
    law = GammaLaw(2.0)
    samples = np.array([2.0, 5.0, 20.0, 100.0, 1000.0])
    rep = check_hypotheses(law, samples)
    ratios = law.p(samples) / law.potential(samples)
    assert np.all(np.diff(ratios) < 0)
    assert rep.sup_p_over_potential == pytest.approx(ratios[0], rel=1e-12)
    assert ratios[-1] == pytest.approx(1.0, rel=2e-3)


def test_check_hypotheses_rejects_bad_samples():
    with pytest.raises(ValueError):
        check_hypotheses(GammaLaw(2.0), [])
    with pytest.raises(ValueError):
        check_hypotheses(GammaLaw(2.0), [1.0, -2.0])


def test_make_law_rejects_unknown():
    with pytest.raises(ValueError):
        make_law({"kind": "gamma", "gamma": 2.0, "bogus": 1})
    with pytest.raises(ValueError):
        make_law({"kind": "tabulated"})
    assert isinstance(make_law({"kind": "gamma", "gamma": 1.4}), GammaLaw)
    assert isinstance(make_law({"kind": "linear", "slope": 1.0}), LinearLaw)


def test_cutoff_plateau_and_support():
    psi = DensityCutoff(1.0)
    plateau = np.linspace(0.5, 2.0, 50)
    assert np.all(psi(plateau) == 1.0)
    outside = np.array([0.0, 0.1, 0.24, 4.0, 10.0])
    assert np.all(psi(outside) == 0.0)
    everywhere = np.linspace(0.0, 6.0, 1000)
    vals = psi(everywhere)
    assert np.all((0.0 <= vals) & (vals <= 1.0))


def test_cutoff_is_c1():
    # derivative estimated by central differences has no O(1) jumps
    psi = DensityCutoff(1.0)
    h = 1e-6
    knots = [0.25, 0.5, 2.0, 4.0]
    for x in knots:
        left = (psi(x - h) - psi(x - 3 * h)) / (2 * h)
        right = (psi(x + 3 * h) - psi(x + h)) / (2 * h)
        assert abs(right - left) < 1e-4


def test_split_by_density_identities():
    g = Grid3D(4, 4, 2, 1.0, 1.0)
    psi = DensityCutoff(1.0)
    payload = ScalarField3D(g, np.arange(32, dtype=float).reshape(g.shape) - 7.5)

    rho_ref = ScalarField3D(g, np.ones(g.shape))
    ess, res = split_by_density(psi, rho_ref, payload)
    assert np.all(ess.values == payload.values)
    assert np.all(res.values == 0.0)

    rho_far = ScalarField3D(g, np.full(g.shape, 10.0))
    ess, res = split_by_density(psi, rho_far, payload)
    assert np.all(ess.values == 0.0)
    assert np.all(res.values == payload.values)

    rng = np.random.default_rng(4)
    rho_mix = ScalarField3D(g, 0.05 + 5.0 * rng.random(g.shape))
    ess, res = split_by_density(psi, rho_mix, payload)
    assert np.all(ess.values + res.values == payload.values)  # exact fp identity


def test_split_by_density_grid_mismatch():
    psi = DensityCutoff(1.0)
    a = ScalarField3D(Grid3D(4, 4, 2, 1.0, 1.0), np.ones((4, 4, 2)))
    b = ScalarField3D(Grid3D(4, 4, 4, 1.0, 1.0), np.ones((4, 4, 4)))
    with pytest.raises(ValueError):
        split_by_density(psi, a, b)
