"""Barotropic pressure laws, the pressure potential and density cutoffs.

Every law exposes p, p', the potential P (primitive of p(z)/z^2 scaled by
rho, vanishing at the reference density) and its first two derivatives.
``relative_potential`` is the Bregman gap of P, the pressure half of the
relative energy; it is nonnegative and vanishes only at the reference
density because P is strictly convex whenever p' > 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grids import ScalarField3D

__all__ = [
    "GammaLaw",
    "LinearLaw",
    "QuadratureLaw",
    "DensityCutoff",
    "HypothesisReport",
    "make_law",
    "relative_potential",
    "split_by_density",
    "check_hypotheses",
]


@dataclass(frozen=True)
class GammaLaw:
    """Power law p(rho) = coefficient * rho**gamma, gamma > 1.

    The potential has the closed form
    coefficient * (rho**gamma - rho * rho_tilde**(gamma-1)) / (gamma - 1).
    """

    gamma: float = 2.0
    coefficient: float = 1.0
    rho_tilde: float = 1.0

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if self.coefficient <= 0.0:
            raise ValueError("coefficient must be positive")
        if self.rho_tilde <= 0.0:
            raise ValueError("reference density must be positive")

    def p(self, rho):
        if self.gamma == 2.0:
            return self.coefficient * rho * rho
        return self.coefficient * np.power(rho, self.gamma)

    def p_prime(self, rho):
        if self.gamma == 2.0:
            return (2.0 * self.coefficient) * rho
        return (self.coefficient * self.gamma) * np.power(rho, self.gamma - 1.0)

    def potential(self, rho):
        g, c, rt = self.gamma, self.coefficient, self.rho_tilde
        if g == 2.0:
            return c * (rho * rho - rho * rt)
        return c * (np.power(rho, g) - rho * rt ** (g - 1.0)) / (g - 1.0)

    def potential_prime(self, rho):
        g, c, rt = self.gamma, self.coefficient, self.rho_tilde
        if g == 2.0:
            return c * (2.0 * rho - rt)
        return c * (g * np.power(rho, g - 1.0) - rt ** (g - 1.0)) / (g - 1.0)

    def potential_second(self, rho):
        # P''(rho) = p'(rho) / rho
        if self.gamma == 2.0:
            return 2.0 * self.coefficient * np.ones_like(np.asarray(rho, dtype=float))
        return (self.coefficient * self.gamma) * np.power(rho, self.gamma - 2.0)

    @property
    def sound_speed_sq(self):
        """p'(rho_tilde), the square of the reference sound speed."""
        return float(self.p_prime(self.rho_tilde))

    @property
    def sound_speed(self):
        return float(np.sqrt(self.sound_speed_sq))


@dataclass(frozen=True)
class LinearLaw:
    """p(rho) = slope * rho.  With slope <= 0 it violates monotonicity,
    which the hypothesis checker must flag; with slope > 0 it is the
    isothermal law (potential slope * rho * log(rho/rho_tilde))."""

    slope: float
    rho_tilde: float = 1.0

    def p(self, rho):
        return self.slope * np.asarray(rho, dtype=float)

    def p_prime(self, rho):
        return self.slope * np.ones_like(np.asarray(rho, dtype=float))

    def potential(self, rho):
        rho = np.asarray(rho, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.slope * rho * np.log(rho / self.rho_tilde)
        return np.where(rho == 0.0, 0.0, out)

    def potential_prime(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.slope * (np.log(rho / self.rho_tilde) + 1.0)

    def potential_second(self, rho):
        return self.slope / np.asarray(rho, dtype=float)

    @property
    def sound_speed_sq(self):
        return float(self.slope)

    @property
    def sound_speed(self):
        if self.slope <= 0:
            raise ValueError("p'(rho_tilde) <= 0: no sound speed, law is inadmissible")
        return float(np.sqrt(self.slope))


class QuadratureLaw:
    """General barotropic law given by callables p, p'; the potential falls
    back to adaptive quadrature of the defining integral (1e-12 abs tol)."""

    def __init__(self, p_func, p_prime_func, rho_tilde=1.0):
        self._p = p_func
        self._dp = p_prime_func
        self.rho_tilde = float(rho_tilde)

    def p(self, rho):
        return np.vectorize(self._p, otypes=[float])(rho)[()]

    def p_prime(self, rho):
        return np.vectorize(self._dp, otypes=[float])(rho)[()]

    def _potential_scalar(self, rho):
        if rho == 0.0:
            # rho * int_{rho_tilde}^{rho} p/z^2 dz -> limit 0 for p(0)=0 laws
            rho = 1e-300
        val, _ = quad(lambda z: self._p(z) / z**2, self.rho_tilde, rho,
                      epsabs=1e-12, epsrel=1e-12, limit=200)
        return rho * val

    def potential(self, rho):
        return np.vectorize(self._potential_scalar, otypes=[float])(rho)[()]

    def potential_prime(self, rho):
        # P'(rho) = int p/z^2 dz + p(rho)/rho
        def scalar(r):
            val, _ = quad(lambda z: self._p(z) / z**2, self.rho_tilde, r,
                          epsabs=1e-12, epsrel=1e-12, limit=200)
            return val + self._p(r) / r
        return np.vectorize(scalar, otypes=[float])(rho)[()]

    def potential_second(self, rho):
        return self.p_prime(rho) / np.asarray(rho, dtype=float)

    @property
    def sound_speed_sq(self):
        return float(self._dp(self.rho_tilde))

    @property
    def sound_speed(self):
        return float(np.sqrt(self.sound_speed_sq))


def make_law(spec: dict):
    """Build a pressure law from a configuration mapping."""
    spec = dict(spec)
    kind = spec.pop("kind", "gamma")
    if kind == "gamma":
        allowed = {"gamma", "coefficient", "rho_tilde"}
        unknown = set(spec) - allowed
        if unknown:
            raise ValueError(f"unknown pressure-law keys: {sorted(unknown)}")
        return GammaLaw(**spec)
    if kind == "linear":
        allowed = {"slope", "rho_tilde"}
        unknown = set(spec) - allowed
        if unknown:
            raise ValueError(f"unknown pressure-law keys: {sorted(unknown)}")
        return LinearLaw(**spec)
    raise ValueError(f"unknown pressure-law kind {kind!r}")


def relative_potential(law, rho, r):
    """P(rho) - P'(r)(rho - r) - P(r), the convexity gap of the potential."""
    return law.potential(rho) - law.potential_prime(r) * (rho - r) - law.potential(r)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


@dataclass(frozen=True)
class DensityCutoff:
    """Smooth bump in the density variable: 1 on [rho_tilde/2, 2 rho_tilde],
    0 outside [rho_tilde/4, 4 rho_tilde], quintic transitions in between."""

    rho_tilde: float = 1.0

    def __post_init__(self):
        if self.rho_tilde <= 0:
            raise ValueError("reference density must be positive")

    @property
    def lower(self):
        return 0.5 * self.rho_tilde

    @property
    def upper(self):
        return 2.0 * self.rho_tilde

    @property
    def support_lower(self):
        return 0.25 * self.rho_tilde

    @property
    def support_upper(self):
        return 4.0 * self.rho_tilde

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        rising = _smoothstep((rho - self.support_lower) / (self.lower - self.support_lower))
        falling = 1.0 - _smoothstep((rho - self.upper) / (self.support_upper - self.upper))
        out = np.where(rho < self.lower, rising, falling)
        return out[()]


def split_by_density(cutoff: DensityCutoff, rho: ScalarField3D, payload: ScalarField3D):
    """Essential/residual decomposition of a payload by the density cutoff.

    essential = psi(rho) * payload, residual = payload - essential, so the
    two parts sum back to the payload exactly cell by cell.
    """
    if rho.grid != payload.grid:
        raise ValueError("density and payload live on different grids")
    w = cutoff(rho.values)
    ess = w * payload.values
    res = payload.values - ess
    return (ScalarField3D(rho.grid, ess), ScalarField3D(rho.grid, res))


@dataclass(frozen=True)
class HypothesisReport:
    """Finite-sample surrogate for the structural pressure hypotheses."""

    passed: bool
    p_prime_min: float
    failures: tuple
    sup_p_over_potential: float | None
    inf_p_over_rho_gamma: float | None
    gamma_used: float
    n_samples: int = 0


def check_hypotheses(law, sample_densities, gamma_hint=None) -> HypothesisReport:
    """Check p' > 0 at all samples and the growth conditions at large ones.

    Large means rho >= 2 * rho_tilde, where the potential is safely positive.
    The observed constants are finite-sample surrogates for the asymptotic
    statements; they are recorded but not reused downstream.
    """
    samples = np.asarray(sample_densities, dtype=float)
    if samples.size == 0:
        raise ValueError("sample list must be nonempty")
    if np.any(samples <= 0.0):
        raise ValueError("sample densities must be positive")
    gamma = float(gamma_hint if gamma_hint is not None else getattr(law, "gamma", 2.0))

    failures = []
    dp = np.asarray(law.p_prime(samples), dtype=float)
    for rho, v in zip(samples, dp):
        if not (v > 0.0):
            failures.append((float(rho), f"p'({rho:g}) = {v:g} <= 0"))

    large = samples[samples >= 2.0 * getattr(law, "rho_tilde", 1.0)]
    sup_ratio = None
    inf_growth = None
    if large.size:
        pl = np.asarray(law.p(large), dtype=float)
        Pl = np.asarray(law.potential(large), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = pl / Pl
        if np.any(~np.isfinite(ratios)):
            failures.append((float(large[~np.isfinite(ratios)][0]), "p/P not finite"))
        else:
            sup_ratio = float(ratios.max())
        growth = pl / np.power(large, gamma)
        inf_growth = float(growth.min())
        if not (inf_growth > 0.0):
            worst = float(large[np.argmin(growth)])
            failures.append((worst, f"p(rho)/rho^gamma = {inf_growth:g} <= 0 at rho = {worst:g}"))

    return HypothesisReport(
        passed=not failures,
        p_prime_min=float(dp.min()),
        failures=tuple(failures),
        sup_p_over_potential=sup_ratio,
        inf_p_over_rho_gamma=inf_growth,
        gamma_used=gamma,
        n_samples=int(samples.size),
    )
