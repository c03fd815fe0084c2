"""Scalar functionals of a field: mass, energy, the multiplier mu[u],
the Nehari functional and the Gagliardo-Nirenberg quotient.

All of them go through ``grid.integrate`` and ``grid.gradient_sq_norm`` so
algebraic identities between them hold to rounding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DegenerateField, PreconditionError
from .grid import DomainSpec, Field, gradient_sq_norm, integrate


class SupercriticalWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FlowParams:
    g: float
    sigma: float
    d: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.g) and math.isfinite(self.sigma)):
            raise PreconditionError('g and sigma must be finite')
        if self.sigma <= 0:
            raise PreconditionError(f'sigma must be > 0, got {self.sigma!r}')
        if int(self.d) != self.d or self.d < 1:
            raise PreconditionError(f'dimension must be a positive integer, got {self.d!r}')
        if self.sigma >= energy_critical_sigma(self.d):
            warnings.warn(
                f'sigma = {self.sigma:g} is not energy-subcritical in d = {self.d}',
                SupercriticalWarning,
                stacklevel=3,
            )

    @classmethod
    def for_domain(cls, domain: DomainSpec, g: float, sigma: float) -> 'FlowParams':
        return cls(float(g), float(sigma), domain.dimension)

    @property
    def power(self) -> float:
        """The Lebesgue exponent 2 sigma + 2."""
        return 2.0 * self.sigma + 2.0

    def with_g(self, g: float) -> 'FlowParams':
        return FlowParams(float(g), self.sigma, self.d)


def mass_critical_sigma(d: int) -> float:
    return 2.0 / d


def energy_critical_sigma(d: int) -> float:
    """2 / (d - 2)^+, infinite for d <= 2."""
    return math.inf if d <= 2 else 2.0 / (d - 2)


class Regime(str, Enum):
    SUBCRITICAL = 'subcritical'
    MASS_CRITICAL = 'mass-critical'
    SUPERCRITICAL_SUBENERGY = 'supercritical-subenergy'
    ENERGY_CRITICAL_OR_WORSE = 'energy-critical-or-worse'


@dataclass(frozen=True)
class CriticalityReport:
    sigma_mass_critical: float
    sigma_energy_critical: float
    regime: Regime
    alpha: Optional[float]
    # whether sigma satisfies the condition set under which whole-space
    # well-posedness is proven; informational only
    whole_space_wellposed: bool


def criticality(params: FlowParams) -> CriticalityReport:
    d, sigma = params.d, params.sigma
    s_mass = mass_critical_sigma(d)
    s_energy = energy_critical_sigma(d)
    if sigma >= s_energy:
        regime = Regime.ENERGY_CRITICAL_OR_WORSE
    elif math.isclose(sigma, s_mass, rel_tol=1e-12):
        regime = Regime.MASS_CRITICAL
    elif sigma < s_mass:
        regime = Regime.SUBCRITICAL
    else:
        regime = Regime.SUPERCRITICAL_SUBENERGY
    alpha: Optional[float] = None
    if d * sigma > 2 and not math.isclose(d * sigma, 2.0, rel_tol=1e-12):
        alpha = (2.0 - (d - 2) * sigma) / (d * sigma - 2.0)
    lower = math.inf if d <= 2 else 1.0 / (d - 2)
    wellposed = sigma < lower or 0.5 <= sigma < s_energy
    return CriticalityReport(s_mass, s_energy, regime, alpha, wellposed)


def potential_integral(u: Field, sigma: float) -> float:
    """||u||_{2 sigma + 2}^{2 sigma + 2}; |u|^(2 sigma) is continuous at 0 for sigma > 0."""
    return integrate(u.grid, np.abs(u.values) ** (2.0 * sigma + 2.0))


def mass_norm(u: Field) -> float:
    return math.sqrt(integrate(u.grid, u.values * u.values))


def lp_norm(u: Field, p: float) -> float:
    if not p >= 1:
        raise PreconditionError(f'L^p norm needs p >= 1, got {p!r}')
    return float(integrate(u.grid, np.abs(u.values) ** p) ** (1.0 / p))


def energy(u: Field, params: FlowParams) -> float:
    return 0.5 * gradient_sq_norm(u) - params.g / params.power * potential_integral(u, params.sigma)


def nehari(u: Field, params: FlowParams) -> float:
    return gradient_sq_norm(u) - params.g * potential_integral(u, params.sigma)


def mu(u: Field, params: FlowParams) -> float:
    m2 = integrate(u.grid, u.values * u.values)
    if not m2 > 0:
        raise DegenerateField('mu[u] is undefined for the zero field')
    return nehari(u, params) / m2


def mu_alpha(u: Field, params: FlowParams, alpha: float) -> float:
    if not alpha > 0:
        raise PreconditionError(f'alpha must be > 0, got {alpha!r}')
    return nehari(u, params) / alpha


def gn_quotient(u: Field, params: FlowParams) -> float:
    """||u||_{2s+2}^{2s+2} / (||grad u||^{d s} ||u||_2^{2 + 2s - d s})."""
    d, s = params.d, params.sigma
    grad2 = gradient_sq_norm(u)
    mass = mass_norm(u)
    if grad2 <= 0 or mass <= 0:
        raise DegenerateField('Gagliardo-Nirenberg quotient is undefined for the zero field')
    return potential_integral(u, s) / (grad2 ** (0.5 * d * s) * mass ** (2.0 + 2.0 * s - d * s))
