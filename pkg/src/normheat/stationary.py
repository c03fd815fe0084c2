"""Stationary states: ground states by projected gradient flow, the free-space
profile by radial shooting, Pohozaev certification and the
Gagliardo-Nirenberg constant.

Stationary states solve

    0 = Delta Q + g |Q|^(2 sigma) Q + mu[Q] Q.

On bounded domains they are computed by running the projected flow until the
step residual vanishes; fixed points of that scheme are exactly the discrete
stationary states. The free-space profile solves the normalized equation
Q'' + (d-1)/r Q' - Q + Q^(2 sigma + 1) = 0 (mu = -1, g = 1) and is found by
bisection on Q(0).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import kve

from .errors import BadBracket, DegenerateField, NotConverged, PreconditionError, RegimeError, ShootingError
from .flow import DiagnosticsRecord, FlowConfig, Scheme, Termination, evolve
from .functionals import (
    FlowParams,
    energy,
    energy_critical_sigma,
    gn_quotient,
    mass_critical_sigma,
    mass_norm,
    mu,
    potential_integral,
)
from .grid import DomainSpec, FloatArray, Field, Grid, apply_laplacian, build_grid, first_eigenpair, gradient_sq_norm, integrate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StationaryResiduals:
    pde_sup: float
    pohozaev1: float
    # only on whole-space surrogates; Dirichlet boundary terms spoil them elsewhere
    pohozaev2: Optional[float] = None
    energy_relation: Optional[float] = None

    def worst(self) -> float:
        vals = [self.pde_sup, self.pohozaev1, self.pohozaev2, self.energy_relation]
        return max(v for v in vals if v is not None)


@dataclass(frozen=True)
class GroundState:
    profile: Field
    mu_value: float
    mass_target: float
    residuals: StationaryResiduals
    params: FlowParams
    trace: Tuple[DiagnosticsRecord, ...] = ()


def pohozaev_residuals(Q: Field, params: FlowParams, mu_value: Optional[float] = None) -> StationaryResiduals:
    """Residuals of the stationary equation and of the Pohozaev identities.

    With ``mu_value`` omitted the multiplier mu[Q] is used, which makes
    ``pohozaev1`` vanish by construction. The whole-space identities are

        (d - 2)/2 |grad Q|^2 = mu d/2 |Q|^2 + d g/(2 s + 2) |Q|_{2s+2}^{2s+2}
        E[Q] = (d s - 2)/(2 d s) |grad Q|^2
    """
    grid = Q.grid
    v = Q.values
    m2 = integrate(grid, v * v)
    if not m2 > 0:
        raise DegenerateField('residuals are undefined for the zero field')
    mu_q = mu(Q, params) if mu_value is None else float(mu_value)
    d, s, g = params.d, params.sigma, params.g
    grad2 = gradient_sq_norm(Q)
    pot = potential_integral(Q, s)
    pde = apply_laplacian(Q).values + g * np.abs(v) ** (2.0 * s) * v + mu_q * v
    poh1 = abs(mu_q * m2 - grad2 + g * pot)
    poh2: Optional[float] = None
    relation: Optional[float] = None
    if grid.domain.whole_space:
        lhs = 0.5 * (d - 2) * grad2
        rhs = 0.5 * mu_q * d * m2 + d * g / params.power * pot
        poh2 = abs(lhs - rhs)
        relation = abs(energy(Q, params) - (d * s - 2.0) / (2.0 * d * s) * grad2)
    return StationaryResiduals(float(np.max(np.abs(pde))), float(poh1), poh2, relation)


def _check_ground_state_regime(params: FlowParams) -> None:
    if params.g > 0:
        if not params.sigma < mass_critical_sigma(params.d):
            raise RegimeError(
                f'flow to the ground state needs sigma < 2/d = {mass_critical_sigma(params.d):g} when g > 0'
            )
    elif not params.sigma < energy_critical_sigma(params.d):
        raise RegimeError(f'sigma = {params.sigma:g} is not energy-subcritical in d = {params.d}')


def ground_state_flow(
    grid: Grid,
    params: FlowParams,
    mass_target: float,
    numerics: FlowConfig,
    seed: Optional[Field] = None,
) -> GroundState:
    """Run the projected flow from a positive seed until it is stationary.

    The default seed is the first discrete Dirichlet eigenfunction scaled to
    ``mass_target``; any other seed is rescaled to that mass first.
    """
    if not (math.isfinite(mass_target) and mass_target > 0):
        raise PreconditionError(f'mass_target must be > 0, got {mass_target!r}')
    _check_ground_state_regime(params)
    if seed is None:
        seed = first_eigenpair(grid)[1]
    elif seed.grid is not grid:
        seed = seed.resample(grid)
    m = mass_norm(seed)
    if not m > 0:
        raise DegenerateField('ground-state seed must be non-zero')
    u0 = seed.scaled(mass_target / m)
    run = evolve(u0, params, replace(numerics, scheme=Scheme.PROJECTED))
    if run.termination is not Termination.STATIONARY:
        last = run.trace[-1]
        raise NotConverged(
            f'ground-state flow ended {run.termination.value} at t={last.t:g} '
            f'with step residual {last.step_residual:.3e} (tol {numerics.stationarity_tol:g})',
            trace=run.trace,
        )
    profile = run.final
    low, high = float(np.min(profile.values)), float(np.max(profile.values))
    if low < -1e-10 * max(high, 0.0):
        raise NotConverged(
            f'stationary state is not positive (min {low:.3e}, max {high:.3e}); '
            'the seed did not lead to the ground state',
            trace=run.trace,
        )
    mu_q = mu(profile, params)
    residuals = pohozaev_residuals(profile, params, mu_q)
    logger.info('ground state: mu=%.12g pde_sup=%.3e after %d steps', mu_q, residuals.pde_sup, run.steps)
    return GroundState(profile, mu_q, float(mass_target), residuals, params, run.trace)


@dataclass(frozen=True)
class ShootingConfig:
    r_max: float = 20.0
    lo: float = 1.0
    hi: float = 10.0
    tol: float = 0.0  # 0 bisects until the midpoint is no longer representable
    n: int = 4095
    r0: float = 1e-4
    rtol: float = 1e-12
    atol: float = 1e-14
    split_tol: float = 1e-10
    edge_tol: float = 1e-6  # largest |Q(edge)| / h^2 before the sampled profile is flagged
    max_bisections: int = 200

    def __post_init__(self) -> None:
        if not (self.r_max > 0 and 0 < self.r0 < self.r_max):
            raise PreconditionError('shooting needs 0 < r0 < r_max')
        if not (self.lo > 0 and self.hi > 0) or self.lo == self.hi:
            raise BadBracket(f'amplitude bracket ({self.lo:g}, {self.hi:g}) must be two distinct positive values')
        if self.tol < 0:
            raise PreconditionError('bisection tol must be >= 0')
        if self.n < 3:
            raise PreconditionError('shooting grid needs n >= 3')
        if not self.edge_tol > 0:
            raise PreconditionError('edge_tol must be > 0')


class _Fate(str, Enum):
    UNDERSHOOT = 'undershoot'  # Q turns back up: Q(0) too small
    OVERSHOOT = 'overshoot'  # Q crosses zero: Q(0) too large


class _Event:
    def __init__(self, index: int, direction: float):
        self.index = index
        self.direction = direction
        self.terminal = True

    def __call__(self, r: float, y: FloatArray) -> float:
        return float(y[self.index])


@dataclass(frozen=True)
class ShotProfile:
    amplitude: float  # Q(0) of the normalized (g = 1) profile
    bracket: Tuple[float, float]
    split_radius: float
    profile: Field
    params: FlowParams
    # |Q| at the outermost node over h^2: the stationary residual the zero
    # boundary value adds there
    edge_residual: float = 0.0


def _check_shooting_regime(params: FlowParams) -> None:
    if not params.g > 0:
        raise RegimeError('a decaying positive profile exists only for g > 0')
    if not params.sigma < energy_critical_sigma(params.d):
        raise RegimeError(f'sigma = {params.sigma:g} is not energy-subcritical in d = {params.d}')


def _integrate(a: float, params: FlowParams, config: ShootingConfig, dense: bool) -> Any:
    d, s = params.d, params.sigma
    r0 = config.r0
    c = a - a ** (2.0 * s + 1.0)
    y0 = [a + r0 * r0 / (2.0 * d) * c, r0 / d * c]

    def rhs(r: float, y: FloatArray) -> FloatArray:
        q, p = y[0], y[1]
        return np.array([p, -(d - 1) / r * p + q - abs(q) ** (2.0 * s) * q])

    sol = solve_ivp(
        rhs,
        (r0, config.r_max),
        y0,
        method='DOP853',
        rtol=config.rtol,
        atol=config.atol,
        events=(_Event(0, -1.0), _Event(1, 1.0)),
        dense_output=dense,
    )
    if sol.status == -1:
        raise ShootingError(
            f'radial integration failed for Q(0) = {a!r} at r = {sol.t[-1]:g}: {sol.message}',
            suggested_r_max=float(sol.t[-1]),
        )
    return sol


def _classify(a: float, params: FlowParams, config: ShootingConfig) -> _Fate:
    if a - a ** (2.0 * params.sigma + 1.0) >= 0:
        return _Fate.UNDERSHOOT
    sol = _integrate(a, params, config, dense=False)
    if sol.t_events[0].size:
        return _Fate.OVERSHOOT
    if sol.t_events[1].size:
        return _Fate.UNDERSHOOT
    # no event before r_max: the sign of the growing mode decides
    q, p = sol.y[0, -1], sol.y[1, -1]
    return _Fate.OVERSHOOT if q + p < 0 else _Fate.UNDERSHOOT


def find_amplitude(params: FlowParams, config: ShootingConfig = ShootingConfig()) -> Tuple[float, float]:
    """Bisect Q(0) of the normalized equation; returns (undershooting, overshooting) ends.

    The bracket may be given in either order; its ends must have different fates.
    """
    _check_shooting_regime(params)
    fate_lo = _classify(config.lo, params, config)
    fate_hi = _classify(config.hi, params, config)
    if fate_lo is fate_hi:
        raise BadBracket(
            f'bracket ({config.lo:g}, {config.hi:g}) does not straddle the decaying solution: '
            f'both ends {fate_lo.value}'
        )
    under, over = (config.lo, config.hi) if fate_lo is _Fate.UNDERSHOOT else (config.hi, config.lo)
    for _ in range(config.max_bisections):
        if abs(over - under) <= config.tol:
            break
        mid = 0.5 * (under + over)
        if mid == under or mid == over:
            break
        if _classify(mid, params, config) is _Fate.UNDERSHOOT:
            under = mid
        else:
            over = mid
    logger.debug('shooting: Q(0) in [%.17g, %.17g]', min(under, over), max(under, over))
    return under, over


def _radial_function(
    params: FlowParams, config: ShootingConfig, under: float, over: float
) -> Tuple[Callable[[FloatArray], FloatArray], float]:
    d, s = params.d, params.sigma
    a = 0.5 * (under + over)
    sol_u = _integrate(under, params, config, dense=True)
    sol_o = _integrate(over, params, config, dense=True)
    r_end = float(min(sol_u.t[-1], sol_o.t[-1]))
    radii = np.linspace(config.r0, r_end, max(2, int((r_end - config.r0) / 1e-3) + 1))
    qu = sol_u.sol(radii)[0]
    qo = sol_o.sol(radii)[0]
    apart = np.nonzero(np.abs(qu - qo) > config.split_tol * a)[0]
    r_split = float(radii[max(apart[0] - 1, 0)]) if apart.size else r_end
    q_split = 0.5 * float(sol_u.sol(r_split)[0] + sol_o.sol(r_split)[0])
    if q_split > 1e-3 * a:
        logger.warning('shooting trajectories separate early (r=%.3g); the decay tail is approximate', r_split)
    nu = 0.5 * (d - 2)
    c_series = a - a ** (2.0 * s + 1.0)
    k_split = float(kve(nu, r_split))

    def radial(r: FloatArray) -> FloatArray:
        r = np.abs(np.asarray(r, dtype=np.float64))
        out = np.empty_like(r)
        core = r < config.r0
        mid = (r >= config.r0) & (r <= r_split)
        tail = r > r_split
        out[core] = a + r[core] ** 2 / (2.0 * d) * c_series
        if mid.any():
            out[mid] = 0.5 * (sol_u.sol(r[mid])[0] + sol_o.sol(r[mid])[0])
        if tail.any():
            rt = r[tail]
            out[tail] = q_split * (rt / r_split) ** (-nu) * kve(nu, rt) / k_split * np.exp(-(rt - r_split))
        return out

    return radial, r_split


def shoot_profile(params: FlowParams, config: ShootingConfig = ShootingConfig()) -> ShotProfile:
    """Free-space profile sampled on a whole-space surrogate grid of radius r_max.

    d = 1 uses the truncated line (-r_max, r_max); d >= 2 a ball flagged as a
    whole-space surrogate. For g > 0 the normalized profile is scaled by
    g^(-1/(2 sigma)).
    """
    under, over = find_amplitude(params, config)
    radial, r_split = _radial_function(params, config, under, over)
    a = 0.5 * (under + over)
    q_end = float(radial(np.array([config.r_max]))[0])
    if not abs(q_end) < 1e-6 * a:
        extra = math.log(abs(q_end) / (1e-6 * a)) + 1.0
        raise ShootingError(
            f'profile has not decayed at r_max = {config.r_max:g} (Q = {q_end:.3e})',
            suggested_r_max=config.r_max + extra,
        )
    if params.d == 1:
        domain = DomainSpec.truncated_line(config.r_max)
    else:
        domain = DomainSpec.ball(config.r_max, params.d, whole_space=True)
    grid = build_grid(domain, config.n)
    values = radial(grid.nodes) * params.g ** (-0.5 / params.sigma)
    edge_residual = grid.edge_magnitude(values) / grid.h**2
    if edge_residual > config.edge_tol:
        # Q decays like exp(-r): each unit of radius buys a factor e
        logger.warning(
            'shooting: truncation adds a residual of %.3e at the edge node (edge_tol %.1e); '
            'use r_max >= %.4g',
            edge_residual,
            config.edge_tol,
            config.r_max + math.log(edge_residual / config.edge_tol) + 1.0,
        )
    logger.info('shooting: Q(0)=%.15g, trajectories split at r=%.4g', a, r_split)
    return ShotProfile(a, (under, over), r_split, Field(grid, values), params, edge_residual)


def shoot_radial(params: FlowParams, config: ShootingConfig = ShootingConfig()) -> Field:
    return shoot_profile(params, config).profile


def ground_state_from_shot(shot: ShotProfile) -> GroundState:
    profile = shot.profile
    residuals = pohozaev_residuals(profile, shot.params, mu_value=-1.0)
    return GroundState(profile, -1.0, mass_norm(profile), residuals, shot.params)


def free_ground_state(params: FlowParams, config: ShootingConfig = ShootingConfig()) -> GroundState:
    """The shot profile as a GroundState with mu = -1 and certified residuals."""
    return ground_state_from_shot(shoot_profile(params, config))


@dataclass(frozen=True)
class GNConstant:
    value: float  # W(Q) evaluated on the shot profile
    pohozaev_value: float  # ((2s+2)/(ds)) (|grad Q| |Q|^alpha)^-(ds-2)
    printed_exponent_value: float  # same with the exponent -(ds)-2
    relative_gap: float
    reference: GroundState


def _check_k_regime(params: FlowParams) -> None:
    d, s = params.d, params.sigma
    if not mass_critical_sigma(d) < s < energy_critical_sigma(d):
        raise RegimeError(
            f'sigma = {s:g} is outside 2/d < sigma < 2/(d-2)+ for d = {d} '
            f'(mass-critical sigma is {mass_critical_sigma(d):g})'
        )


def gn_constant(
    params: FlowParams,
    config: ShootingConfig = ShootingConfig(),
    reference: Optional[GroundState] = None,
) -> GNConstant:
    """Sharp Gagliardo-Nirenberg constant W(Q), cross-checked by its Pohozaev form.

    ``reference`` may pass an already shot g = 1 profile for the same sigma and d.
    """
    _check_k_regime(params)
    normalized = params.with_g(1.0)
    if reference is None or reference.params != normalized:
        reference = free_ground_state(normalized, config)
    Q = reference.profile
    d, s = params.d, params.sigma
    alpha = (2.0 - (d - 2) * s) / (d * s - 2.0)
    value = gn_quotient(Q, reference.params)
    x = math.sqrt(gradient_sq_norm(Q)) * mass_norm(Q) ** alpha
    prefactor = (2.0 * s + 2.0) / (d * s)
    pohozaev_value = prefactor * x ** (-(d * s - 2.0))
    printed = prefactor * x ** (-d * s - 2.0)
    gap = abs(value - pohozaev_value) / value
    if gap > 1e-3:
        logger.warning('C_GN evaluations disagree: W(Q)=%.10g, Pohozaev form=%.10g', value, pohozaev_value)
    logger.info('C_GN=%.12g (relative gap %.2e)', value, gap)
    return GNConstant(value, pohozaev_value, printed, gap, reference)
